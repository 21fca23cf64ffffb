//! Moment sequences, the Riesz functional and moment matrices.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::exactla::{rank, Mat, Rat, SymMat};
use crate::monomials::{count_up_to, monomials_up_to, Monomial, Poly};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MomentError {
    #[error("moment sequence degree must be even, got {0}")]
    OddDegree(u32),
    #[error("missing moments: {}", fmt_indices(.0))]
    Missing(Vec<(u32, u32)>),
    #[error("moment ({0}, {1}) given more than once")]
    Duplicate(u32, u32),
    #[error("moment ({0}, {1}) exceeds degree {2}")]
    OutOfRange(u32, u32, u32),
    #[error("polynomial of degree {degree} exceeds moment degree {max}")]
    DegreeTooHigh { degree: u32, max: u32 },
    #[error("matrix degree {k} exceeds half-degree {d}")]
    MatrixTooLarge { k: u32, d: u32 },
    #[error("weight {index} is not positive")]
    NonPositiveWeight { index: usize },
    #[error("atoms {0} and {1} coincide")]
    DuplicateAtom(usize, usize),
    #[error("node list contains a repeated value")]
    DuplicateNode,
    #[error("{0}")]
    Shape(String),
}

fn fmt_indices(v: &[(u32, u32)]) -> String {
    v.iter()
        .map(|(i, j)| format!("({i},{j})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The moments `β_{ij}`, `i + j ≤ degree`, with `degree` even.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MomentSequence {
    degree: u32,
    // Indexed by degree-lex position of x^i y^j.
    values: Vec<Rat>,
}

impl MomentSequence {
    /// Builds a complete sequence from `(i, j, value)` triples.
    pub fn from_triples(
        degree: u32,
        triples: impl IntoIterator<Item = (u32, u32, Rat)>,
    ) -> Result<Self, MomentError> {
        if degree % 2 != 0 {
            return Err(MomentError::OddDegree(degree));
        }
        let mut slots: Vec<Option<Rat>> = vec![None; count_up_to(degree)];
        for (i, j, v) in triples {
            if i + j > degree {
                return Err(MomentError::OutOfRange(i, j, degree));
            }
            let slot = &mut slots[Monomial::new(i, j).index()];
            if slot.is_some() {
                return Err(MomentError::Duplicate(i, j));
            }
            *slot = Some(v);
        }
        let missing: Vec<(u32, u32)> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(k, _)| {
                let m = Monomial::from_index(k);
                (m.i, m.j)
            })
            .collect();
        if !missing.is_empty() {
            return Err(MomentError::Missing(missing));
        }
        Ok(MomentSequence {
            degree,
            values: slots.into_iter().map(Option::unwrap).collect(),
        })
    }

    /// Sequence with `β_{ij} = f(i, j)`.
    pub fn from_fn(degree: u32, mut f: impl FnMut(u32, u32) -> Rat) -> Result<Self, MomentError> {
        if degree % 2 != 0 {
            return Err(MomentError::OddDegree(degree));
        }
        Ok(MomentSequence {
            degree,
            values: monomials_up_to(degree).into_iter().map(|m| f(m.i, m.j)).collect(),
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn half_degree(&self) -> u32 {
        self.degree / 2
    }

    /// `β_{ij}`. Panics when `i + j` exceeds the degree.
    pub fn get(&self, i: u32, j: u32) -> &Rat {
        assert!(i + j <= self.degree, "β_({i},{j}) beyond degree {}", self.degree);
        &self.values[Monomial::new(i, j).index()]
    }

    pub fn at(&self, m: Monomial) -> &Rat {
        self.get(m.i, m.j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Monomial, &Rat)> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| (Monomial::from_index(k), v))
    }

    /// Largest `|β_{ij}|`.
    pub fn max_abs(&self) -> Rat {
        self.values.iter().map(Signed::abs).max().unwrap_or_else(Rat::zero)
    }

    /// `c · β`.
    pub fn scaled(&self, c: &Rat) -> MomentSequence {
        MomentSequence {
            degree: self.degree,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `β'_{ij} = β_{ji}`.
    pub fn swapped(&self) -> MomentSequence {
        MomentSequence::from_fn(self.degree, |i, j| self.get(j, i).clone()).expect("even degree")
    }

    /// Keeps the moments of degree at most `degree`.
    pub fn truncated(&self, degree: u32) -> MomentSequence {
        assert!(degree <= self.degree && degree % 2 == 0);
        MomentSequence {
            degree,
            values: self.values[..count_up_to(degree)].to_vec(),
        }
    }

    /// Appends only the moments of degree `degree + 1`. The result has odd
    /// degree and is used while building the even layer.
    pub(crate) fn with_odd_layer(&self, odd: &BTreeMap<Monomial, Rat>) -> MomentSequence {
        let mut values = self.values.clone();
        for m in crate::monomials::monomials_of_degree(self.degree + 1) {
            values.push(odd[&m].clone());
        }
        MomentSequence {
            degree: self.degree + 1,
            values,
        }
    }

    /// Appends the moments of degree `degree + 1` and `degree + 2` given
    /// as maps from monomial to value. Panics if any is missing.
    pub(crate) fn extended(
        &self,
        odd: &BTreeMap<Monomial, Rat>,
        even: &BTreeMap<Monomial, Rat>,
    ) -> MomentSequence {
        let mut values = self.values.clone();
        for m in crate::monomials::monomials_of_degree(self.degree + 1) {
            values.push(odd[&m].clone());
        }
        for m in crate::monomials::monomials_of_degree(self.degree + 2) {
            values.push(even[&m].clone());
        }
        MomentSequence {
            degree: self.degree + 2,
            values,
        }
    }
}

impl fmt::Debug for MomentSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let entries: Vec<String> = self
            .iter()
            .map(|(m, v)| format!("β{},{}={}", m.i, m.j, v))
            .collect();
        write!(f, "MomentSequence(deg {}; {})", self.degree, entries.join(" "))
    }
}

/// `L_β(f) = Σ a_{ij} β_{ij}`.
pub fn riesz(beta: &MomentSequence, f: &Poly) -> Result<Rat, MomentError> {
    if !f.is_zero() && f.degree() > beta.degree() {
        return Err(MomentError::DegreeTooHigh {
            degree: f.degree(),
            max: beta.degree(),
        });
    }
    Ok(f.terms().fold(Rat::zero(), |acc, (m, c)| acc + c * beta.at(*m)))
}

/// `M_k(β)`: rows and columns indexed by monomials of degree at most `k`,
/// entry `(x^a y^b, x^c y^e) = β_{a+c, b+e}`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MomentMatrix {
    degree: u32,
    mat: SymMat,
    moments: MomentSequence,
}

impl MomentMatrix {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn mat(&self) -> &SymMat {
        &self.mat
    }

    pub fn moments(&self) -> &MomentSequence {
        &self.moments
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn labels(&self) -> Vec<Monomial> {
        monomials_up_to(self.degree)
    }

    /// Entry in row `row`, column `col`.
    pub fn entry(&self, row: Monomial, col: Monomial) -> &Rat {
        &self.mat[(row.index(), col.index())]
    }

    /// `p(X, Y) = M p̂` as a column vector.
    pub fn eval_columns(&self, p: &Poly) -> Vec<Rat> {
        self.mat.as_mat().mul_vec(&p.coeffs(self.degree))
    }

    pub fn rank(&self) -> usize {
        rank(self.mat.as_mat())
    }

    /// `M_k` for `k ≤ degree` (leading principal submatrix).
    pub fn truncate(&self, k: u32) -> MomentMatrix {
        assert!(k <= self.degree);
        build_moment_matrix(&self.moments, k).expect("k within range")
    }

    /// Same moments with `x` and `y` exchanged.
    pub fn swapped(&self) -> MomentMatrix {
        build_moment_matrix(&self.moments.swapped(), self.degree).expect("same degree")
    }

    /// `c · M` (positive scaling of all moments).
    pub fn scaled(&self, c: &Rat) -> MomentMatrix {
        build_moment_matrix(&self.moments.scaled(c), self.degree).expect("same degree")
    }

    /// Structural check; see [`validate_structure`].
    pub fn validate(&self) -> Vec<StructureViolation> {
        validate_structure(self.degree, self.mat.as_mat())
    }
}

/// Builds `M_k(β)`.
pub fn build_moment_matrix(beta: &MomentSequence, k: u32) -> Result<MomentMatrix, MomentError> {
    let d = beta.half_degree();
    if k > d {
        return Err(MomentError::MatrixTooLarge { k, d });
    }
    let labels = monomials_up_to(k);
    let mat = Mat::from_fn(labels.len(), labels.len(), |r, c| {
        beta.at(labels[r].times(labels[c])).clone()
    });
    Ok(MomentMatrix {
        degree: k,
        mat: SymMat::new(mat).expect("moment matrices are symmetric"),
        moments: beta.truncated(2 * k),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureViolation {
    /// `mat[row][col] != mat[col][row]`.
    Asymmetric { row: usize, col: usize },
    /// Two entries that must both equal `β_{moment}` disagree. `block` and
    /// `level` locate the second entry; `positions` holds both entries.
    Moment {
        moment: (u32, u32),
        block: (u32, u32),
        level: u32,
        positions: [(usize, usize); 2],
        values: [Rat; 2],
    },
    Shape { expected: usize, got: (usize, usize) },
}

/// Empty iff `mat` is symmetric, every block `B[i,j]` is constant on its
/// cross-diagonals, and all entries sharing a moment index agree. At most
/// one `Moment` violation is reported per moment index.
pub fn validate_structure(degree: u32, mat: &Mat) -> Vec<StructureViolation> {
    let labels = monomials_up_to(degree);
    let n = labels.len();
    if mat.rows() != n || mat.cols() != n {
        return vec![StructureViolation::Shape {
            expected: n,
            got: (mat.rows(), mat.cols()),
        }];
    }
    let mut out = Vec::new();
    for r in 0..n {
        for c in r + 1..n {
            if mat[(r, c)] != mat[(c, r)] {
                out.push(StructureViolation::Asymmetric { row: r, col: c });
            }
        }
    }
    let mut first: BTreeMap<Monomial, (usize, usize)> = BTreeMap::new();
    let mut reported: BTreeMap<Monomial, ()> = BTreeMap::new();
    for r in 0..n {
        for c in 0..n {
            let m = labels[r].times(labels[c]);
            match first.get(&m) {
                None => {
                    first.insert(m, (r, c));
                }
                Some(&(r0, c0)) => {
                    if mat[(r0, c0)] != mat[(r, c)] && !reported.contains_key(&m) {
                        reported.insert(m, ());
                        out.push(StructureViolation::Moment {
                            moment: (m.i, m.j),
                            block: (labels[r].degree(), labels[c].degree()),
                            level: labels[r].j + labels[c].j,
                            positions: [(r0, c0), (r, c)],
                            values: [mat[(r0, c0)].clone(), mat[(r, c)].clone()],
                        });
                    }
                }
            }
        }
    }
    out
}

/// A finitely atomic measure with rational atoms and positive rational
/// weights.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RationalAtomicMeasure {
    atoms: Vec<(Rat, Rat)>,
    weights: Vec<Rat>,
}

impl RationalAtomicMeasure {
    pub fn new(atoms: Vec<(Rat, Rat)>, weights: Vec<Rat>) -> Result<Self, MomentError> {
        if atoms.len() != weights.len() {
            return Err(MomentError::Shape(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(index) = weights.iter().position(|w| !w.is_positive()) {
            return Err(MomentError::NonPositiveWeight { index });
        }
        for a in 0..atoms.len() {
            for b in a + 1..atoms.len() {
                if atoms[a] == atoms[b] {
                    return Err(MomentError::DuplicateAtom(a, b));
                }
            }
        }
        Ok(RationalAtomicMeasure { atoms, weights })
    }

    /// Point mass of weight 1.
    pub fn dirac(x: Rat, y: Rat) -> Self {
        RationalAtomicMeasure {
            atoms: vec![(x, y)],
            weights: vec![Rat::one()],
        }
    }

    /// Product grid `xs × ys`; `weights` are listed with `ys` varying
    /// fastest.
    pub fn grid(xs: &[Rat], ys: &[Rat], weights: &[Rat]) -> Result<Self, MomentError> {
        let distinct = |v: &[Rat]| (0..v.len()).all(|a| (a + 1..v.len()).all(|b| v[a] != v[b]));
        if !distinct(xs) || !distinct(ys) {
            return Err(MomentError::DuplicateNode);
        }
        if weights.len() != xs.len() * ys.len() {
            return Err(MomentError::Shape(format!(
                "grid of {}x{} needs {} weights, got {}",
                xs.len(),
                ys.len(),
                xs.len() * ys.len(),
                weights.len()
            )));
        }
        let atoms = xs
            .iter()
            .flat_map(|x| ys.iter().map(move |y| (x.clone(), y.clone())))
            .collect();
        RationalAtomicMeasure::new(atoms, weights.to_vec())
    }

    /// Grid with every weight equal to `w`.
    pub fn uniform_grid(xs: &[Rat], ys: &[Rat], w: Rat) -> Result<Self, MomentError> {
        RationalAtomicMeasure::grid(xs, ys, &vec![w; xs.len() * ys.len()])
    }

    pub fn atoms(&self) -> &[(Rat, Rat)] {
        &self.atoms
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// `β_{ij} = Σ_k w_k x_k^i y_k^j` for `i + j ≤ up_to` (even).
pub fn moments_from_atoms(mu: &RationalAtomicMeasure, up_to: u32) -> Result<MomentSequence, MomentError> {
    // Power tables avoid recomputing x^i per moment.
    let powers = |v: &Rat| {
        let mut p = Vec::with_capacity(up_to as usize + 1);
        let mut acc = Rat::one();
        for _ in 0..=up_to {
            p.push(acc.clone());
            acc *= v;
        }
        p
    };
    let tables: Vec<(Vec<Rat>, Vec<Rat>)> = mu.atoms.iter().map(|(x, y)| (powers(x), powers(y))).collect();
    MomentSequence::from_fn(up_to, |i, j| {
        tables
            .iter()
            .zip(&mu.weights)
            .fold(Rat::zero(), |acc, ((px, py), w)| {
                acc + w * &px[i as usize] * &py[j as usize]
            })
    })
}
