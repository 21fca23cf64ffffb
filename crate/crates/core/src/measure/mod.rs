//! The atomic measure carried by a flat moment matrix, and the real
//! variety of the generating relations.
//!
//! Everything up to the multiplication operators is exact. Floating point
//! enters only for eigenvectors, atom coordinates and weights.

mod univariate;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::{One, Zero};
use thiserror::Error;

use crate::exactla::{to_f64, Mat, Rat, Reduced, SymMat};
use crate::moment::{MomentMatrix, MomentSequence};
use crate::monomials::{monomials_up_to, Monomial, Poly};
use crate::relations::DeterminacyProfile;

pub use univariate::{resultant, UPoly};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Second coefficients `s` of the separating combination `Mx + s·My`, tried
/// in order.
pub const SEPARATORS: [f64; 5] = [0.6180339887, 0.41421356, 0.7320508, 0.2360679, 0.316227766];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("moment matrix of degree {degree} is not flat (rank {rank} vs {lower})")]
    NotFlat { degree: u32, rank: usize, lower: usize },
    #[error("could not separate the joint spectrum after {attempts} attempts")]
    SpectrumUnresolved { attempts: usize },
    #[error("density system is ill conditioned: residual {residual:e} exceeds {bound:e}")]
    IllConditioned { residual: f64, bound: f64 },
}

/// Multiplication by `x` and `y` on the column space of a flat `M_k`.
#[derive(Clone, Debug)]
pub struct MultiplicationMatrices {
    /// Independent columns of `M_{k-1}`, degree-lex order.
    pub basis: Vec<Monomial>,
    /// Matrices in the monomial basis: column `b` holds the coordinates of
    /// column `x·b`.
    pub mx: DMatrix<f64>,
    pub my: DMatrix<f64>,
    /// The same operators in an orthonormal basis of the column space
    /// (symmetric).
    pub sx: DMatrix<f64>,
    pub sy: DMatrix<f64>,
}

impl MultiplicationMatrices {
    /// `‖MxMy − MyMx‖ / (‖Mx‖‖My‖)`, Frobenius norms, symmetric form.
    pub fn commutator(&self) -> f64 {
        let c = &self.sx * &self.sy - &self.sy * &self.sx;
        let scale = self.sx.norm() * self.sy.norm();
        if scale == 0.0 {
            0.0
        } else {
            c.norm() / scale
        }
    }
}

fn is_flat(m: &MomentMatrix) -> Result<(), MeasureError> {
    let k = m.degree();
    let rank = m.rank();
    let lower = if k == 0 { 0 } else { m.truncate(k - 1).rank() };
    if k == 0 || rank != lower {
        return Err(MeasureError::NotFlat { degree: k, rank, lower });
    }
    Ok(())
}

/// `M_B = L D Lᵀ` for positive definite `M_B`.
fn ldl(a: &Mat) -> (Mat, Vec<Rat>) {
    let n = a.rows();
    let mut l = Mat::identity(n);
    let mut d = vec![Rat::zero(); n];
    for j in 0..n {
        let mut dj = a[(j, j)].clone();
        for k in 0..j {
            dj -= &l[(j, k)] * &l[(j, k)] * &d[k];
        }
        for i in j + 1..n {
            let mut v = a[(i, j)].clone();
            for k in 0..j {
                v -= &l[(i, k)] * &l[(j, k)] * &d[k];
            }
            l[(i, j)] = v / &dj;
        }
        d[j] = dj;
    }
    (l, d)
}

/// `L⁻¹ X` for unit lower triangular `L`.
fn forward(l: &Mat, x: &Mat) -> Mat {
    let n = l.rows();
    let mut out = x.clone();
    for c in 0..x.cols() {
        for i in 0..n {
            let mut v = out[(i, c)].clone();
            for k in 0..i {
                if !l[(i, k)].is_zero() {
                    v -= &l[(i, k)] * &out[(k, c)];
                }
            }
            out[(i, c)] = v;
        }
    }
    out
}

/// `D^{-1/2} L⁻¹ H L⁻ᵀ D^{-1/2}`.
fn symmetric_form(l: &Mat, d: &[Rat], h: &Mat) -> DMatrix<f64> {
    let g = forward(l, &forward(l, h).transpose());
    let n = d.len();
    let root: Vec<f64> = d.iter().map(|v| to_f64(v).sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| to_f64(&g[(i, j)]) / (root[i] * root[j]));
    (&s + s.transpose()) * 0.5
}

pub fn multiplication_matrices(m: &MomentMatrix) -> Result<MultiplicationMatrices, MeasureError> {
    is_flat(m)?;
    let k = m.degree();
    let lower = m.truncate(k - 1);
    let red = Reduced::new(lower.mat().as_mat(), None);
    let labels = lower.labels();
    let basis: Vec<Monomial> = red.pivot_cols.iter().map(|&c| labels[c]).collect();
    let beta = m.moments();
    let r = basis.len();
    let mb = Mat::from_fn(r, r, |i, j| beta.at(basis[i].times(basis[j])).clone());
    let mut hs = Vec::new();
    for shift in [Monomial::new(1, 0), Monomial::new(0, 1)] {
        hs.push(Mat::from_fn(r, r, |i, j| {
            beta.at(shift.times(basis[i]).times(basis[j])).clone()
        }));
    }
    let solve = Reduced::new(&mb, Some(&hs[0].hstack(&hs[1])));
    let mono = |off: usize| {
        let mut out = DMatrix::zeros(r, r);
        for c in 0..r {
            let sol = solve.solution(off + c).expect("basis block is invertible");
            for (i, v) in sol.iter().enumerate() {
                out[(i, c)] = to_f64(v);
            }
        }
        out
    };
    let (l, d) = ldl(&mb);
    Ok(MultiplicationMatrices {
        mx: mono(0),
        my: mono(r),
        sx: symmetric_form(&l, &d, &hs[0]),
        sy: symmetric_form(&l, &d, &hs[1]),
        basis,
    })
}

/// Joint eigenvalues of `Mx`, `My`, read as Rayleigh quotients on the
/// eigenvectors of `Mx + s·My`.
pub fn extract_atoms(mm: &MultiplicationMatrices, tol: f64) -> Result<Vec<(f64, f64)>, MeasureError> {
    let scale = 1.0 + mm.sx.amax().max(mm.sy.amax());
    let sep = tol.sqrt().max(1e-6) * scale;
    for s in SEPARATORS {
        let eig = SymmetricEigen::new(&mm.sx + &mm.sy * s);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        if vals.windows(2).any(|w| w[1] - w[0] < sep) {
            continue;
        }
        let mut atoms = Vec::with_capacity(vals.len());
        for v in eig.eigenvectors.column_iter() {
            let v: DVector<f64> = v.into_owned();
            let x = v.dot(&(&mm.sx * &v));
            let y = v.dot(&(&mm.sy * &v));
            atoms.push((x, y));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        atoms.dedup_by(|a, b| (a.0 - b.0).abs() <= sep && (a.1 - b.1).abs() <= sep);
        return Ok(atoms);
    }
    Err(MeasureError::SpectrumUnresolved {
        attempts: SEPARATORS.len(),
    })
}

/// Per-moment residuals `Σ ρ_k x_k^i y_k^j − β_{ij}`.
pub fn moment_residuals(atoms: &[(f64, f64)], weights: &[f64], beta: &MomentSequence) -> Vec<(Monomial, f64)> {
    beta.iter()
        .map(|(mono, b)| {
            let s: f64 = atoms
                .iter()
                .zip(weights)
                .map(|(&(x, y), w)| w * mono.eval_f64(x, y))
                .sum();
            (mono, s - to_f64(b))
        })
        .collect()
}

/// Least-squares weights for `Σ ρ_k x_k^i y_k^j = β_{ij}` over every moment
/// in `beta`, rows scaled to unit maximum.
pub fn solve_densities(
    atoms: &[(f64, f64)],
    beta: &MomentSequence,
    tol: f64,
) -> Result<(Vec<f64>, Vec<(Monomial, f64)>), MeasureError> {
    let monos = monomials_up_to(beta.degree());
    let mut v = DMatrix::zeros(monos.len(), atoms.len());
    let mut rhs = DVector::zeros(monos.len());
    for (r, mono) in monos.iter().enumerate() {
        let row: Vec<f64> = atoms.iter().map(|&(x, y)| mono.eval_f64(x, y)).collect();
        let s = row.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for (c, val) in row.iter().enumerate() {
            v[(r, c)] = val / s;
        }
        rhs[r] = to_f64(beta.at(*mono)) / s;
    }
    // Column equilibration: atoms far from the origin carry tiny weights
    // and huge high-degree rows.
    let norms: Vec<f64> = v.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).collect();
    for (c, n) in norms.iter().enumerate() {
        v.column_mut(c).scale_mut(1.0 / n);
    }
    let svd = v.clone().svd(true, true);
    let solve = |b: &DVector<f64>| {
        svd.solve(b, 1e-15).map_err(|_| MeasureError::IllConditioned {
            residual: f64::INFINITY,
            bound: 0.0,
        })
    };
    let mut sol = solve(&rhs)?;
    // One step of iterative refinement.
    let correction = solve(&(&rhs - &v * &sol))?;
    sol += correction;
    let weights: Vec<f64> = sol.iter().zip(&norms).map(|(w, n)| w / n).collect();
    let residuals = moment_residuals(atoms, &weights, beta);
    let worst = residuals.iter().fold(0.0f64, |a, (_, r)| a.max(r.abs()));
    let bound = tol * scale_of(beta);
    if worst > bound {
        return Err(MeasureError::IllConditioned { residual: worst, bound });
    }
    Ok((weights, residuals))
}

fn scale_of(beta: &MomentSequence) -> f64 {
    to_f64(&beta.max_abs()).max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    pub residuals: Vec<(Monomial, f64)>,
}

impl AtomicMeasure {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |a, (_, r)| a.max(r.abs()))
    }
}

/// Atoms and weights of the measure represented by a flat `M_k`.
pub fn extract_measure(m: &MomentMatrix, tol: f64) -> Result<AtomicMeasure, MeasureError> {
    let mm = multiplication_matrices(m)?;
    let atoms = extract_atoms(&mm, tol)?;
    let (weights, residuals) = solve_densities(&atoms, m.moments(), tol)?;
    Ok(AtomicMeasure {
        atoms,
        weights,
        residuals,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub weights_positive: bool,
    /// Largest `|g(atom)| / Σ|terms of g at atom|` over both generators.
    pub max_generator_residual: f64,
    pub on_variety: bool,
    pub max_moment_residual: f64,
    pub moments_match: bool,
    pub atom_count: usize,
    pub rank: usize,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks weights, support, moments and atom count of `mu` against the
/// flat matrix it came from.
pub fn verify_measure(mu: &AtomicMeasure, flat: &MomentMatrix, prof: &DeterminacyProfile, tol: f64) -> VerifyReport {
    let mut failures = Vec::new();
    let weights_positive = mu.weights.iter().all(|&w| w > tol);
    if !weights_positive {
        failures.push("non-positive weight".to_string());
    }
    let (f, g) = prof.generators_original();
    let max_generator_residual = mu
        .atoms
        .iter()
        .flat_map(|&(x, y)| [&f, &g].map(|p| relative_value(p, x, y)))
        .fold(0.0, f64::max);
    let gen_tol = tol.sqrt();
    let on_variety = max_generator_residual <= gen_tol;
    if !on_variety {
        failures.push(format!("atom off the variety (residual {max_generator_residual:e})"));
    }
    let residuals = moment_residuals(&mu.atoms, &mu.weights, flat.moments());
    let max_moment_residual = residuals.iter().fold(0.0f64, |a, (_, r)| a.max(r.abs()));
    let moments_match = max_moment_residual <= tol * scale_of(flat.moments());
    if !moments_match {
        failures.push(format!("moment residual {max_moment_residual:e}"));
    }
    let rank = flat.rank();
    if mu.atoms.len() != rank {
        failures.push(format!("{} atoms for rank {rank}", mu.atoms.len()));
    }
    VerifyReport {
        weights_positive,
        max_generator_residual,
        on_variety,
        max_moment_residual,
        moments_match,
        atom_count: mu.atoms.len(),
        rank,
        failures,
    }
}

fn relative_value(p: &Poly, x: f64, y: f64) -> f64 {
    let scale = p.eval_abs_f64(x, y).max(1.0);
    p.eval_f64(x, y).abs() / scale
}

/// Common real zeros of the generating pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Variety {
    pub generators: Vec<Poly>,
    pub points: Option<Vec<(f64, f64)>>,
    pub cardinality: Option<usize>,
}

/// Largest resultant degree handled.
pub const MAX_RESULTANT_DEGREE: usize = 12;

pub fn variety_cardinality(prof: &DeterminacyProfile, tol: f64) -> Option<usize> {
    variety(prof, tol).cardinality
}

/// Real points of `{x^n = p, y^m = q}` (original frame): resultant in `y`,
/// Sturm isolation of its real roots, then back substitution.
pub fn variety(prof: &DeterminacyProfile, tol: f64) -> Variety {
    let (f, g) = prof.generators_original();
    let points = common_zeros(&f, &g, tol);
    Variety {
        generators: vec![f, g],
        cardinality: points.as_ref().map(Vec::len),
        points,
    }
}

/// `y`-coefficients of `p(x0, y)`, constant first, formal length
/// `deg_y p + 1`.
fn y_coeffs(p: &Poly, x0: &Rat) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); p.degree_in_y() as usize + 1];
    for (mono, c) in p.terms() {
        out[mono.j as usize] += c * pow(x0, mono.i);
    }
    out
}

fn pow(x: &Rat, e: u32) -> Rat {
    (0..e).fold(Rat::one(), |acc, _| acc * x)
}

/// `Res_y(f, g)` as a polynomial in `x`.
pub fn resultant_in_y(f: &Poly, g: &Poly) -> UPoly {
    let bound = (f.degree() * g.degree()) as i64;
    let points: Vec<(Rat, Rat)> = (0..=bound)
        .map(|k| {
            let x0 = Rat::from_integer(k.into());
            let r = resultant(&y_coeffs(f, &x0), &y_coeffs(g, &x0));
            (x0, r)
        })
        .collect();
    UPoly::interpolate(&points)
}

fn common_zeros(f: &Poly, g: &Poly, tol: f64) -> Option<Vec<(f64, f64)>> {
    if f.degree_in_y() == 0 && g.degree_in_y() == 0 {
        return None;
    }
    let res = resultant_in_y(f, g);
    let deg = res.degree()?;
    if deg > MAX_RESULTANT_DEGREE {
        return None;
    }
    let xs = res.square_free().real_roots(1e-13);
    let accept = tol.sqrt().max(1e-7);
    let mut points: Vec<(f64, f64)> = Vec::new();
    for x in xs {
        let mut gens = [f, g];
        gens.sort_by_key(|p| match p.degree_in_y() {
            0 => u32::MAX,
            k => k,
        });
        let ys = gens
            .iter()
            .filter(|p| p.degree_in_y() > 0)
            .find_map(|p| real_roots_in_y(p, x, accept))
            .unwrap_or_default();
        for y in ys {
            if [f, g].iter().all(|p| relative_value(p, x, y) <= accept)
                && !points
                    .iter()
                    .any(|&(px, py)| (px - x).abs() <= accept && (py - y).abs() <= accept)
            {
                points.push((x, y));
            }
        }
    }
    Some(points)
}

/// Real roots of `p(x, ·)`, or `None` if `p(x, ·)` vanishes identically.
fn real_roots_in_y(p: &Poly, x: f64, accept: f64) -> Option<Vec<f64>> {
    let mut c = vec![0.0f64; p.degree_in_y() as usize + 1];
    let mut scale = 0.0f64;
    for (mono, coef) in p.terms() {
        let v = to_f64(coef) * x.powi(mono.i as i32);
        c[mono.j as usize] += v;
        scale = scale.max(v.abs());
    }
    let cut = 1e-12 * scale.max(1.0);
    while c.last().is_some_and(|v| v.abs() <= cut) {
        c.pop();
    }
    match c.len() {
        0 => None,
        1 => Some(Vec::new()),
        2 => Some(vec![-c[0] / c[1]]),
        n => {
            let deg = n - 1;
            let lead = c[deg];
            let companion = DMatrix::from_fn(deg, deg, |i, j| {
                if i == 0 {
                    -c[deg - 1 - j] / lead
                } else if i == j + 1 {
                    1.0
                } else {
                    0.0
                }
            });
            let roots = companion.complex_eigenvalues();
            Some(
                roots
                    .iter()
                    .filter(|z| z.im.abs() <= accept * (1.0 + z.re.abs()))
                    .map(|z| z.re)
                    .collect(),
            )
        }
    }
}

/// The exact symmetric matrix `[β(b_i b_j)]` for a monomial basis.
pub fn basis_gram(beta: &MomentSequence, basis: &[Monomial]) -> SymMat {
    let n = basis.len();
    SymMat::new(Mat::from_fn(n, n, |i, j| beta.at(basis[i].times(basis[j])).clone())).expect("symmetric")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{rat, ratio};
    use crate::moment::{build_moment_matrix, moments_from_atoms, RationalAtomicMeasure};
    use crate::relations::detect_rd;

    fn flat_of(mu: &RationalAtomicMeasure, k: u32) -> MomentMatrix {
        build_moment_matrix(&moments_from_atoms(mu, 2 * k).unwrap(), k).unwrap()
    }

    #[test]
    fn point_mass() {
        let mu = RationalAtomicMeasure::dirac(rat(2), rat(3));
        let m = flat_of(&mu, 1);
        let mm = multiplication_matrices(&m).unwrap();
        assert_eq!(mm.basis, vec![Monomial::ONE]);
        assert!((mm.mx[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((mm.my[(0, 0)] - 3.0).abs() < 1e-12);
        let out = extract_measure(&m, DEFAULT_TOL).unwrap();
        assert_eq!(out.atoms.len(), 1);
        assert!((out.atoms[0].0 - 2.0).abs() < 1e-10 && (out.atoms[0].1 - 3.0).abs() < 1e-10);
        assert!((out.weights[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unit_square_grid() {
        let mu = RationalAtomicMeasure::uniform_grid(&[rat(0), rat(1)], &[rat(0), rat(1)], ratio(1, 4)).unwrap();
        // rank M_1 = 3 < rank M_2 = 4 = rank M_3: the first flat matrix is M_3.
        assert!(multiplication_matrices(&flat_of(&mu, 2)).is_err());
        let m = flat_of(&mu, 3);
        let mm = multiplication_matrices(&m).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(mm.sx.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([0.0, 0.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(mm.commutator() < 1e-12);
        let out = extract_measure(&m, DEFAULT_TOL).unwrap();
        assert_eq!(out.atoms.len(), 4);
        for w in &out.weights {
            assert!((w - 0.25).abs() < 1e-10);
        }
        let prof = detect_rd(&m).unwrap();
        let report = verify_measure(&out, &m, &prof, DEFAULT_TOL);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn not_flat_rejected() {
        let mu = RationalAtomicMeasure::new(
            (0..4).map(|k| (rat(k), rat(k * k % 3))).collect(),
            vec![rat(1); 4],
        )
        .unwrap();
        let m = flat_of(&mu, 1);
        assert!(matches!(multiplication_matrices(&m), Err(MeasureError::NotFlat { .. })));
    }

    fn prof_of(f: Poly, g: Poly) -> DeterminacyProfile {
        let n = f.degree();
        let m = g.degree();
        DeterminacyProfile {
            n,
            p: Poly::monomial(Monomial::new(n, 0), Rat::one()).sub(&f),
            m,
            q: Poly::monomial(Monomial::new(0, m), Rat::one()).sub(&g),
            roles_swapped: false,
            both_orientations: false,
            classification: crate::relations::Classification::GeneralRd,
        }
    }

    #[test]
    fn variety_of_lines() {
        let f = Poly::x().sub(&Poly::one());
        let g = Poly::y().sub(&Poly::constant(rat(2)));
        let v = variety(&prof_of(f, g), DEFAULT_TOL);
        assert_eq!(v.cardinality, Some(1));
        let (x, y) = v.points.unwrap()[0];
        assert!((x - 1.0).abs() < 1e-10 && (y - 2.0).abs() < 1e-10);
    }

    #[test]
    fn variety_of_small_grid() {
        let f = Poly::x().mul(&Poly::x().sub(&Poly::one()));
        let g = Poly::y().mul(&Poly::y().sub(&Poly::one()));
        assert_eq!(variety_cardinality(&prof_of(f, g), DEFAULT_TOL), Some(4));
    }

    #[test]
    fn variety_with_complex_branches() {
        // x^2 = 1, y^2 = -x: real points only over x = -1.
        let f = Poly::x().mul(&Poly::x()).sub(&Poly::one());
        let g = Poly::y().mul(&Poly::y()).add(&Poly::x());
        assert_eq!(variety_cardinality(&prof_of(f, g), DEFAULT_TOL), Some(2));
    }
}
