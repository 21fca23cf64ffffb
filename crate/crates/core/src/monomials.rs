//! Degree-lexicographic monomials and sparse bivariate polynomials.
//!
//! The order is `1, x, y, x², xy, y², x³, …`: by total degree, and within a
//! degree by descending power of `x`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::exactla::{to_f64, Rat};

/// `x^i y^j`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, serde::Serialize, serde::Deserialize)]
pub struct Monomial {
    pub i: u32,
    pub j: u32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { i: 0, j: 0 };

    pub const fn new(i: u32, j: u32) -> Self {
        Monomial { i, j }
    }

    pub fn degree(self) -> u32 {
        self.i + self.j
    }

    pub fn index(self) -> usize {
        deglex_index(self)
    }

    pub fn times(self, other: Monomial) -> Monomial {
        Monomial::new(self.i + other.i, self.j + other.j)
    }

    /// Exchanges the roles of `x` and `y`.
    pub fn swapped(self) -> Monomial {
        Monomial::new(self.j, self.i)
    }

    /// `x^i y^j` at the point `(x, y)`.
    pub fn eval_f64(self, x: f64, y: f64) -> f64 {
        x.powi(self.i as i32) * y.powi(self.j as i32)
    }

    /// Inverse of [`deglex_index`].
    pub fn from_index(idx: usize) -> Monomial {
        // Largest k with k(k+1)/2 <= idx.
        let mut k = 0usize;
        while (k + 1) * (k + 2) / 2 <= idx {
            k += 1;
        }
        let j = idx - k * (k + 1) / 2;
        Monomial::new((k - j) as u32, j as u32)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then(self.j.cmp(&other.j))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn part(f: &mut fmt::Formatter<'_>, var: &str, e: u32) -> fmt::Result {
            match e {
                0 => Ok(()),
                1 => write!(f, "{var}"),
                _ => write!(f, "{var}^{e}"),
            }
        }
        if self.i == 0 && self.j == 0 {
            return write!(f, "1");
        }
        part(f, "x", self.i)?;
        part(f, "y", self.j)
    }
}

/// Position of `x^i y^j` in degree-lex order.
pub fn deglex_index(m: Monomial) -> usize {
    let k = m.degree() as usize;
    k * (k + 1) / 2 + m.j as usize
}

/// Number of monomials of degree at most `d`.
pub fn count_up_to(d: u32) -> usize {
    let d = d as usize;
    (d + 1) * (d + 2) / 2
}

/// All monomials of degree at most `d`, in degree-lex order.
pub fn monomials_up_to(d: u32) -> Vec<Monomial> {
    (0..=d).flat_map(monomials_of_degree).collect()
}

/// Monomials of exact degree `k`: `x^k, x^{k-1}y, …, y^k`.
pub fn monomials_of_degree(k: u32) -> impl Iterator<Item = Monomial> {
    (0..=k).map(move |j| Monomial::new(k - j, j))
}

/// Entry pairs of block `B[block_row, block_col]` lying on cross-diagonal
/// `level`. Every pair `(row, col)` shares the moment index
/// `row.times(col) = (block_row + block_col - level, level)`.
pub fn cross_diagonal(block_row: u32, block_col: u32, level: u32) -> Vec<(Monomial, Monomial)> {
    if level > block_row + block_col {
        return Vec::new();
    }
    (0..=block_row)
        .filter_map(|k| {
            let l = level.checked_sub(k)?;
            (l <= block_col).then(|| {
                (
                    Monomial::new(block_row - k, k),
                    Monomial::new(block_col - l, l),
                )
            })
        })
        .collect()
}

/// Sparse bivariate polynomial with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rat>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::monomial(Monomial::ONE, Rat::one())
    }

    pub fn monomial(m: Monomial, c: Rat) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn x() -> Self {
        Poly::monomial(Monomial::new(1, 0), Rat::one())
    }

    pub fn y() -> Self {
        Poly::monomial(Monomial::new(0, 1), Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        Poly::monomial(Monomial::ONE, c)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rat)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Polynomial whose coefficient on the `k`-th degree-lex monomial is
    /// `coeffs[k]`.
    pub fn from_coeffs(coeffs: &[Rat]) -> Self {
        Poly::from_terms(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| (Monomial::from_index(k), c.clone())),
        )
    }

    pub fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert_with(Rat::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: Monomial) -> Rat {
        self.terms.get(&m).cloned().unwrap_or_else(Rat::zero)
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Degree-lex largest monomial with nonzero coefficient.
    pub fn leading(&self) -> Option<Monomial> {
        self.terms.keys().next_back().copied()
    }

    pub fn degree_in_y(&self) -> u32 {
        self.terms.keys().map(|m| m.j).max().unwrap_or(0)
    }

    pub fn degree_in_x(&self) -> u32 {
        self.terms.keys().map(|m| m.i).max().unwrap_or(0)
    }

    /// `x^a y^b · self`.
    pub fn shift(&self, by: Monomial) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.times(by), c.clone())).collect(),
        }
    }

    pub fn scale(&self, s: &Rat) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (*m, c * s)).collect(),
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.times(*m2), c1 * c2);
            }
        }
        out
    }

    pub fn swapped(&self) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (m.swapped(), c.clone())))
    }

    /// Coefficient vector over the monomials of degree at most `d`.
    /// Panics if `self` has a term of degree above `d`.
    pub fn coeffs(&self, d: u32) -> Vec<Rat> {
        assert!(self.degree() <= d || self.is_zero(), "degree exceeds {d}");
        let mut v = vec![Rat::zero(); count_up_to(d)];
        for (m, c) in &self.terms {
            v[m.index()] = c.clone();
        }
        v
    }

    pub fn eval(&self, x: &Rat, y: &Rat) -> Rat {
        self.terms.iter().fold(Rat::zero(), |acc, (m, c)| {
            acc + c * num_traits::pow(x.clone(), m.i as usize) * num_traits::pow(y.clone(), m.j as usize)
        })
    }

    pub fn eval_f64(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| to_f64(c) * m.eval_f64(x, y))
            .sum()
    }

    /// Sum of absolute values of the terms at `(x, y)`; a scale for
    /// judging how close `eval_f64` is to zero.
    pub fn eval_abs_f64(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| (to_f64(c) * m.eval_f64(x, y)).abs())
            .sum()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let unit = abs.is_one();
            if *m == Monomial::ONE {
                write!(f, "{abs}")?;
            } else if unit {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}
