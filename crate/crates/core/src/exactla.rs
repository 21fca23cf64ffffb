//! Exact rational linear algebra.
//!
//! Every existence verdict produced by this crate (positivity, rank, range
//! inclusion) is decided here, over arbitrary-precision rationals. Nothing in
//! this module touches floating point.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number, always stored in lowest terms with a positive
/// denominator.
pub type Rat = BigRational;

/// Shorthand for an integer-valued [`Rat`].
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for `num / den`. Panics if `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("column {column} of the right-hand side is not in the range of the matrix")]
    RangeViolation { column: usize },
    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose")]
    NotSymmetric { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Dense row-major rational matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rat::one();
        }
        m
    }

    /// Builds a matrix from row vectors. Panics on ragged input.
    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Mat::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| rat(v)).collect())
                .collect(),
        )
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rat) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Single-column matrix.
    pub fn column(values: Vec<Rat>) -> Self {
        Mat {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Rat> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(Rat::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: &Rat) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Submatrix picking the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat {
        Mat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])].clone())
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        Mat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    /// First `(row, col)` with `self[row, col] != self[col, row]`, if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        if self.rows != self.cols {
            return Some((0, 0));
        }
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                if self[(i, j)] != self[(j, i)] {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| to_f64(&self[(i, j)]))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// A square rational matrix known to be symmetric.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SymMat(Mat);

impl SymMat {
    pub fn new(m: Mat) -> Result<Self, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::Shape(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        match m.asymmetry() {
            Some((row, col)) => Err(LinalgError::NotSymmetric { row, col }),
            None => Ok(SymMat(m)),
        }
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(Mat::identity(n))
    }

    pub fn diag(values: Vec<Rat>) -> Self {
        let n = values.len();
        let mut m = Mat::zeros(n, n);
        for (i, v) in values.into_iter().enumerate() {
            m[(i, i)] = v;
        }
        SymMat(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    /// Principal submatrix on `idx`.
    pub fn principal(&self, idx: &[usize]) -> SymMat {
        SymMat(self.0.select(idx, idx))
    }

    /// `Pᵀ A P` for the permutation sending position `i` to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> SymMat {
        self.principal(perm)
    }
}

impl Index<(usize, usize)> for SymMat {
    type Output = Rat;
    fn index(&self, ij: (usize, usize)) -> &Rat {
        &self.0[ij]
    }
}

pub fn to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Fallback for magnitudes the direct conversion rejects.
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// Why a symmetric matrix failed the PSD test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PsdCertificate {
    /// The principal submatrix on `minor` has negative determinant; the
    /// running Schur complement hit `value < 0` on the diagonal at `index`.
    NegativePivot {
        index: usize,
        value: Rat,
        minor: Vec<usize>,
    },
    /// The running complement has a zero diagonal at `row` but a nonzero
    /// entry at `(row, col)`; the principal submatrix on `minor` has
    /// negative determinant.
    ZeroDiagonal {
        row: usize,
        col: usize,
        value: Rat,
        minor: Vec<usize>,
    },
}

impl PsdCertificate {
    pub fn minor(&self) -> &[usize] {
        match self {
            PsdCertificate::NegativePivot { minor, .. } | PsdCertificate::ZeroDiagonal { minor, .. } => minor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsdReport {
    pub psd: bool,
    /// Number of pivots consumed; equals the rank when `psd`.
    pub rank: usize,
    /// Pivot indices (original numbering) in the order they were used.
    pub pivots: Vec<usize>,
    pub certificate: Option<PsdCertificate>,
}

/// Exact PSD test by recursive pivoted Schur elimination.
///
/// Pivot rule: the first strictly positive diagonal entry of the running
/// complement, in index order.
pub fn psd_check(a: &SymMat) -> PsdReport {
    let n = a.dim();
    let mut s = a.as_mat().clone();
    let mut active: Vec<usize> = (0..n).collect();
    let mut pivots = Vec::new();

    loop {
        // Negative diagonal anywhere in the remaining block.
        if let Some(&i) = active.iter().find(|&&i| s[(i, i)].is_negative()) {
            let mut minor = pivots.clone();
            minor.push(i);
            minor.sort_unstable();
            return PsdReport {
                psd: false,
                rank: pivots.len(),
                pivots,
                certificate: Some(PsdCertificate::NegativePivot {
                    index: i,
                    value: s[(i, i)].clone(),
                    minor,
                }),
            };
        }
        // Zero diagonal with a nonzero row.
        for &i in &active {
            if s[(i, i)].is_zero() {
                if let Some(&j) = active.iter().find(|&&j| j != i && !s[(i, j)].is_zero()) {
                    let mut minor = pivots.clone();
                    minor.push(i);
                    minor.push(j);
                    minor.sort_unstable();
                    return PsdReport {
                        psd: false,
                        rank: pivots.len(),
                        pivots,
                        certificate: Some(PsdCertificate::ZeroDiagonal {
                            row: i.min(j),
                            col: i.max(j),
                            value: s[(i, j)].clone(),
                            minor,
                        }),
                    };
                }
            }
        }
        let Some(pos) = active.iter().position(|&i| s[(i, i)].is_positive()) else {
            break;
        };
        let p = active.remove(pos);
        pivots.push(p);
        let piv = s[(p, p)].clone();
        for &i in &active {
            if s[(i, p)].is_zero() {
                continue;
            }
            let f = &s[(i, p)] / &piv;
            for &j in &active {
                if !s[(p, j)].is_zero() {
                    let delta = &f * &s[(p, j)];
                    s[(i, j)] -= delta;
                }
            }
        }
    }

    PsdReport {
        psd: true,
        rank: pivots.len(),
        pivots,
        certificate: None,
    }
}

/// Exact rank by fraction-free (Bareiss) elimination on the row-scaled
/// integer matrix.
pub fn rank(a: &Mat) -> usize {
    let (r, c) = (a.rows(), a.cols());
    // Clear denominators row by row; rank is unchanged.
    let mut m: Vec<Vec<BigInt>> = (0..r)
        .map(|i| {
            let l = a
                .row(i)
                .iter()
                .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            a.row(i)
                .iter()
                .map(|v| v.numer() * (&l / v.denom()))
                .collect()
        })
        .collect();

    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..c {
        if rank == r {
            break;
        }
        let Some(p) = (rank..r).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for i in rank + 1..r {
            for j in col + 1..c {
                let v = (&m[rank][col] * &m[i][j] - &m[i][col] * &m[rank][j]) / &prev;
                m[i][j] = v;
            }
            m[i][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Reduced row echelon form of `[a | b]`, pivoting only on columns of `a`.
#[derive(Debug, Clone)]
pub struct Reduced {
    /// Reduced matrix, `a.cols() + b.cols()` columns.
    pub matrix: Mat,
    /// Pivot column (within `a`) of each of the first `rank` rows.
    pub pivot_cols: Vec<usize>,
    pub a_cols: usize,
}

impl Reduced {
    pub fn new(a: &Mat, b: Option<&Mat>) -> Self {
        let mut m = match b {
            Some(b) => a.hstack(b),
            None => a.clone(),
        };
        let (rows, cols) = (m.rows(), m.cols());
        let a_cols = a.cols();
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for col in 0..a_cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| !m[(i, col)].is_zero()) else {
                continue;
            };
            if p != r {
                for j in 0..cols {
                    let tmp = m[(p, j)].clone();
                    m[(p, j)] = m[(r, j)].clone();
                    m[(r, j)] = tmp;
                }
            }
            let inv = m[(r, col)].recip();
            for j in col..cols {
                if !m[(r, j)].is_zero() {
                    m[(r, j)] *= &inv;
                }
            }
            for i in 0..rows {
                if i == r || m[(i, col)].is_zero() {
                    continue;
                }
                let f = m[(i, col)].clone();
                for j in col..cols {
                    if !m[(r, j)].is_zero() {
                        let delta = &f * &m[(r, j)];
                        m[(i, j)] -= delta;
                    }
                }
            }
            pivot_cols.push(col);
            r += 1;
        }
        Reduced {
            matrix: m,
            pivot_cols,
            a_cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    /// Solution for right-hand-side column `k`, or `None` if inconsistent.
    /// Free variables are set to zero.
    pub fn solution(&self, k: usize) -> Option<Vec<Rat>> {
        let col = self.a_cols + k;
        let m = &self.matrix;
        if (self.rank()..m.rows()).any(|i| !m[(i, col)].is_zero()) {
            return None;
        }
        let mut x = vec![Rat::zero(); self.a_cols];
        for (row, &pc) in self.pivot_cols.iter().enumerate() {
            x[pc] = m[(row, col)].clone();
        }
        Some(x)
    }

    /// Expression of column `j` of `a` in terms of the pivot columns that
    /// precede it: `(pivot column, coefficient)` pairs, zero coefficients
    /// dropped. Only meaningful for non-pivot `j`.
    pub fn dependence(&self, j: usize) -> Vec<(usize, Rat)> {
        self.pivot_cols
            .iter()
            .enumerate()
            .filter(|&(_, &pc)| pc < j)
            .filter_map(|(row, &pc)| {
                let v = &self.matrix[(row, j)];
                (!v.is_zero()).then(|| (pc, v.clone()))
            })
            .collect()
    }
}

/// Some `x` with `a x = b`, or `None` when `b ∉ Ran a`. Coordinates on
/// non-pivot columns are zero.
pub fn solve_consistent(a: &Mat, b: &[Rat]) -> Option<Vec<Rat>> {
    assert_eq!(a.rows(), b.len());
    Reduced::new(a, Some(&Mat::column(b.to_vec()))).solution(0)
}

/// Solves `a W = b` column by column. Fails with the first column of `b`
/// outside `Ran a`.
pub fn solve_columns(a: &Mat, b: &Mat) -> Result<Mat, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::Shape(format!(
            "{} rows vs {} rows",
            a.rows(),
            b.rows()
        )));
    }
    let red = Reduced::new(a, Some(b));
    let mut w = Mat::zeros(a.cols(), b.cols());
    for k in 0..b.cols() {
        let x = red
            .solution(k)
            .ok_or(LinalgError::RangeViolation { column: k })?;
        for (i, v) in x.into_iter().enumerate() {
            w[(i, k)] = v;
        }
    }
    Ok(w)
}

/// `Δ = C − WᵀMW` where `MW = B`.
pub fn schur_delta(m: &SymMat, b: &Mat, c: &SymMat) -> Result<SymMat, LinalgError> {
    let w = solve_columns(m.as_mat(), b)?;
    schur_delta_with(b, c, &w)
}

/// `Δ = C − WᵀB` for a given solution `W` of `MW = B`.
pub fn schur_delta_with(b: &Mat, c: &SymMat, w: &Mat) -> Result<SymMat, LinalgError> {
    let flat = w.transpose().mul(b);
    SymMat::new(c.as_mat().sub(&flat))
}

/// Basis of `ker a` (one vector per non-pivot column).
pub fn kernel_basis(a: &Mat) -> Vec<Vec<Rat>> {
    let red = Reduced::new(a, None);
    (0..a.cols())
        .filter(|j| !red.pivot_cols.contains(j))
        .map(|j| {
            let mut v = vec![Rat::zero(); a.cols()];
            v[j] = Rat::one();
            for (pc, c) in red.dependence(j) {
                v[pc] = -c;
            }
            v
        })
        .collect()
}

/// Exact determinant (Bareiss). Used by oracles and tests.
pub fn determinant(a: &Mat) -> Rat {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    if n == 0 {
        return Rat::one();
    }
    let mut m = a.clone();
    let mut sign = Rat::one();
    let mut prev = Rat::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !m[(i, k)].is_zero()) else {
            return Rat::zero();
        };
        if p != k {
            for j in 0..n {
                let tmp = m[(p, j)].clone();
                m[(p, j)] = m[(k, j)].clone();
                m[(k, j)] = tmp;
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[(k, k)] * &m[(i, j)] - &m[(i, k)] * &m[(k, j)]) / &prev;
                m[(i, j)] = v;
            }
            m[(i, k)] = Rat::zero();
        }
        prev = m[(k, k)].clone();
    }
    sign * &m[(n - 1, n - 1)]
}
