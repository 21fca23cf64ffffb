//! Dense univariate polynomials over the rationals, with Sturm-sequence
//! real root isolation.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::exactla::{determinant, to_f64, Mat, Rat};

/// Coefficients from the constant term up; no trailing zeros.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UPoly(Vec<Rat>);

impl UPoly {
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        UPoly(coeffs)
    }

    pub fn zero() -> Self {
        UPoly(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.0
    }

    fn lead(&self) -> &Rat {
        self.0.last().expect("nonzero polynomial")
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        self.0.iter().rev().fold(Rat::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> UPoly {
        UPoly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Rat::from_integer(k.into()))
                .collect(),
        )
    }

    /// `(quotient, remainder)`.
    pub fn div_rem(&self, other: &UPoly) -> (UPoly, UPoly) {
        let dd = other.degree().expect("division by zero polynomial");
        let mut r = self.0.clone();
        if r.len() <= dd {
            return (UPoly::zero(), self.clone());
        }
        let mut q = vec![Rat::zero(); r.len() - dd];
        let lead = other.lead();
        for k in (0..q.len()).rev() {
            let c = &r[k + dd] / lead;
            if !c.is_zero() {
                for (i, oc) in other.0.iter().enumerate() {
                    r[k + i] -= &c * oc;
                }
            }
            q[k] = c;
        }
        r.truncate(dd);
        (UPoly::new(q), UPoly::new(r))
    }

    fn monic(&self) -> UPoly {
        let l = self.lead().clone();
        UPoly(self.0.iter().map(|c| c / &l).collect())
    }

    pub fn gcd(&self, other: &UPoly) -> UPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    /// `p / gcd(p, p')`: same roots, all simple.
    pub fn square_free(&self) -> UPoly {
        let g = self.gcd(&self.derivative());
        if g.degree() == Some(0) {
            return self.clone();
        }
        self.div_rem(&g).0
    }

    /// Lagrange interpolation through `(x_k, y_k)`.
    pub fn interpolate(points: &[(Rat, Rat)]) -> UPoly {
        let mut acc = vec![Rat::zero(); points.len()];
        for (k, (xk, yk)) in points.iter().enumerate() {
            // basis = Π_{l≠k} (x - x_l) / (x_k - x_l)
            let mut basis = vec![Rat::one()];
            let mut denom = Rat::one();
            for (l, (xl, _)) in points.iter().enumerate() {
                if l == k {
                    continue;
                }
                let mut next = vec![Rat::zero(); basis.len() + 1];
                for (i, c) in basis.iter().enumerate() {
                    next[i + 1] += c;
                    next[i] -= c * xl;
                }
                basis = next;
                denom *= xk - xl;
            }
            let f = yk / denom;
            for (i, c) in basis.iter().enumerate() {
                acc[i] += c * &f;
            }
        }
        UPoly::new(acc)
    }

    fn sturm_sequence(&self) -> Vec<UPoly> {
        let mut seq = vec![self.clone(), self.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let r = seq[n - 2].div_rem(&seq[n - 1]).1;
            if r.is_zero() {
                break;
            }
            seq.push(UPoly(r.0.into_iter().map(|c| -c).collect()));
        }
        seq
    }

    /// Bound on the absolute value of every real root.
    fn cauchy_bound(&self) -> Rat {
        let lead = self.lead().abs();
        let m = self.0[..self.0.len() - 1]
            .iter()
            .map(|c| c.abs() / &lead)
            .max()
            .unwrap_or_else(Rat::zero);
        m + Rat::one()
    }

    /// Positive multiple with coprime integer coefficients.
    fn primitive(&self) -> UPoly {
        if self.is_zero() {
            return self.clone();
        }
        let den = self.0.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self.0.iter().map(|c| (c * Rat::from_integer(den.clone())).to_integer()).collect();
        let content = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        UPoly(ints.into_iter().map(|c| Rat::from_integer(c / &content)).collect())
    }

    /// Sign of `p(n / 2^k)` for integer coefficients.
    fn sign_at(&self, n: &BigInt, k: u32) -> i8 {
        let Some(deg) = self.degree() else {
            return 0;
        };
        // 2^(k·deg) p(n / 2^k) by homogeneous Horner.
        let step = BigInt::one() << k;
        let mut scale = BigInt::one();
        let mut acc = self.0[deg].to_integer();
        for c in self.0[..deg].iter().rev() {
            scale *= &step;
            acc = acc * n + c.to_integer() * &scale;
        }
        match acc.sign() {
            Sign::Plus => 1,
            Sign::Minus => -1,
            Sign::NoSign => 0,
        }
    }

    /// Real roots of a square-free polynomial, each refined by dyadic
    /// bisection to an interval narrower than `width`.
    pub fn real_roots(&self, width: f64) -> Vec<f64> {
        let Some(deg) = self.degree() else {
            return Vec::new();
        };
        if deg == 0 {
            return Vec::new();
        }
        let p = self.primitive();
        let seq: Vec<UPoly> = p.sturm_sequence().iter().map(UPoly::primitive).collect();
        let changes = |n: &BigInt, k: u32| {
            let mut last = 0i8;
            let mut count = 0i64;
            for q in &seq {
                let s = q.sign_at(n, k);
                if s != 0 {
                    if last != 0 && s != last {
                        count += 1;
                    }
                    last = s;
                }
            }
            count
        };
        // Roots lie in (-2^e, 2^e].
        let mut e = 0u32;
        let bound = self.cauchy_bound();
        while Rat::from_integer(BigInt::one() << e) < bound {
            e += 1;
        }
        let narrow = |k: u32| f64::powi(2.0, e as i32 - k as i32) < width;
        let mid_of = |lo: &BigInt, hi: &BigInt| lo + hi;
        let to_float = |n: &BigInt, k: u32| to_f64(&Rat::new(n << e, BigInt::one() << k));
        let mut out = Vec::new();
        // Interval (lo, hi] = (lo / 2^k, hi / 2^k] · 2^e.
        let mut stack = vec![(BigInt::from(-1), BigInt::one(), 0u32)];
        while let Some((lo, hi, k)) = stack.pop() {
            let count = changes(&(&lo << e), k) - changes(&(&hi << e), k);
            if count == 0 {
                continue;
            }
            if count > 1 {
                let mid = mid_of(&lo, &hi);
                stack.push((lo << 1, mid.clone(), k + 1));
                stack.push((mid, hi << 1, k + 1));
                continue;
            }
            // One simple root in (lo, hi]: bisect on the sign of p.
            let (mut lo, mut hi, mut k) = (lo, hi, k);
            let sign = |n: &BigInt, k: u32| p.sign_at(&(n << e), k);
            let mut s_hi = sign(&hi, k);
            let root = loop {
                if s_hi == 0 {
                    break to_float(&hi, k);
                }
                if narrow(k) {
                    break to_float(&mid_of(&lo, &hi), k + 1);
                }
                let mid = mid_of(&lo, &hi);
                k += 1;
                let s_mid = sign(&mid, k);
                if s_mid == 0 {
                    break to_float(&mid, k);
                }
                if s_mid != s_hi {
                    lo = mid;
                    hi <<= 1;
                } else {
                    hi = mid;
                    lo <<= 1;
                    s_hi = s_mid;
                }
            };
            out.push(root);
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Resultant of two polynomials given by coefficient lists (constant term
/// first) of formal degrees `a.len() - 1` and `b.len() - 1`: the
/// determinant of their Sylvester matrix.
pub fn resultant(a: &[Rat], b: &[Rat]) -> Rat {
    let (da, db) = (a.len() - 1, b.len() - 1);
    let n = da + db;
    if n == 0 {
        return Rat::one();
    }
    let mut s = Mat::zeros(n, n);
    for r in 0..db {
        for (k, c) in a.iter().rev().enumerate() {
            s[(r, r + k)] = c.clone();
        }
    }
    for r in 0..da {
        for (k, c) in b.iter().rev().enumerate() {
            s[(db + r, r + k)] = c.clone();
        }
    }
    determinant(&s)
}
