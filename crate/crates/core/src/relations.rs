//! Column dependence relations of a moment matrix.
//!
//! A relation `X^iY^j = r(X, Y)` says that column `x^i y^j` of `M_d` is a
//! combination of strictly preceding columns. Relations are reported in
//! reduced echelon form: `r` is supported on the preceding *independent*
//! columns, which makes each relation unique.

use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::exactla::{rank, Mat, Rat, Reduced};
use crate::moment::MomentMatrix;
use crate::monomials::{monomials_up_to, Monomial, Poly};

/// `target = rhs` in the column space.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ColumnRelation {
    pub target: Monomial,
    pub rhs: Poly,
}

impl ColumnRelation {
    pub fn new(target: Monomial, rhs: Poly) -> Self {
        debug_assert!(rhs.terms().all(|(m, _)| *m < target));
        ColumnRelation { target, rhs }
    }

    pub fn degree_reducing(&self) -> bool {
        self.rhs.is_zero() || self.rhs.degree() < self.target.degree()
    }

    /// `target - rhs`, the kernel polynomial.
    pub fn as_poly(&self) -> Poly {
        Poly::monomial(self.target, Rat::one()).sub(&self.rhs)
    }

    pub fn shifted(&self, by: Monomial) -> ColumnRelation {
        ColumnRelation {
            target: self.target.times(by),
            rhs: self.rhs.shift(by),
        }
    }

    pub fn swapped(&self) -> ColumnRelation {
        ColumnRelation {
            target: self.target.swapped(),
            rhs: self.rhs.swapped(),
        }
    }
}

impl fmt::Display for ColumnRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.target.to_string().to_uppercase();
        write!(f, "{t} = {}", self.rhs)
    }
}

/// One relation per dependent column, scanning in degree-lex order.
pub fn kernel_relations(m: &MomentMatrix) -> Vec<ColumnRelation> {
    relations_of(m.mat().as_mat(), &m.labels())
}

pub(crate) fn relations_of(mat: &Mat, labels: &[Monomial]) -> Vec<ColumnRelation> {
    let red = Reduced::new(mat, None);
    let mut pivots = red.pivot_cols.iter().peekable();
    let mut out = Vec::new();
    for j in 0..mat.cols() {
        if pivots.peek() == Some(&&j) {
            pivots.next();
            continue;
        }
        let rhs = Poly::from_terms(
            red.dependence(j)
                .into_iter()
                .map(|(pc, c)| (labels[pc], c)),
        );
        out.push(ColumnRelation::new(labels[j], rhs));
    }
    out
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RgViolation {
    pub relation: ColumnRelation,
    pub multiplier: Monomial,
}

impl fmt::Display for RgViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "relation {} fails to propagate under multiplication by {}",
            self.relation, self.multiplier
        )
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RgReport {
    pub ok: bool,
    pub violation: Option<RgViolation>,
}

/// Checks `(s · r)(X, Y) = 0` for every kernel relation `r` and monomial
/// `s` with `deg(s·r) ≤ d`. Monomial multipliers suffice by linearity, and
/// distinct echelon targets keep degrees from cancelling.
pub fn is_recursively_generated(m: &MomentMatrix) -> RgReport {
    let rels = kernel_relations(m);
    check_rg(m, &rels)
}

pub(crate) fn check_rg(m: &MomentMatrix, rels: &[ColumnRelation]) -> RgReport {
    let d = m.degree();
    for rel in rels {
        let room = d - rel.target.degree();
        for s in monomials_up_to(room).into_iter().skip(1) {
            let poly = rel.as_poly().shift(s);
            if m.eval_columns(&poly).iter().any(|v| !v.is_zero()) {
                return RgReport {
                    ok: false,
                    violation: Some(RgViolation {
                        relation: rel.clone(),
                        multiplier: s,
                    }),
                };
            }
        }
    }
    RgReport {
        ok: true,
        violation: None,
    }
}

/// Which sufficient condition for a unique extension applies.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// `rank M_d = rank M_{d-1}`.
    Flat,
    /// Kernel generated by the shifts of `x^n - p` and `y^m - q`.
    RdExtHypothesis,
    /// Every kernel relation is degree reducing.
    RdNewHypothesis,
    /// Recursively determinate with additional relations.
    GeneralRd,
    NotRd,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::Flat => "flat",
            Classification::RdExtHypothesis => "rd_ext_hypothesis",
            Classification::RdNewHypothesis => "rd_new_hypothesis",
            Classification::GeneralRd => "general_rd",
            Classification::NotRd => "not_rd",
        };
        f.write_str(s)
    }
}

/// The generating pair `X^n = p`, `Y^m = q`.
///
/// When `roles_swapped` is set, `p` and `q` (and `n`, `m`) live in the
/// frame with `x` and `y` exchanged: the original matrix has `Y^n = p(Y,X)`
/// and `X^m = q(Y,X)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DeterminacyProfile {
    pub n: u32,
    pub p: Poly,
    pub m: u32,
    pub q: Poly,
    pub roles_swapped: bool,
    /// The other orientation is recursively determinate as well.
    pub both_orientations: bool,
    pub classification: Classification,
}

impl DeterminacyProfile {
    /// `x^n - p`, in the normalized frame.
    pub fn x_generator(&self) -> Poly {
        Poly::monomial(Monomial::new(self.n, 0), Rat::one()).sub(&self.p)
    }

    /// `y^m - q`, in the normalized frame.
    pub fn y_generator(&self) -> Poly {
        Poly::monomial(Monomial::new(0, self.m), Rat::one()).sub(&self.q)
    }

    /// Generators in the caller's original variables.
    pub fn generators_original(&self) -> (Poly, Poly) {
        if self.roles_swapped {
            (self.x_generator().swapped(), self.y_generator().swapped())
        } else {
            (self.x_generator(), self.y_generator())
        }
    }

    /// Number of central-band columns at degree `d`: `n + m - d - 1`.
    pub fn band_bound(&self, d: u32) -> i64 {
        self.n as i64 + self.m as i64 - d as i64 - 1
    }
}

/// The pure-power relations `X^n = p`, `Y^m = q` with minimal `n`, `m`, in
/// the frame of `rels`.
fn pure_pair(rels: &[ColumnRelation]) -> Option<(&ColumnRelation, &ColumnRelation)> {
    let px = rels
        .iter()
        .filter(|r| r.target.j == 0 && r.target.i > 0)
        .min_by_key(|r| r.target.i)?;
    let qy = rels
        .iter()
        .filter(|r| r.target.i == 0 && r.target.j > 0)
        .min_by_key(|r| r.target.j)?;
    // Echelon form guarantees deg p < n and no y^m term in q.
    debug_assert!(px.degree_reducing());
    debug_assert!(qy.rhs.coeff(qy.target).is_zero());
    Some((px, qy))
}

/// Looks for `X^n = p` (`deg p < n`) and `Y^m = q` (`q` free of `y^m`),
/// first as stated, then with the roles of `x` and `y` exchanged.
pub fn detect_rd(m: &MomentMatrix) -> Option<DeterminacyProfile> {
    let direct = kernel_relations(m);
    let swapped_m = m.swapped();
    let swapped = kernel_relations(&swapped_m);
    let direct_pair = pure_pair(&direct);
    let swapped_pair = pure_pair(&swapped);
    let both = direct_pair.is_some() && swapped_pair.is_some();
    let (pair, roles_swapped, frame, rels) = match (direct_pair, swapped_pair) {
        (Some(pair), _) => (pair, false, m, &direct),
        (None, Some(pair)) => (pair, true, &swapped_m, &swapped),
        (None, None) => return None,
    };
    let (px, qy) = pair;
    let mut prof = DeterminacyProfile {
        n: px.target.i,
        p: px.rhs.clone(),
        m: qy.target.j,
        q: qy.rhs.clone(),
        roles_swapped,
        both_orientations: both,
        classification: Classification::NotRd,
    };
    prof.classification = classify_in_frame(frame, &prof, rels);
    Some(prof)
}

/// Classification of `m` under `prof` (as returned by [`detect_rd`]).
pub fn classify(m: &MomentMatrix, prof: &DeterminacyProfile) -> Classification {
    if prof.roles_swapped {
        let s = m.swapped();
        let rels = kernel_relations(&s);
        classify_in_frame(&s, prof, &rels)
    } else {
        classify_in_frame(m, prof, &kernel_relations(m))
    }
}

/// Coefficient vectors of all shifts `x^a y^b (x^n - p)`, `x^a y^b (y^m - q)`
/// of degree at most `d`.
pub fn generated_relations(prof: &DeterminacyProfile, d: u32) -> Vec<Poly> {
    let mut out = Vec::new();
    for (gen, deg) in [(prof.x_generator(), prof.n), (prof.y_generator(), prof.m)] {
        if deg > d {
            continue;
        }
        for s in monomials_up_to(d - deg) {
            out.push(gen.shift(s));
        }
    }
    out
}

fn classify_in_frame(m: &MomentMatrix, prof: &DeterminacyProfile, rels: &[ColumnRelation]) -> Classification {
    let d = m.degree();
    if d >= 1 && m.rank() == m.truncate(d - 1).rank() {
        return Classification::Flat;
    }
    let generated = generated_relations(prof, d);
    let all_in_kernel = generated
        .iter()
        .all(|g| m.eval_columns(g).iter().all(Zero::is_zero));
    if !all_in_kernel {
        return Classification::GeneralRd;
    }
    let gen_mat = Mat::from_rows(generated.iter().map(|g| g.coeffs(d)).collect());
    if rank(&gen_mat) == rels.len() {
        return Classification::RdExtHypothesis;
    }
    if rels.iter().all(ColumnRelation::degree_reducing) {
        return Classification::RdNewHypothesis;
    }
    Classification::GeneralRd
}
