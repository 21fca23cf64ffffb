//! Construction of the unique candidate extension `M_{d+1}` of a
//! recursively determinate moment matrix, and the chain driver.
//!
//! All new moments are stored by moment index, so the Hankel structure of
//! `B(d+1)` and `C(d+1)` holds by construction; every time a rule assigns a
//! value to an already defined moment the two values are compared, and the
//! first disagreement is returned as a certificate.
//!
//! Entry-definition order inside a block:
//!
//! 1. left band: `X^{n+f}Y^{d+1-n-f} := (x^f y^{d+1-n-f} p)(X,Y)`;
//! 2. pivot column `X^{d+1-m}Y^m := (x^{d+1-m} q)(X,Y)`, row by row from
//!    the top, which completes the central band along cross-diagonals;
//! 3. right band: `X^{d+1-m-g}Y^{m+g} := (x^{d+1-m-g} y^g q)(X,Y)`;
//! 4. sweep: every kernel relation of `M_d`, shifted to degree `d+1`, must
//!    hold in the new rows.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::exactla::{psd_check, schur_delta_with, solve_columns, LinalgError, Mat, PsdCertificate, Rat, SymMat};
use crate::measure::variety_cardinality;
use crate::moment::{build_moment_matrix, MomentMatrix, MomentSequence};
use crate::monomials::{monomials_of_degree, monomials_up_to, Monomial, Poly};
use crate::relations::{
    check_rg, detect_rd, is_recursively_generated, kernel_relations, Classification, ColumnRelation,
    DeterminacyProfile, RgViolation,
};

/// Column group a defining rule belongs to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Band {
    Left,
    Pivot,
    Right,
    /// Consistency sweep with a shifted kernel relation of `M_d`.
    Relation,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Source {
    /// Moment already present in `M_d`.
    OldMoment,
    /// `column := rule(X, Y)`.
    Rule { column: Monomial, rule: Poly, band: Band },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Derivation {
    pub value: Rat,
    pub source: Source,
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::OldMoment => write!(f, "{} (existing moment)", self.value),
            Source::Rule { column, rule, band } => {
                let col = column.to_string().to_uppercase();
                write!(f, "{} ({col} := {rule}, {band:?} band)", self.value)
            }
        }
    }
}

/// Two rules assign different values to the entry `(row, col)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Inconsistency {
    pub row: Monomial,
    pub col: Monomial,
    pub moment: Monomial,
    pub existing: Derivation,
    pub proposed: Derivation,
}

impl Inconsistency {
    /// `existing - proposed`.
    pub fn discrepancy(&self) -> Rat {
        &self.existing.value - &self.proposed.value
    }
}

impl fmt::Display for Inconsistency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "entry (row {}, col {}) = beta_({},{}): {} vs {}",
            self.row.to_string().to_uppercase(),
            self.col.to_string().to_uppercase(),
            self.moment.i,
            self.moment.j,
            self.existing,
            self.proposed
        )
    }
}

/// Moments of `M_d` plus the new ones being defined.
struct Builder<'a> {
    old: &'a MomentSequence,
    new: BTreeMap<Monomial, Derivation>,
}

impl<'a> Builder<'a> {
    fn moment(&self, m: Monomial) -> Option<Rat> {
        if m.degree() <= self.old.degree() {
            Some(self.old.at(m).clone())
        } else {
            self.new.get(&m).map(|d| d.value.clone())
        }
    }

    /// `⟨rule(X,Y), row⟩`.
    fn evaluate(&self, rule: &Poly, row: Monomial) -> Rat {
        rule.terms().fold(Rat::zero(), |acc, (mono, c)| {
            let v = self
                .moment(row.times(*mono))
                .unwrap_or_else(|| panic!("moment {} referenced before definition", row.times(*mono)));
            acc + c * v
        })
    }

    /// Defines the entry `(row, column)` through `rule`, or checks it
    /// against its existing value.
    fn apply(&mut self, column: Monomial, rule: &Poly, band: Band, row: Monomial) -> Result<(), Inconsistency> {
        let value = self.evaluate(rule, row);
        let target = row.times(column);
        let proposed = Derivation {
            value,
            source: Source::Rule {
                column,
                rule: rule.clone(),
                band,
            },
        };
        let existing = if target.degree() <= self.old.degree() {
            Some(Derivation {
                value: self.old.at(target).clone(),
                source: Source::OldMoment,
            })
        } else {
            self.new.get(&target).cloned()
        };
        match existing {
            None => {
                self.new.insert(target, proposed);
                Ok(())
            }
            Some(existing) if existing.value == proposed.value => Ok(()),
            Some(existing) => Err(Inconsistency {
                row,
                col: column,
                moment: target,
                existing,
                proposed,
            }),
        }
    }

    fn apply_rows(&mut self, column: Monomial, rule: &Poly, band: Band, rows: &[Monomial]) -> Result<(), Inconsistency> {
        rows.iter().try_for_each(|&r| self.apply(column, rule, band, r))
    }

    /// Runs the band procedure for the new columns of degree `d + 1` over
    /// `rows`, then the relation sweep.
    fn fill(
        &mut self,
        d: u32,
        prof: &DeterminacyProfile,
        rels: &[ColumnRelation],
        rows: &[Monomial],
    ) -> Result<(), Inconsistency> {
        let (n, m) = (prof.n, prof.m);
        let e = d + 1;
        // Left band.
        for f in 0..=e.saturating_sub(n) {
            if n + f > e {
                break;
            }
            let shift = Monomial::new(f, e - n - f);
            let column = Monomial::new(n + f, e - n - f);
            self.apply_rows(column, &prof.p.shift(shift), Band::Left, rows)?;
        }
        // Pivot column, top row first.
        if m <= e {
            let column = Monomial::new(e - m, m);
            let rule = prof.q.shift(Monomial::new(e - m, 0));
            self.apply_rows(column, &rule, Band::Pivot, rows)?;
            // Right band.
            for g in 1..=e - m {
                let column = Monomial::new(e - m - g, m + g);
                let rule = prof.q.shift(Monomial::new(e - m - g, g));
                self.apply_rows(column, &rule, Band::Right, rows)?;
            }
        }
        // Every degree-(d+1) shift of every kernel relation.
        for rel in rels {
            let t = rel.target.degree();
            if t > e {
                continue;
            }
            for s in monomials_of_degree(e - t) {
                let shifted = rel.shifted(s);
                self.apply_rows(shifted.target, &shifted.rhs, Band::Relation, rows)?;
            }
        }
        Ok(())
    }

    fn take(self, degree: u32) -> BTreeMap<Monomial, Rat> {
        monomials_of_degree(degree)
            .map(|mono| {
                let v = self
                    .new
                    .get(&mono)
                    .unwrap_or_else(|| panic!("moment {mono} left undefined"))
                    .value
                    .clone();
                (mono, v)
            })
            .collect()
    }
}

/// The block `B(d+1)` with its new moments of degree `2d+1`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BBlock {
    pub mat: Mat,
    pub odd: BTreeMap<Monomial, Rat>,
}

/// The block `C(d+1)` with its new moments of degree `2d+2`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CBlock {
    pub mat: SymMat,
    pub even: BTreeMap<Monomial, Rat>,
}

fn moment_of(old: &MomentSequence, odd: &BTreeMap<Monomial, Rat>, even: Option<&BTreeMap<Monomial, Rat>>, m: Monomial) -> Rat {
    if m.degree() <= old.degree() {
        old.at(m).clone()
    } else if m.degree() == old.degree() + 1 {
        odd[&m].clone()
    } else {
        even.expect("even moments")[&m].clone()
    }
}

/// Builds `B(d+1)` for `m` (in the normalized frame of `prof`).
///
/// `rels` are the kernel relations of `m`; shifts of relations other than
/// the generating pair are checked in the final sweep.
pub fn build_b(m: &MomentMatrix, prof: &DeterminacyProfile, rels: &[ColumnRelation]) -> Result<BBlock, Inconsistency> {
    let d = m.degree();
    let mut builder = Builder {
        old: m.moments(),
        new: BTreeMap::new(),
    };
    let rows = monomials_up_to(d);
    builder.fill(d, prof, rels, &rows)?;
    let odd = builder.take(2 * d + 1);
    let cols: Vec<Monomial> = monomials_of_degree(d + 1).collect();
    let mat = Mat::from_fn(rows.len(), cols.len(), |r, c| {
        moment_of(m.moments(), &odd, None, rows[r].times(cols[c]))
    });
    Ok(BBlock { mat, odd })
}

/// `W` with `M_d W = B(d+1)`; fails with the first column outside `Ran M_d`.
pub fn check_range(m: &MomentMatrix, b: &BBlock) -> Result<Mat, usize> {
    solve_columns(m.mat().as_mat(), &b.mat).map_err(|e| match e {
        LinalgError::RangeViolation { column } => column,
        other => unreachable!("{other}"),
    })
}

/// Builds `C(d+1)` by running the band procedure in the rows of
/// `B(d+1)ᵀ`.
pub fn build_c(
    m: &MomentMatrix,
    b: &BBlock,
    prof: &DeterminacyProfile,
    rels: &[ColumnRelation],
) -> Result<CBlock, Inconsistency> {
    let d = m.degree();
    let odd_seq = extend_odd(m.moments(), &b.odd);
    let mut builder = Builder {
        old: &odd_seq,
        new: BTreeMap::new(),
    };
    let rows: Vec<Monomial> = monomials_of_degree(d + 1).collect();
    builder.fill(d, prof, rels, &rows)?;
    let even = builder.take(2 * d + 2);
    let mat = Mat::from_fn(rows.len(), rows.len(), |r, c| {
        moment_of(m.moments(), &b.odd, Some(&even), rows[r].times(rows[c]))
    });
    let mat = SymMat::new(mat).expect("moment-indexed block is symmetric");
    Ok(CBlock { mat, even })
}

// The builder compares against "old" moments by degree, so C-stage lookup
// needs the odd moments visible as old ones. The resulting sequence has odd
// degree and is used only inside this module.
fn extend_odd(old: &MomentSequence, odd: &BTreeMap<Monomial, Rat>) -> MomentSequence {
    old.with_odd_layer(odd)
}

/// The assembled candidate `M_{d+1}`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CandidateExtension {
    pub b: Mat,
    pub c: SymMat,
    pub w: Mat,
    pub delta: SymMat,
    pub psd: bool,
    pub certificate: Option<PsdCertificate>,
    /// `rank M_d + rank Δ` when `psd`.
    pub rank_next: usize,
    pub flat: bool,
    pub rg: Option<RgViolation>,
    pub matrix: MomentMatrix,
}

impl CandidateExtension {
    pub fn is_rg(&self) -> bool {
        self.rg.is_none()
    }
}

/// `Δ = C − WᵀM W`, positivity of `M_{d+1}` via `Δ`, and recursiveness of
/// the assembled matrix.
pub fn assemble(m: &MomentMatrix, b: &BBlock, c: &CBlock, w: &Mat) -> CandidateExtension {
    let delta = schur_delta_with(&b.mat, &c.mat, w).expect("Δ is symmetric");
    let report = psd_check(&delta);
    let seq = m.moments().extended(&b.odd, &c.even);
    let matrix = build_moment_matrix(&seq, m.degree() + 1).expect("degree d+1");
    let rank_m = m.rank();
    let rank_next = if report.psd {
        rank_m + report.rank
    } else {
        matrix.rank()
    };
    let rg = is_recursively_generated(&matrix).violation;
    CandidateExtension {
        b: b.mat.clone(),
        c: c.mat.clone(),
        w: w.clone(),
        flat: report.psd && report.rank == 0,
        psd: report.psd,
        certificate: report.certificate,
        rank_next,
        rg,
        delta,
        matrix,
    }
}

/// Why a matrix cannot be fed to the extension procedure.
#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum NotApplicable {
    #[error("moment matrix is not positive semidefinite")]
    NotPsd(PsdCertificate),
    #[error("moment matrix is not recursively generated: {0}")]
    NotRg(RgViolation),
    #[error("moment matrix is not recursively determinate")]
    NotRd,
}

/// Result of one extension attempt. Every variant except `Extended`
/// certifies that no representing measure exists.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ExtensionOutcome {
    BInconsistent(Inconsistency),
    RangeFailure { column: Monomial },
    CInconsistent(Inconsistency),
    NotPsd { certificate: PsdCertificate, rank: usize },
    NotRecursivelyGenerated(RgViolation),
    Extended { matrix: MomentMatrix, flat: bool, rank: usize },
}

impl ExtensionOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            ExtensionOutcome::BInconsistent(_) => "b_inconsistent",
            ExtensionOutcome::RangeFailure { .. } => "range_failure",
            ExtensionOutcome::CInconsistent(_) => "c_inconsistent",
            ExtensionOutcome::NotPsd { .. } => "not_psd",
            ExtensionOutcome::NotRecursivelyGenerated(_) => "not_recursively_generated",
            ExtensionOutcome::Extended { .. } => "extended",
        }
    }

    pub fn is_extended(&self) -> bool {
        matches!(self, ExtensionOutcome::Extended { .. })
    }
}

/// Checks that `m` is PSD and recursively generated and returns its
/// profile.
pub fn preconditions(m: &MomentMatrix) -> Result<DeterminacyProfile, NotApplicable> {
    let psd = psd_check(m.mat());
    if let Some(cert) = psd.certificate {
        return Err(NotApplicable::NotPsd(cert));
    }
    if let Some(v) = is_recursively_generated(m).violation {
        return Err(NotApplicable::NotRg(v));
    }
    detect_rd(m).ok_or(NotApplicable::NotRd)
}

/// One extension step `M_d → M_{d+1}`.
pub fn extend_step(m: &MomentMatrix) -> Result<ExtensionOutcome, NotApplicable> {
    let prof = preconditions(m)?;
    Ok(extend_with(m, &prof))
}

/// Extension step for a matrix already known to satisfy the
/// preconditions, with profile `prof` from [`detect_rd`]. The outcome is in
/// the caller's original frame.
pub fn extend_with(m: &MomentMatrix, prof: &DeterminacyProfile) -> ExtensionOutcome {
    if prof.roles_swapped {
        let out = extend_normalized(&m.swapped(), prof);
        return unswap_outcome(out);
    }
    extend_normalized(m, prof)
}

fn extend_normalized(m: &MomentMatrix, prof: &DeterminacyProfile) -> ExtensionOutcome {
    let rels = kernel_relations(m);
    let b = match build_b(m, prof, &rels) {
        Ok(b) => b,
        Err(inc) => return ExtensionOutcome::BInconsistent(inc),
    };
    let w = match check_range(m, &b) {
        Ok(w) => w,
        Err(k) => {
            return ExtensionOutcome::RangeFailure {
                column: Monomial::new(m.degree() + 1 - k as u32, k as u32),
            }
        }
    };
    let c = match build_c(m, &b, prof, &rels) {
        Ok(c) => c,
        Err(inc) => return ExtensionOutcome::CInconsistent(inc),
    };
    let cand = assemble(m, &b, &c, &w);
    if let Some(certificate) = cand.certificate {
        return ExtensionOutcome::NotPsd {
            certificate,
            rank: cand.rank_next,
        };
    }
    if let Some(v) = cand.rg {
        return ExtensionOutcome::NotRecursivelyGenerated(v);
    }
    ExtensionOutcome::Extended {
        matrix: cand.matrix,
        flat: cand.flat,
        rank: cand.rank_next,
    }
}

fn unswap_outcome(out: ExtensionOutcome) -> ExtensionOutcome {
    let inc = |i: Inconsistency| Inconsistency {
        row: i.row.swapped(),
        col: i.col.swapped(),
        moment: i.moment.swapped(),
        existing: unswap_derivation(i.existing),
        proposed: unswap_derivation(i.proposed),
    };
    match out {
        ExtensionOutcome::BInconsistent(i) => ExtensionOutcome::BInconsistent(inc(i)),
        ExtensionOutcome::CInconsistent(i) => ExtensionOutcome::CInconsistent(inc(i)),
        ExtensionOutcome::RangeFailure { column } => ExtensionOutcome::RangeFailure {
            column: column.swapped(),
        },
        ExtensionOutcome::NotRecursivelyGenerated(v) => ExtensionOutcome::NotRecursivelyGenerated(RgViolation {
            relation: v.relation.swapped(),
            multiplier: v.multiplier.swapped(),
        }),
        ExtensionOutcome::Extended { matrix, flat, rank } => ExtensionOutcome::Extended {
            matrix: matrix.swapped(),
            flat,
            rank,
        },
        // Certificates index the swapped frame's rows; positivity itself is
        // frame independent.
        other @ ExtensionOutcome::NotPsd { .. } => other,
    }
}

fn unswap_derivation(d: Derivation) -> Derivation {
    Derivation {
        value: d.value,
        source: match d.source {
            Source::OldMoment => Source::OldMoment,
            Source::Rule { column, rule, band } => Source::Rule {
                column: column.swapped(),
                rule: rule.swapped(),
                band,
            },
        },
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChainStep {
    /// Degree of the matrix this step tried to build.
    pub degree: u32,
    /// Classification of the matrix being extended.
    pub source_classification: Classification,
    pub outcome: ExtensionOutcome,
    /// Rank of the new matrix (when it could be assembled).
    pub rank: Option<usize>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Verdict {
    MeasureExists { flat_degree: u32 },
    NoMeasure { failed_degree: u32, reason: ExtensionOutcome },
    /// The step bound ran out without a flat extension. The band bound is
    /// sufficient for recursively determinate input, so this indicates a
    /// defect rather than a property of the data.
    BoundExhausted,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::MeasureExists { .. } => "measure_exists",
            Verdict::NoMeasure { .. } => "no_measure",
            Verdict::BoundExhausted => "bound_exhausted",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChainBounds {
    /// `n + m - d - 1`.
    pub band_bound: i64,
    /// `1 + card V - rank M_d`, when the variety could be counted.
    pub variety_bound: Option<i64>,
    /// Steps actually allowed.
    pub step_limit: u32,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChainReport {
    pub degree: u32,
    pub rank: usize,
    pub profile: DeterminacyProfile,
    pub steps: Vec<ChainStep>,
    pub verdict: Verdict,
    pub bounds: ChainBounds,
    /// The flat matrix when a measure exists, in the original frame.
    pub flat_matrix: Option<MomentMatrix>,
}

#[derive(Clone, Debug, Default)]
pub struct ChainOptions {
    /// Overrides the band bound.
    pub max_steps: Option<u32>,
    /// Skip the variety count (it needs floating point root finding).
    pub skip_variety: bool,
}

pub fn run_chain(m: &MomentMatrix) -> Result<ChainReport, NotApplicable> {
    run_chain_with(m, &ChainOptions::default())
}

/// Extends `m` until a flat extension appears, a step fails, or the step
/// bound `min(n + m - d - 1, d - 1)` is used up.
pub fn run_chain_with(m: &MomentMatrix, opts: &ChainOptions) -> Result<ChainReport, NotApplicable> {
    let prof = preconditions(m)?;
    let d = m.degree();
    let rank = m.rank();
    let band_bound = prof.band_bound(d);
    let natural = band_bound.min(d as i64 - 1).max(0) as u32;
    let step_limit = opts.max_steps.unwrap_or(natural);
    let variety_bound = if opts.skip_variety {
        None
    } else {
        variety_cardinality(&prof, 1e-9).map(|card| 1 + card as i64 - rank as i64)
    };
    let bounds = ChainBounds {
        band_bound,
        variety_bound,
        step_limit,
    };

    if prof.classification == Classification::Flat {
        return Ok(ChainReport {
            degree: d,
            rank,
            profile: prof,
            steps: Vec::new(),
            verdict: Verdict::MeasureExists { flat_degree: d },
            bounds,
            flat_matrix: Some(m.clone()),
        });
    }

    let mut steps = Vec::new();
    let mut current = m.clone();
    let mut current_prof = prof.clone();
    for _ in 0..step_limit {
        let degree = current.degree() + 1;
        let outcome = extend_with(&current, &current_prof);
        let rank_new = match &outcome {
            ExtensionOutcome::Extended { rank, .. } | ExtensionOutcome::NotPsd { rank, .. } => Some(*rank),
            _ => None,
        };
        steps.push(ChainStep {
            degree,
            source_classification: current_prof.classification,
            outcome: outcome.clone(),
            rank: rank_new,
        });
        match outcome {
            ExtensionOutcome::Extended { matrix, flat, .. } => {
                if flat {
                    return Ok(ChainReport {
                        degree: d,
                        rank,
                        profile: prof,
                        steps,
                        verdict: Verdict::MeasureExists { flat_degree: degree },
                        bounds,
                        flat_matrix: Some(matrix),
                    });
                }
                let Some(next_prof) = detect_rd(&matrix) else {
                    // An RG extension keeps the generating relations, so
                    // this cannot happen for consistent input.
                    return Ok(ChainReport {
                        degree: d,
                        rank,
                        profile: prof,
                        steps,
                        verdict: Verdict::BoundExhausted,
                        bounds,
                        flat_matrix: None,
                    });
                };
                current = matrix;
                current_prof = next_prof;
            }
            failure => {
                return Ok(ChainReport {
                    degree: d,
                    rank,
                    profile: prof,
                    steps,
                    verdict: Verdict::NoMeasure {
                        failed_degree: degree,
                        reason: failure,
                    },
                    bounds,
                    flat_matrix: None,
                });
            }
        }
    }
    Ok(ChainReport {
        degree: d,
        rank,
        profile: prof,
        steps,
        verdict: Verdict::BoundExhausted,
        bounds,
        flat_matrix: None,
    })
}

/// Re-checks that an extension produced by this module is a valid moment
/// matrix: structure, positivity and recursiveness.
pub fn conservative(m: &MomentMatrix) -> bool {
    m.validate().is_empty() && psd_check(m.mat()).psd && check_rg(m, &kernel_relations(m)).ok
}
