//! Serializable reports. Exact values are written as `"n"` or `"n/d"`
//! strings; floating-point values (measure stage only) as JSON numbers.

use std::fmt::Write as _;

use moment_extend::exactla::{psd_check, PsdCertificate};
use moment_extend::extend::{ChainReport, ChainStep, ExtensionOutcome, Inconsistency, NotApplicable, Source, Verdict};
use moment_extend::measure::{AtomicMeasure, VerifyReport};
use moment_extend::relations::{is_recursively_generated, kernel_relations, RgViolation};
use moment_extend::{detect_rd, Classification, DeterminacyProfile, MomentMatrix, Monomial};
use serde::Serialize;

use crate::problem::format_rational;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ReportFile {
    pub schema_version: u32,
    pub command: String,
    pub analysis: Analysis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    /// `measure_exists`, `no_measure`, `not_applicable` or `bound_exhausted`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSection>,
    pub timing_ms: Timing,
}

#[derive(Serialize, Debug, Clone, PartialEq, Default)]
pub struct Timing {
    pub analysis: f64,
    pub chain: f64,
    pub measure: f64,
}

impl Timing {
    pub fn zeroed() -> Self {
        Timing::default()
    }
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Analysis {
    pub degree: u32,
    pub dim: usize,
    pub psd: bool,
    pub rank: usize,
    pub flat: bool,
    pub rg: bool,
    pub rd: bool,
    pub classification: Classification,
    /// Column relations `TARGET = rhs` from the echelon form of `M_d`.
    pub relations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSection>,
    pub certificates: Vec<Certificate>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ProfileSection {
    pub n: u32,
    pub m: u32,
    /// `x^n - p` and `y^m - q` in the input variables.
    pub generators: [String; 2],
    pub roles_swapped: bool,
    pub both_orientations: bool,
    pub band_bound: i64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    NegativePivot {
        index: usize,
        label: String,
        value: String,
        minor: Vec<String>,
    },
    ZeroDiagonal {
        row: String,
        col: String,
        value: String,
        minor: Vec<String>,
    },
    RgViolation {
        relation: String,
        multiplier: String,
        message: String,
    },
    Inconsistent {
        row: String,
        col: String,
        moment: [u32; 2],
        existing: String,
        existing_source: String,
        proposed: String,
        proposed_source: String,
        discrepancy: String,
    },
    RangeFailure {
        column: String,
    },
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ChainSection {
    pub steps: Vec<StepSection>,
    pub bounds: BoundsSection,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct StepSection {
    pub degree: u32,
    pub source_classification: Classification,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub flat: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct BoundsSection {
    pub band_bound: i64,
    /// `null` when the variety could not be counted.
    pub variety_bound: Option<i64>,
    pub step_limit: u32,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct VerdictSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl VerdictSection {
    pub fn exit_code(&self) -> i32 {
        match self.kind.as_str() {
            "measure_exists" => 0,
            "no_measure" => 2,
            _ => 3,
        }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct MeasureSection {
    pub flat_degree: u32,
    pub atoms: Vec<AtomSection>,
    pub max_moment_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct AtomSection {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct VerificationSection {
    pub passed: bool,
    pub weights_positive: bool,
    pub on_variety: bool,
    pub max_generator_residual: f64,
    pub moments_match: bool,
    pub atom_count: usize,
    pub rank: usize,
    pub failures: Vec<String>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

fn label(m: Monomial) -> String {
    m.to_string().to_uppercase()
}

fn source_text(s: &Source) -> String {
    match s {
        Source::OldMoment => "existing moment".to_string(),
        Source::Rule { column, rule, band } => format!("{} := {rule} ({band:?} band)", label(*column)),
    }
}

pub fn psd_certificate(cert: &PsdCertificate, labels: &[Monomial]) -> Certificate {
    let minor = cert.minor().iter().map(|&k| label(labels[k])).collect();
    match cert {
        PsdCertificate::NegativePivot { index, value, .. } => Certificate::NegativePivot {
            index: *index,
            label: label(labels[*index]),
            value: format_rational(value),
            minor,
        },
        PsdCertificate::ZeroDiagonal { row, col, value, .. } => Certificate::ZeroDiagonal {
            row: label(labels[*row]),
            col: label(labels[*col]),
            value: format_rational(value),
            minor,
        },
    }
}

pub fn rg_certificate(v: &RgViolation) -> Certificate {
    Certificate::RgViolation {
        relation: v.relation.to_string(),
        multiplier: v.multiplier.to_string(),
        message: v.to_string(),
    }
}

pub fn inconsistency_certificate(e: &Inconsistency) -> Certificate {
    Certificate::Inconsistent {
        row: label(e.row),
        col: label(e.col),
        moment: [e.moment.i, e.moment.j],
        existing: format_rational(&e.existing.value),
        existing_source: source_text(&e.existing.source),
        proposed: format_rational(&e.proposed.value),
        proposed_source: source_text(&e.proposed.source),
        discrepancy: format_rational(&e.discrepancy()),
    }
}

fn profile_section(prof: &DeterminacyProfile, d: u32) -> ProfileSection {
    let (f, g) = prof.generators_original();
    ProfileSection {
        n: prof.n,
        m: prof.m,
        generators: [f.to_string(), g.to_string()],
        roles_swapped: prof.roles_swapped,
        both_orientations: prof.both_orientations,
        band_bound: prof.band_bound(d),
    }
}

/// PSD, rank, recursiveness and determinacy of `M_d`, without extending.
pub fn analyze(m: &MomentMatrix) -> Analysis {
    let labels = m.labels();
    let psd = psd_check(m.mat());
    let rank = m.rank();
    let flat = m.degree() == 0 || m.truncate(m.degree() - 1).rank() == rank;
    let rg = is_recursively_generated(m);
    let prof = detect_rd(m);
    let mut certificates = Vec::new();
    if let Some(c) = &psd.certificate {
        certificates.push(psd_certificate(c, &labels));
    }
    if let Some(v) = &rg.violation {
        certificates.push(rg_certificate(v));
    }
    Analysis {
        degree: m.degree(),
        dim: m.dim(),
        psd: psd.psd,
        rank,
        flat,
        rg: rg.ok,
        rd: prof.is_some(),
        classification: prof.as_ref().map_or(Classification::NotRd, |p| p.classification),
        relations: kernel_relations(m).iter().map(|r| r.to_string()).collect(),
        profile: prof.as_ref().map(|p| profile_section(p, m.degree())),
        certificates,
    }
}

fn outcome_certificate(o: &ExtensionOutcome, labels: &[Monomial]) -> Option<Certificate> {
    match o {
        ExtensionOutcome::BInconsistent(e) | ExtensionOutcome::CInconsistent(e) => Some(inconsistency_certificate(e)),
        ExtensionOutcome::RangeFailure { column } => Some(Certificate::RangeFailure { column: label(*column) }),
        ExtensionOutcome::NotPsd { certificate, .. } => Some(psd_certificate(certificate, labels)),
        ExtensionOutcome::NotRecursivelyGenerated(v) => Some(rg_certificate(v)),
        ExtensionOutcome::Extended { .. } => None,
    }
}

fn step_section(s: &ChainStep) -> StepSection {
    let labels = moment_extend::monomials::monomials_up_to(s.degree);
    StepSection {
        degree: s.degree,
        source_classification: s.source_classification,
        outcome: s.outcome.name().to_string(),
        rank: s.rank,
        flat: matches!(s.outcome, ExtensionOutcome::Extended { flat: true, .. }),
        certificate: outcome_certificate(&s.outcome, &labels),
    }
}

pub fn chain_section(r: &ChainReport) -> ChainSection {
    ChainSection {
        steps: r.steps.iter().map(step_section).collect(),
        bounds: BoundsSection {
            band_bound: r.bounds.band_bound,
            variety_bound: r.bounds.variety_bound,
            step_limit: r.bounds.step_limit,
        },
    }
}

pub fn verdict_section(v: &Verdict) -> VerdictSection {
    match v {
        Verdict::MeasureExists { flat_degree } => VerdictSection {
            kind: v.name().to_string(),
            degree: Some(*flat_degree),
            reason: None,
        },
        Verdict::NoMeasure { failed_degree, reason } => VerdictSection {
            kind: v.name().to_string(),
            degree: Some(*failed_degree),
            reason: Some(reason.name().to_string()),
        },
        Verdict::BoundExhausted => VerdictSection {
            kind: v.name().to_string(),
            degree: None,
            reason: None,
        },
    }
}

pub fn not_applicable_section(e: &NotApplicable) -> VerdictSection {
    let reason = match e {
        NotApplicable::NotPsd(_) => "not_psd",
        NotApplicable::NotRg(_) => "not_recursively_generated",
        NotApplicable::NotRd => "not_recursively_determinate",
    };
    VerdictSection {
        kind: "not_applicable".to_string(),
        degree: None,
        reason: Some(reason.to_string()),
    }
}

pub fn measure_section(flat_degree: u32, mu: &AtomicMeasure, verify: Option<&VerifyReport>) -> MeasureSection {
    let mut atoms: Vec<AtomSection> = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .map(|(&(x, y), &weight)| AtomSection { x, y, weight })
        .collect();
    atoms.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    MeasureSection {
        flat_degree,
        atoms,
        max_moment_residual: mu.max_residual(),
        verification: verify.map(|v| VerificationSection {
            passed: v.passed(),
            weights_positive: v.weights_positive,
            on_variety: v.on_variety,
            max_generator_residual: v.max_generator_residual,
            moments_match: v.moments_match,
            atom_count: v.atom_count,
            rank: v.rank,
            failures: v.failures.clone(),
        }),
        error: None,
    }
}

impl ReportFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let a = &self.analysis;
        let _ = writeln!(out, "{}: M_{} ({}x{})", self.command, a.degree, a.dim, a.dim);
        let _ = writeln!(
            out,
            "  psd={} rank={} flat={} rg={} rd={} class={}",
            a.psd, a.rank, a.flat, a.rg, a.rd, a.classification
        );
        for r in &a.relations {
            let _ = writeln!(out, "  relation {r}");
        }
        if let Some(p) = &a.profile {
            let _ = writeln!(
                out,
                "  generators {} ; {} (n={}, m={}, swapped={})",
                p.generators[0], p.generators[1], p.n, p.m, p.roles_swapped
            );
        }
        for c in &a.certificates {
            let _ = writeln!(out, "  certificate {}", serde_json::to_string(c).expect("serializable"));
        }
        if let Some(ch) = &self.chain {
            let b = &ch.bounds;
            let vb = b.variety_bound.map_or("n/a".to_string(), |v| v.to_string());
            let _ = writeln!(
                out,
                "  bounds: band={} variety={} steps<={}",
                b.band_bound, vb, b.step_limit
            );
            for s in &ch.steps {
                let rank = s.rank.map_or("-".to_string(), |r| r.to_string());
                let _ = writeln!(
                    out,
                    "  step M_{}: {} rank={} flat={} (from {})",
                    s.degree, s.outcome, rank, s.flat, s.source_classification
                );
                if let Some(c) = &s.certificate {
                    let _ = writeln!(out, "    certificate {}", serde_json::to_string(c).expect("serializable"));
                }
            }
        }
        if let Some(v) = &self.verdict {
            let deg = v.degree.map_or(String::new(), |d| format!(" at degree {d}"));
            let why = v.reason.as_ref().map_or(String::new(), |r| format!(" ({r})"));
            let _ = writeln!(out, "verdict: {}{deg}{why}", v.kind);
        }
        if let Some(m) = &self.measure {
            let _ = writeln!(out, "measure from M_{}: {} atoms", m.flat_degree, m.atoms.len());
            for at in &m.atoms {
                let _ = writeln!(out, "  ({:.12}, {:.12})  weight {:.12}", at.x, at.y, at.weight);
            }
            let _ = writeln!(out, "  max moment residual {:e}", m.max_moment_residual);
            if let Some(v) = &m.verification {
                let _ = writeln!(out, "  verification {}", if v.passed { "passed" } else { "failed" });
                for f in &v.failures {
                    let _ = writeln!(out, "    {f}");
                }
            }
            if let Some(e) = &m.error {
                let _ = writeln!(out, "  error in stage {}: {}", e.stage, e.message);
            }
        }
        let t = &self.timing_ms;
        let _ = writeln!(
            out,
            "timing_ms: analysis={:.3} chain={:.3} measure={:.3}",
            t.analysis, t.chain, t.measure
        );
        out
    }
}
