//! Exact extension engine for recursively determinate bivariate truncated
//! moment problems.
//!
//! Given moments `β_ij` (`i + j ≤ 2d`) whose moment matrix `M_d` is
//! positive, recursively generated and has pure column relations
//! `X^n = p(X, Y)` and `Y^m = q(X, Y)`, the crate builds the unique
//! recursively generated extensions `M_{d+1}, M_{d+2}, …` in exact rational
//! arithmetic until either an extension is flat (a representing measure
//! exists and can be extracted) or a step fails (no measure exists, with a
//! certificate).
//!
//! ```
//! use moment_extend::{fixtures, extend::{run_chain, Verdict}};
//! use moment_extend::exactla::rat;
//!
//! let m3 = fixtures::catalan_family(rat(1430), None);
//! let report = run_chain(&m3).unwrap();
//! assert_eq!(report.verdict, Verdict::MeasureExists { flat_degree: 5 });
//! ```

pub mod exactla;
pub mod extend;
pub mod fixtures;
pub mod measure;
pub mod moment;
pub mod monomials;
pub mod relations;

pub use exactla::{Mat, Rat, SymMat};
pub use extend::{extend_step, run_chain, ChainReport, ExtensionOutcome, Verdict};
pub use moment::{build_moment_matrix, MomentMatrix, MomentSequence, RationalAtomicMeasure};
pub use monomials::{Monomial, Poly};
pub use relations::{detect_rd, Classification, DeterminacyProfile};
