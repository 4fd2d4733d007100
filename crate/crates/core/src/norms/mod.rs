//! Norm and seminorm estimators, Hardy-type inequality checks and truncated-norm scans.

mod grid;
mod hardy;
mod report;
mod scan;
mod trace;

pub use grid::{bmo_seminorm, lp_norm, sobolev_norms, BmoReport, GridFunction, SobolevNorms};
pub use hardy::{dual_hardy_check, hardy_check, integrate_abs_pow, PiecewiseLinear};
pub use report::{NormEntry, NormReport, Verdict};
pub use scan::{truncated_norm_scan, Exclusion, ScanRegion, ScanResult, ScanSpec, ScanVerdict};
pub use trace::{gagliardo_refinement, gagliardo_seminorm, holder_seminorm, BoundaryTrace, RefinementStudy};
