//! Envelope-representation residuals and ladder studies.

mod identities;
mod study;
mod theorems;

pub use identities::{check_identities, richardson, IdentityReport, WEIGHT_CUTOFF};
pub use study::{
    convergence_study, decreasing, run_cell, Probe, StudyCell, StudyRow, StudySpec, StudyTable,
};
pub use theorems::{
    commutation_residual, measure_summary, theorem_t2_residuals, theorem_t_residual, MeasureSummary,
};
