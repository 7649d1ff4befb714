//! Grid solvers and variational formulas for the finite-dimensional equations.

mod characteristic;
mod derivative;
mod grid;
mod hopf;
mod viscous;

pub use characteristic::{characteristic_foot, characteristic_value, CharacteristicReport};
pub use derivative::{
    derivative_bound_check, derivative_probe, BoundKind, BoundViolation, DerivativeReport,
};
pub use grid::{Grid, Window};
pub use hopf::{hopf_lax_value, hopf_value, HopfResult, HopfSearch};
pub use viscous::{
    hj_residual, solve_nonviscous, solve_viscous, stencil_gradient, sup_difference, FieldMeta,
    GridField, VanishingViscosity, MAX_COORDS,
};
