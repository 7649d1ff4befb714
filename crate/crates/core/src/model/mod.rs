//! Nonlinearities, regularizations, the functional `H` and initial conditions.

mod extension;
mod functional;
mod initial;
mod level;
mod regularized;
pub mod sample;
mod xi;

pub use extension::{extend_psi_j, ExtendedInitial, H_EXT};
pub use functional::{
    h_constant_diagonal, h_eval, h_path_minimize, lcm_minimizer, PathInfimum, PathOptions,
};
pub use initial::{InitialCondition, Profile};
pub use level::{
    level_hamiltonian, AnyLevelH, LevelHamiltonian, MollifiedH, PathLevelH, ScalarLevelH,
    TableSpec, TabulatedLevelH, MAX_SCALAR_LEVEL,
};
pub use regularized::{
    probe_monotone_gradient, probe_regularization, regularize, RegularizedNonlinearity,
    PROBE_COUNT, PROBE_SEED,
};
pub use xi::{Nonlinearity, NonlinearityKind};
