//! Dyadic spaces, step paths and the cone of increasing PSD paths.

mod cone;
mod dyadic;
pub mod isotonic;
mod path;

pub use cone::{
    cone_depth, cone_flags, dual_cone_project, in_cone, in_dual_cone, interior_slack,
    metric_project_to_cone, project_increasing, ConeFlags, ProjectionOptions,
};
pub use dyadic::{inner_product, DyadicPoint};
pub use path::{lift, local_average, merge_breakpoints, project, StepPath};
