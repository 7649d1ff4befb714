use alloc::vec;
use alloc::vec::Vec;

use super::viscous::GridField;
use crate::geometry::{interior_slack, DyadicPoint};
use crate::model::Nonlinearity;

/// Which derivative bound failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    TimeDerivative,
    ConeMembership,
    SupNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub step: usize,
    pub node: usize,
    pub kind: BoundKind,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub checked: usize,
    pub tol: f64,
    pub violations: Vec<BoundViolation>,
}

/// Sweep `|d_t f| <= sup_{|a| <= 1} |xi(a)|`, `l_j grad f` in the cone and
/// `|l_j grad f|_inf <= 1`, each up to `tol`, over `nodes` and all steps past 0.
pub fn derivative_bound_check(
    field: &GridField,
    model: &Nonlinearity,
    nodes: &[usize],
    tol: f64,
) -> DerivativeReport {
    let g = field.grid();
    let bound_t = model.sup_on_unit_ball();
    let mut grad = vec![0.0; g.n_coords()];
    let mut violations = Vec::new();
    let mut checked = 0;
    for step in 1..=g.steps() {
        for &node in nodes {
            checked += 1;
            let dt = (field.value(step, node) - field.value(step - 1, node)) / g.dt();
            if libm::fabs(dt) > bound_t + tol {
                violations.push(BoundViolation {
                    step,
                    node,
                    kind: BoundKind::TimeDerivative,
                    value: dt,
                    bound: bound_t,
                });
            }
            field.gradient(step, node, &mut grad);
            let p = DyadicPoint::from_coords(g.level(), g.dim(), &grad)
                .expect("gradient has grid shape");
            let slack = interior_slack(&p);
            if slack < -tol {
                violations.push(BoundViolation {
                    step,
                    node,
                    kind: BoundKind::ConeMembership,
                    value: slack,
                    bound: 0.0,
                });
            }
            let sup = p.blocks().iter().map(|b| b.norm()).fold(0.0, f64::max);
            if sup > 1.0 + tol {
                violations.push(BoundViolation {
                    step,
                    node,
                    kind: BoundKind::SupNorm,
                    value: sup,
                    bound: 1.0,
                });
            }
        }
    }
    DerivativeReport {
        checked,
        tol,
        violations,
    }
}

/// `(d_t f, grad f)` at a node where one-sided difference quotients agree
/// within `agree` on every axis, else `None`.
pub fn derivative_probe(
    field: &GridField,
    step: usize,
    node: usize,
    agree: f64,
) -> Option<(f64, DyadicPoint)> {
    let g = field.grid();
    let (fw, bw) = field.one_sided_gradients(step, node);
    if fw.iter().zip(&bw).any(|(a, b)| libm::fabs(a - b) > agree) {
        return None;
    }
    let mut grad = vec![0.0; g.n_coords()];
    field.gradient(step, node, &mut grad);
    let p = DyadicPoint::from_coords(g.level(), g.dim(), &grad).ok()?;
    Some((field.time_derivative(step, node), p))
}
