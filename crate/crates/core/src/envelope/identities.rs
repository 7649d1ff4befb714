use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::adjoint::{build_sigma_measure, terminal_density, SigmaMeasure, VelocityHistory};
use crate::error::{Error, Result};
use crate::model::{ExtendedInitial, LevelHamiltonian};
use crate::solver::GridField;

/// Nodes whose sigma weight is below this are skipped on the right-hand side.
pub const WEIGHT_CUTOFF: f64 = 1e-15;

/// Both sides of the three approximate envelope identities.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Cylinder averages of `f - <x', grad f> - t' d_t f` and `d_t f`.
    pub lhs: [f64; 2],
    /// Cylinder average of `grad f`.
    pub lhs_grad: Vec<f64>,
    /// Sigma integrals of `psi~ - <y, grad psi~>` and `H^j(grad psi~)`.
    pub rhs: [f64; 2],
    /// Sigma integral of `grad psi~`.
    pub rhs_grad: Vec<f64>,
    /// `lhs - rhs`: value, time derivative, then gradient coordinates.
    pub signed: Vec<f64>,
    /// Value, time-derivative and gradient residuals (gradient in the `L^j` norm).
    pub residuals: [f64; 3],
    pub measure: SigmaMeasure,
}

impl IdentityReport {
    pub fn total(&self) -> f64 {
        self.residuals.iter().sum()
    }
}

fn residuals_of(signed: &[f64], level: u32) -> [f64; 3] {
    let scale = 1.0 / (1u64 << level) as f64;
    let g2: f64 = signed[2..].iter().map(|d| d * d).sum();
    [
        libm::fabs(signed[0]),
        libm::fabs(signed[1]),
        libm::sqrt(scale * g2),
    ]
}

/// Residuals of `2 d_{h/2} - d_h`, removing the first-order grid floor from
/// signed differences computed on a grid and its refinement.
pub fn richardson(coarse: &[f64], fine: &[f64], level: u32) -> Result<[f64; 3]> {
    if coarse.len() != fine.len() || coarse.len() < 3 {
        return Err(Error::Shape {
            what: "signed residuals",
            expected: coarse.len(),
            found: fine.len(),
        });
    }
    let d: Vec<f64> = coarse.iter().zip(fine).map(|(c, f)| 2.0 * f - c).collect();
    Ok(residuals_of(&d, level))
}

/// Build sigma for the cylinder `[t, t + r] x B(center, r)` and compare the
/// cylinder averages of the forward field with the sigma integrals of the
/// extended initial condition.
///
/// `ham` is the unmollified `H^j`; `velocity` must come from `forward`.
#[allow(clippy::too_many_arguments)]
pub fn check_identities<H: LevelHamiltonian>(
    forward: &GridField,
    velocity: &VelocityHistory,
    ham: &H,
    ext: &ExtendedInitial,
    t: f64,
    center: &[f64],
    r: f64,
    s_nodes: usize,
) -> Result<IdentityReport> {
    let g = forward.grid();
    if velocity.grid() != g {
        return Err(Error::Config(format!(
            "velocity history and forward field live on different grids"
        )));
    }
    if ext.level() != g.level() || ext.dim() != g.dim() || ham.n_coords() != g.n_coords() {
        return Err(Error::Shape {
            what: "level data",
            expected: g.n_coords(),
            found: ham.n_coords(),
        });
    }
    let n = g.n_coords();
    let scale = 1.0 / (1u64 << g.level()) as f64;
    let measure = build_sigma_measure(velocity, t, center, r, s_nodes)?;

    let ball: Vec<usize> = terminal_density(g, center, r)?
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, _)| i)
        .collect();
    let count = (ball.len() * measure.s_steps.len()) as f64;
    let mut lhs = [0.0; 2];
    let mut lhs_grad = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut z = vec![0.0; n];
    for &step in &measure.s_steps {
        let ts = g.time(step);
        for &i in &ball {
            g.coords_into(i, &mut z);
            forward.gradient(step, i, &mut grad);
            let dt = forward.time_derivative(step, i);
            let xg: f64 = scale * z.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
            lhs[0] += forward.value(step, i) - xg - ts * dt;
            lhs[1] += dt;
            for (a, b) in lhs_grad.iter_mut().zip(&grad) {
                *a += b;
            }
        }
    }
    lhs[0] /= count;
    lhs[1] /= count;
    lhs_grad.iter_mut().for_each(|a| *a /= count);

    let vol = g.cell_volume();
    let support: Vec<(usize, f64)> = measure
        .density
        .iter()
        .enumerate()
        .map(|(i, d)| (i, d * vol))
        .filter(|(_, w)| *w > WEIGHT_CUTOFF)
        .collect();
    let terms: Vec<Result<(f64, f64, Vec<f64>)>> = crate::par::map(support.len(), |k| {
        let z = g.coords(support[k].0);
        let v = ext.eval_coords(&z)?;
        let gz = ext.grad_coords(&z)?;
        let yg: f64 = scale * z.iter().zip(&gz).map(|(a, b)| a * b).sum::<f64>();
        Ok((v - yg, ham.value(&gz), gz))
    });
    let mut rhs = [0.0; 2];
    let mut rhs_grad = vec![0.0; n];
    for ((_, w), term) in support.iter().zip(terms) {
        let (a, b, gz) = term?;
        rhs[0] += w * a;
        rhs[1] += w * b;
        for (s, v) in rhs_grad.iter_mut().zip(&gz) {
            *s += w * v;
        }
    }
    let mut signed = vec![lhs[0] - rhs[0], lhs[1] - rhs[1]];
    signed.extend(lhs_grad.iter().zip(&rhs_grad).map(|(a, b)| a - b));
    let residuals = residuals_of(&signed, g.level());
    Ok(IdentityReport {
        lhs,
        lhs_grad,
        rhs,
        rhs_grad,
        signed,
        residuals,
        measure,
    })
}
