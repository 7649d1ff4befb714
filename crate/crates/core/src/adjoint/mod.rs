//! Backward adjoint transport of the linearized scheme and the averaged
//! measures built from it.

mod measure;

pub use measure::{
    build_sigma_measure, cone_mass, first_moment_bound, lift_to_gamma, second_moment_bound, Atom,
    EnvelopeMeasure, MeasureMeta, SigmaMeasure,
};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::LevelHamiltonian;
use crate::solver::{stencil_gradient, Grid, GridField, MAX_COORDS};

/// Mass tolerance of every adjoint slice.
pub const MASS_TOL: f64 = 1e-8;
/// Most negative density accepted.
pub const DENSITY_FLOOR: f64 = -1e-12;

/// `grad H_eta(grad f)` at every node of every forward step but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityHistory {
    grid: Grid,
    alpha: f64,
    eps: f64,
    eta: f64,
    slices: Vec<Vec<f64>>,
}

impl VelocityHistory {
    /// Velocities of the forward scheme that produced `field` from `ham`.
    pub fn compute<H: LevelHamiltonian>(field: &GridField, ham: &H) -> Self {
        let g = field.grid();
        let n = g.n_coords();
        let slices = (0..g.steps())
            .map(|step| {
                let f = field.slice(step);
                let mut v = vec![0.0; g.node_count() * n];
                crate::par::fill_chunks(&mut v, n, |node, out| {
                    let mut p = [0.0f64; MAX_COORDS];
                    stencil_gradient(g, f, node, &mut p[..n]);
                    ham.gradient(&p[..n], out);
                });
                v
            })
            .collect();
        VelocityHistory {
            grid: g.clone(),
            alpha: field.alpha(),
            eps: field.eps(),
            eta: field.eta(),
            slices,
        }
    }

    /// A constant velocity field, e.g. for transport checks.
    pub fn constant(grid: &Grid, velocity: &[f64], alpha: f64, eps: f64) -> Self {
        let v: Vec<f64> = (0..grid.node_count())
            .flat_map(|_| velocity.iter().copied())
            .collect();
        VelocityHistory {
            grid: grid.clone(),
            alpha,
            eps,
            eta: 0.0,
            slices: vec![v; grid.steps()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn at(&self, step: usize, node: usize) -> &[f64] {
        let n = self.grid.n_coords();
        &self.slices[step][node * n..(node + 1) * n]
    }
}

/// Backward density slices for one terminal condition.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointField {
    pub terminal_step: usize,
    pub center: Vec<f64>,
    pub r: f64,
    /// `slices[k]` is the density at time step `k`; empty unless kept.
    pub slices: Vec<Vec<f64>>,
    /// Density at time 0.
    pub initial: Vec<f64>,
    pub max_mass_drift: f64,
    pub min_density: f64,
}

/// Normalized indicator of the `L^j` ball `B(center, r)` on the grid.
pub fn terminal_density(grid: &Grid, center: &[f64], r: f64) -> Result<Vec<f64>> {
    let h = grid.h() / libm::sqrt((1u64 << grid.level()) as f64);
    if !(r >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::Config(format!(
            "ball radius {r} is below twice the grid spacing {h:.4e}"
        )));
    }
    let (lo, hi) = (grid.lo(), grid.hi());
    let scale = libm::sqrt((1u64 << grid.level()) as f64);
    if center
        .iter()
        .zip(lo.iter().zip(hi))
        .any(|(c, (a, b))| c - r * scale < a - 1e-12 || c + r * scale > b + 1e-12)
    {
        return Err(Error::Config(format!(
            "ball of radius {r} leaves the grid box"
        )));
    }
    let inside: Vec<bool> = (0..grid.node_count())
        .map(|i| grid.distance(&grid.coords(i), center) <= r * (1.0 + 1e-12))
        .collect();
    let count = inside.iter().filter(|b| **b).count();
    if count == 0 {
        return Err(Error::Config(format!(
            "ball of radius {r} contains no grid node"
        )));
    }
    let w = 1.0 / (count as f64 * grid.cell_volume());
    Ok(inside
        .into_iter()
        .map(|b| if b { w } else { 0.0 })
        .collect())
}

/// Solve the adjoint backward from step `terminal_step` with the normalized
/// ball indicator, using the conservative transpose of the forward scheme.
pub fn solve_adjoint_with(
    velocity: &VelocityHistory,
    terminal_step: usize,
    center: &[f64],
    r: f64,
    keep_slices: bool,
) -> Result<AdjointField> {
    let g = velocity.grid();
    if terminal_step > g.steps() {
        return Err(Error::Config(format!(
            "terminal step {terminal_step} beyond the forward horizon ({} steps)",
            g.steps()
        )));
    }
    let n = g.n_coords();
    let vol = g.cell_volume();
    let nu = velocity.eps() / (1u64 << g.level()) as f64;
    let alpha = velocity.alpha();
    let dt = g.dt();
    let mut sigma = terminal_density(g, center, r)?;
    let mut slices = Vec::new();
    if keep_slices {
        slices.push(sigma.clone());
    }
    let mut max_drift = 0.0f64;
    let mut min_density = sigma.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    for step in (0..terminal_step).rev() {
        let prev = &sigma;
        let mut next = vec![0.0; g.node_count()];
        crate::par::fill(&mut next, |i| {
            let mut div = 0.0;
            let vi = velocity.at(step, i);
            for m in 0..n {
                let s = g.strides()[m];
                let k = g.axis_index(i, m);
                let h = g.spacing()[m];
                let d = 0.5 * alpha + nu / h;
                let mut flux_up = 0.0;
                let mut flux_down = 0.0;
                if k + 1 < g.points() {
                    let vj = velocity.at(step, i + s)[m];
                    flux_up =
                        0.5 * (vi[m] * prev[i] + vj * prev[i + s]) - d * (prev[i + s] - prev[i]);
                }
                if k > 0 {
                    let vj = velocity.at(step, i - s)[m];
                    flux_down =
                        0.5 * (vj * prev[i - s] + vi[m] * prev[i]) - d * (prev[i] - prev[i - s]);
                }
                div += (flux_up - flux_down) / h;
            }
            prev[i] - dt * div
        });
        let mass: f64 = next.iter().sum::<f64>() * vol;
        let drift = libm::fabs(mass - 1.0);
        max_drift = max_drift.max(drift);
        let low = next.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        min_density = min_density.min(low);
        if !(drift <= MASS_TOL) {
            return Err(Error::MassDrift { step, drift });
        }
        if low < DENSITY_FLOOR {
            return Err(Error::NegativeDensity { step, value: low });
        }
        sigma = next;
        if keep_slices {
            slices.push(sigma.clone());
        }
    }
    slices.reverse();
    Ok(AdjointField {
        terminal_step,
        center: center.to_vec(),
        r,
        slices,
        initial: sigma,
        max_mass_drift: max_drift,
        min_density,
    })
}

/// Solve the adjoint of `forward` with terminal time `s` (snapped to the
/// nearest step), keeping all slices.
pub fn solve_adjoint<H: LevelHamiltonian>(
    forward: &GridField,
    ham: &H,
    s: f64,
    center: &[f64],
    r: f64,
) -> Result<AdjointField> {
    if !(s >= 0.0) || s > forward.grid().horizon() * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "terminal time {s} outside the solved horizon"
        )));
    }
    let vel = VelocityHistory::compute(forward, ham);
    solve_adjoint_with(&vel, forward.grid().step_of(s), center, r, true)
}
