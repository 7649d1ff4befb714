use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{solve_adjoint_with, VelocityHistory};
use crate::error::{Error, Result};
use crate::geometry::{in_cone, lift, StepPath};
use crate::solver::Grid;

/// `sigma` averaged over terminal times in `[t, t + r]`, at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaMeasure {
    pub grid: Grid,
    pub t: f64,
    pub center: Vec<f64>,
    pub r: f64,
    pub eps: f64,
    pub eta: f64,
    /// Terminal steps of the midpoint nodes.
    pub s_steps: Vec<usize>,
    /// Density per node (with respect to Lebesgue measure in coordinates).
    pub density: Vec<f64>,
    pub max_mass_drift: f64,
    pub min_density: f64,
}

impl SigmaMeasure {
    /// Probability weight of each node.
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        let vol = self.grid.cell_volume();
        self.density.iter().map(move |d| d * vol)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights().sum()
    }

    /// `int |y|_{L^j} d sigma`.
    pub fn first_moment(&self) -> f64 {
        self.weights()
            .enumerate()
            .filter(|(_, w)| *w != 0.0)
            .map(|(i, w)| w * self.grid.point(i).norm())
            .sum()
    }

    /// `int |y|^2_{L^j} d sigma`.
    pub fn second_moment(&self) -> f64 {
        self.weights()
            .enumerate()
            .filter(|(_, w)| *w != 0.0)
            .map(|(i, w)| {
                let n = self.grid.point(i).norm();
                w * n * n
            })
            .sum()
    }
}

/// Average the time-0 adjoint densities over `s_nodes` midpoint terminal
/// times in `[t, t + r]`.
pub fn build_sigma_measure(
    velocity: &VelocityHistory,
    t: f64,
    center: &[f64],
    r: f64,
    s_nodes: usize,
) -> Result<SigmaMeasure> {
    let g = velocity.grid();
    if s_nodes == 0 {
        return Err(Error::Config(format!("need at least one terminal node")));
    }
    if !(t >= 0.0) || t + r > g.horizon() * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "averaging window [{t}, {}] exceeds the horizon {}",
            t + r,
            g.horizon()
        )));
    }
    let s_steps: Vec<usize> = (0..s_nodes)
        .map(|i| g.step_of(t + (i as f64 + 0.5) * r / s_nodes as f64))
        .collect();
    let runs: Vec<Result<super::AdjointField>> = crate::par::map(s_nodes, |i| {
        solve_adjoint_with(velocity, s_steps[i], center, r, false)
    });
    let mut density = vec![0.0; g.node_count()];
    let mut max_mass_drift = 0.0f64;
    let mut min_density = f64::INFINITY;
    for run in runs {
        let run = run?;
        for (d, v) in density.iter_mut().zip(&run.initial) {
            *d += v / s_nodes as f64;
        }
        max_mass_drift = max_mass_drift.max(run.max_mass_drift);
        min_density = min_density.min(run.min_density);
    }
    Ok(SigmaMeasure {
        grid: g.clone(),
        t,
        center: center.to_vec(),
        r,
        eps: velocity.eps(),
        eta: velocity.eta(),
        s_steps,
        density,
        max_mass_drift,
        min_density,
    })
}

/// `(1 + Lip + eps)(1 + |x| + t + r)`.
pub fn first_moment_bound(lip: f64, eps: f64, x_norm: f64, t: f64, r: f64) -> f64 {
    (1.0 + lip + eps) * (1.0 + x_norm + t + r)
}

/// `(C + eps)(C + |x|^2 + t^2 + r^2)`.
pub fn second_moment_bound(c: f64, eps: f64, x_norm: f64, t: f64, r: f64) -> f64 {
    (c + eps) * (c + x_norm * x_norm + t * t + r * r)
}

/// Mass of the nodes outside the cone (membership tolerance `tau`).
pub fn cone_mass(measure: &SigmaMeasure, tau: f64) -> f64 {
    measure
        .weights()
        .enumerate()
        .filter(|(i, w)| *w != 0.0 && !in_cone(&measure.grid.point(*i), tau))
        .map(|(_, w)| w)
        .sum()
}

/// One weighted point of an envelope measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub path: StepPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureMeta {
    pub level: u32,
    pub eta: f64,
    pub eps: f64,
    pub r: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

/// Cone part of a measure, renormalized and lifted to step paths.
///
/// Atom weights sum to 1; `off_cone_mass` is the discarded mass.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeMeasure {
    pub atoms: Vec<Atom>,
    pub off_cone_mass: f64,
    pub meta: MeasureMeta,
}

impl EnvelopeMeasure {
    /// A measure with given atoms; weights are renormalized.
    pub fn from_atoms(atoms: Vec<Atom>, meta: MeasureMeta) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if atoms.is_empty() || !(total > 0.0) || atoms.iter().any(|a| a.weight < 0.0) {
            return Err(Error::Config(format!(
                "atom weights must be nonnegative with positive sum"
            )));
        }
        Ok(EnvelopeMeasure {
            atoms: atoms
                .into_iter()
                .map(|a| Atom {
                    weight: a.weight / total,
                    path: a.path,
                })
                .collect(),
            off_cone_mass: 0.0,
            meta,
        })
    }

    pub fn dirac(path: StepPath, meta: MeasureMeta) -> Self {
        EnvelopeMeasure {
            atoms: vec![Atom { weight: 1.0, path }],
            off_cone_mass: 0.0,
            meta,
        }
    }
}

/// Drop off-cone nodes, renormalize and lift node centers to step paths.
pub fn lift_to_gamma(measure: &SigmaMeasure, tau: f64) -> Result<EnvelopeMeasure> {
    let total = measure.total_mass();
    let mut atoms = Vec::new();
    let mut off = 0.0;
    for (i, w) in measure.weights().enumerate() {
        if w == 0.0 {
            continue;
        }
        let p = measure.grid.point(i);
        if in_cone(&p, tau) {
            atoms.push(Atom {
                weight: w,
                path: lift(&p),
            });
        } else {
            off += w;
        }
    }
    let off_cone_mass = off / total;
    if off_cone_mass >= 0.5 || atoms.is_empty() {
        return Err(Error::Degenerate { off_cone_mass });
    }
    let kept: f64 = atoms.iter().map(|a| a.weight).sum();
    for a in &mut atoms {
        a.weight /= kept;
    }
    Ok(EnvelopeMeasure {
        atoms,
        off_cone_mass,
        meta: MeasureMeta {
            level: measure.grid.level(),
            eta: measure.eta,
            eps: measure.eps,
            r: measure.r,
            t: measure.t,
            x: measure.center.clone(),
        },
    })
}
