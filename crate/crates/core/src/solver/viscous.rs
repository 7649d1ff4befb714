use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::grid::{Grid, Window};
use crate::error::{Error, Result};
use crate::model::{ExtendedInitial, LevelHamiltonian};

/// Provenance carried by a solved field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMeta {
    pub model: String,
    pub profile: String,
    pub eta: f64,
    pub eps: f64,
}

/// All time slices of a solution on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    meta: FieldMeta,
    alpha: f64,
    slices: Vec<Vec<f64>>,
}

/// Largest number of coordinates handled by the stencil buffers.
pub const MAX_COORDS: usize = 8;

impl GridField {
    /// Assemble a field from raw slices, e.g. when reading a checkpoint.
    pub fn from_slices(
        grid: Grid,
        meta: FieldMeta,
        alpha: f64,
        slices: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if slices.len() != grid.steps() + 1 {
            return Err(Error::Shape {
                what: "field time slices",
                expected: grid.steps() + 1,
                found: slices.len(),
            });
        }
        if let Some(s) = slices.iter().find(|s| s.len() != grid.node_count()) {
            return Err(Error::Shape {
                what: "field slice length",
                expected: grid.node_count(),
                found: s.len(),
            });
        }
        if let Some(step) = slices.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::BlowUp { step });
        }
        Ok(GridField {
            grid,
            meta,
            alpha,
            slices,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn meta(&self) -> &FieldMeta {
        &self.meta
    }
    pub fn eps(&self) -> f64 {
        self.meta.eps
    }
    pub fn eta(&self) -> f64 {
        self.meta.eta
    }
    /// Lax–Friedrichs dissipation speed used by the scheme.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn slice(&self, step: usize) -> &[f64] {
        &self.slices[step]
    }
    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }
    pub fn value(&self, step: usize, node: usize) -> f64 {
        self.slices[step][node]
    }

    /// A copy with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            grid: self.grid.clone(),
            meta: self.meta.clone(),
            alpha: self.alpha,
            slices: self
                .slices
                .iter()
                .map(|s| s.iter().map(|v| f(*v)).collect())
                .collect(),
        }
    }

    /// Riesz gradient by central differences, one-sided at the box faces.
    pub fn gradient(&self, step: usize, node: usize, out: &mut [f64]) {
        stencil_gradient(&self.grid, &self.slices[step], node, out)
    }

    /// Forward and backward Riesz difference quotients along every axis.
    pub fn one_sided_gradients(&self, step: usize, node: usize) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let f = &self.slices[step];
        let scale = (1u64 << g.level()) as f64;
        let n = g.n_coords();
        let (mut fw, mut bw) = (vec![0.0; n], vec![0.0; n]);
        for m in 0..n {
            let s = g.strides()[m];
            let k = g.axis_index(node, m);
            let h = g.spacing()[m];
            let back = if k > 0 {
                (f[node] - f[node - s]) / h
            } else {
                (f[node + s] - f[node]) / h
            };
            let fwd = if k + 1 < g.points() {
                (f[node + s] - f[node]) / h
            } else {
                back
            };
            let back = if k > 0 { back } else { fwd };
            fw[m] = scale * fwd;
            bw[m] = scale * back;
        }
        (fw, bw)
    }

    /// Time derivative: centered inside, one-sided at both ends.
    pub fn time_derivative(&self, step: usize, node: usize) -> f64 {
        let dt = self.grid.dt();
        let last = self.grid.steps();
        if step == 0 {
            (self.slices[1][node] - self.slices[0][node]) / dt
        } else if step == last {
            (self.slices[last][node] - self.slices[last - 1][node]) / dt
        } else {
            (self.slices[step + 1][node] - self.slices[step - 1][node]) / (2.0 * dt)
        }
    }

    /// Normalized Laplacian `2^-j sum_m d^2 f / dz_m^2` with the ghost closure.
    pub fn laplacian(&self, step: usize, node: usize) -> f64 {
        let g = &self.grid;
        let f = &self.slices[step];
        let mut acc = 0.0;
        for m in 0..g.n_coords() {
            let (fm, f0, fp) = neighbours(g, f, node, m);
            let h = g.spacing()[m];
            acc += (fp - 2.0 * f0 + fm) / (h * h);
        }
        acc / (1u64 << g.level()) as f64
    }

    /// Multilinear interpolation of slice `step` at coordinates `z`.
    pub fn interpolate(&self, step: usize, z: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let n = g.n_coords();
        let mut base = 0usize;
        let mut frac = [0.0f64; MAX_COORDS];
        for m in 0..n {
            let u = (z[m] - g.lo()[m]) / g.spacing()[m];
            if u < -1e-9 || u > (g.points() - 1) as f64 + 1e-9 {
                return Err(Error::Domain("interpolation point outside the grid box"));
            }
            let u = u.clamp(0.0, (g.points() - 1) as f64);
            let c = (u as usize).min(g.points() - 2);
            frac[m] = u - c as f64;
            base += c * g.strides()[m];
        }
        let f = &self.slices[step];
        let mut acc = 0.0;
        for corner in 0..1usize << n {
            let mut w = 1.0;
            let mut idx = base;
            for m in 0..n {
                if (corner >> m) & 1 == 1 {
                    w *= frac[m];
                    idx += g.strides()[m];
                } else {
                    w *= 1.0 - frac[m];
                }
            }
            if w != 0.0 {
                acc += w * f[idx];
            }
        }
        Ok(acc)
    }
}

#[inline]
fn neighbours(g: &Grid, f: &[f64], node: usize, m: usize) -> (f64, f64, f64) {
    let s = g.strides()[m];
    let k = g.axis_index(node, m);
    let f0 = f[node];
    let last = g.points() - 1;
    let fm = if k > 0 {
        f[node - s]
    } else {
        2.0 * f0 - f[node + s]
    };
    let fp = if k < last {
        f[node + s]
    } else {
        2.0 * f0 - f[node - s]
    };
    (fm, f0, fp)
}

/// Riesz gradient of a slice with the ghost-node closure of the scheme.
pub fn stencil_gradient(g: &Grid, f: &[f64], node: usize, out: &mut [f64]) {
    let scale = (1u64 << g.level()) as f64;
    for m in 0..g.n_coords() {
        let (fm, _, fp) = neighbours(g, f, node, m);
        out[m] = scale * (fp - fm) / (2.0 * g.spacing()[m]);
    }
}

/// Explicit Lax–Friedrichs solve of `d_t f = H(grad f) + eps Lap f` from the
/// extension of the initial condition sampled on the grid.
pub fn solve_viscous<H: LevelHamiltonian>(
    ham: &H,
    ext: &ExtendedInitial,
    grid: &Grid,
    eps: f64,
    meta: FieldMeta,
) -> Result<GridField> {
    if !(eps >= 0.0) {
        return Err(Error::Config(alloc::format!(
            "viscosity {eps} must be nonnegative"
        )));
    }
    if ham.level() != grid.level() || ham.dim() != grid.dim() || ext.level() != grid.level() {
        return Err(Error::Shape {
            what: "grid level",
            expected: grid.level() as usize,
            found: ham.level() as usize,
        });
    }
    let n = grid.n_coords();
    if n > MAX_COORDS {
        return Err(Error::Config(alloc::format!(
            "{n} coordinates exceed the solver limit {MAX_COORDS}"
        )));
    }
    let alpha = ham.coord_speed();
    grid.check_cfl(alpha, eps)?;
    let init: Vec<Result<f64>> =
        crate::par::map(grid.node_count(), |i| ext.eval_coords(&grid.coords(i)));
    let first: Vec<f64> = init.into_iter().collect::<Result<_>>()?;
    let mut slices = Vec::with_capacity(grid.steps() + 1);
    slices.push(first);
    let nu = eps / (1u64 << grid.level()) as f64;
    let scale = (1u64 << grid.level()) as f64;
    let dt = grid.dt();
    for step in 1..=grid.steps() {
        let prev = &slices[step - 1];
        let mut next = vec![0.0; grid.node_count()];
        crate::par::fill(&mut next, |i| {
            let mut p = [0.0f64; MAX_COORDS];
            let mut diff = 0.0;
            for m in 0..n {
                let (fm, f0, fp) = neighbours(grid, prev, i, m);
                let h = grid.spacing()[m];
                p[m] = scale * (fp - fm) / (2.0 * h);
                diff += (0.5 * alpha * h + nu) * (fp - 2.0 * f0 + fm) / (h * h);
            }
            prev[i] + dt * (ham.value(&p[..n]) + diff)
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        slices.push(next);
    }
    Ok(GridField {
        grid: grid.clone(),
        meta: FieldMeta { eps, ..meta },
        alpha,
        slices,
    })
}

/// `d_t f - H(grad f) - eps Lap f` at an interior time step.
pub fn hj_residual<H: LevelHamiltonian>(
    field: &GridField,
    ham: &H,
    step: usize,
    node: usize,
) -> f64 {
    let n = field.grid().n_coords();
    let mut p = [0.0f64; MAX_COORDS];
    field.gradient(step, node, &mut p[..n]);
    field.time_derivative(step, node)
        - ham.value(&p[..n])
        - field.eps() * field.laplacian(step, node)
}

/// `max |a - b|` over `nodes` and all common time steps.
pub fn sup_difference(a: &GridField, b: &GridField, nodes: &[usize]) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::Config(String::from(
            "fields live on different grids",
        )));
    }
    let mut d = 0.0f64;
    for (sa, sb) in a.slices().iter().zip(b.slices()) {
        for &i in nodes {
            d = d.max(libm::fabs(sa[i] - sb[i]));
        }
    }
    Ok(d)
}

/// Smallest-viscosity field with the Cauchy increments of the ladder.
#[derive(Debug, Clone)]
pub struct VanishingViscosity {
    pub field: GridField,
    pub eps: Vec<f64>,
    /// `sup |f_{eps_k} - f_{eps_{k+1}}|` over the window.
    pub increments: Vec<f64>,
    /// Whether the increments decrease along the ladder.
    pub cauchy: bool,
}

/// Solve along a strictly decreasing viscosity ladder on a shared grid.
pub fn solve_nonviscous<H: LevelHamiltonian>(
    ham: &H,
    ext: &ExtendedInitial,
    grid: &Grid,
    eps_ladder: &[f64],
    window: &Window,
    meta: FieldMeta,
) -> Result<VanishingViscosity> {
    if eps_ladder.is_empty()
        || eps_ladder.iter().any(|e| !(*e > 0.0))
        || eps_ladder.windows(2).any(|w| !(w[0] > w[1]))
    {
        return Err(Error::Config(String::from(
            "viscosity ladder must be positive and strictly decreasing",
        )));
    }
    let nodes = window.nodes(grid);
    let mut fields = Vec::with_capacity(eps_ladder.len());
    for eps in eps_ladder {
        fields.push(solve_viscous(ham, ext, grid, *eps, meta.clone())?);
    }
    let increments = fields
        .windows(2)
        .map(|w| sup_difference(&w[0], &w[1], &nodes))
        .collect::<Result<Vec<_>>>()?;
    let cauchy = increments.windows(2).all(|w| w[1] < w[0]);
    Ok(VanishingViscosity {
        field: fields.pop().expect("nonempty ladder"),
        eps: eps_ladder.to_vec(),
        increments,
        cauchy,
    })
}
