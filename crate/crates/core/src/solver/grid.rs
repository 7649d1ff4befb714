use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{interior_slack, DyadicPoint};
use crate::linalg::n_coords;

/// Uniform space-time lattice on a coordinate box of `L^j`.
///
/// Nodes are stored row-major, the last coordinate varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    level: u32,
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    points: usize,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    dt: f64,
    steps: usize,
}

impl Grid {
    /// A lattice with an explicit time step; `horizon / dt` is rounded up
    /// and `dt` shrunk so that the last step lands on the horizon.
    pub fn new(
        level: u32,
        dim: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
        points: usize,
        horizon: f64,
        dt_max: f64,
    ) -> Result<Self> {
        let n = n_coords(dim) << level;
        if lo.len() != n || hi.len() != n {
            return Err(Error::Shape {
                what: "grid box corners",
                expected: n,
                found: lo.len().min(hi.len()),
            });
        }
        if points < 3 {
            return Err(Error::Config(format!(
                "need at least 3 points per axis, got {points}"
            )));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::Config(format!(
                "grid box must satisfy lo < hi on every axis"
            )));
        }
        if !(horizon > 0.0) || !(dt_max > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon and time step must be positive (horizon {horizon}, dt {dt_max})"
            )));
        }
        let steps = libm::ceil(horizon / dt_max - 1e-9).max(1.0) as usize;
        let spacing = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) / (points - 1) as f64)
            .collect();
        let mut strides = vec![1usize; n];
        for m in (0..n.saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * points;
        }
        Ok(Grid {
            level,
            dim,
            lo,
            hi,
            points,
            spacing,
            strides,
            dt: horizon / steps as f64,
            steps,
        })
    }

    /// A lattice whose time step is `cfl` times the stability limit for
    /// coordinate speed `alpha` and viscosity `eps`.
    pub fn with_cfl(
        level: u32,
        dim: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
        points: usize,
        horizon: f64,
        alpha: f64,
        eps: f64,
        cfl: f64,
    ) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!(
                "CFL number {cfl} must lie in (0, 1]"
            )));
        }
        let probe = Grid::new(level, dim, lo.clone(), hi.clone(), points, horizon, horizon)?;
        let limit = probe.stable_dt(alpha, eps);
        Grid::new(level, dim, lo, hi, points, horizon, cfl * limit)
    }

    /// `1 / sum_m (alpha / h_m + 2 eps 2^-j / h_m^2)`.
    pub fn stable_dt(&self, alpha: f64, eps: f64) -> f64 {
        let nu = eps / (1u64 << self.level) as f64;
        let rate: f64 = self
            .spacing
            .iter()
            .map(|h| alpha / h + 2.0 * nu / (h * h))
            .sum();
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn check_cfl(&self, alpha: f64, eps: f64) -> Result<()> {
        let limit = self.stable_dt(alpha, eps);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {:.4e} violates the CFL limit {limit:.4e}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_coords(&self) -> usize {
        self.lo.len()
    }
    pub fn points(&self) -> usize {
        self.points
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    /// Largest spacing.
    pub fn h(&self) -> f64 {
        self.spacing.iter().fold(0.0, |a, b| a.max(*b))
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }
    pub fn time(&self, step: usize) -> f64 {
        self.dt * step as f64
    }
    /// Step index nearest to `t`.
    pub fn step_of(&self, t: f64) -> usize {
        (libm::round(t / self.dt).max(0.0) as usize).min(self.steps)
    }
    pub fn node_count(&self) -> usize {
        self.points.pow(self.lo.len() as u32)
    }
    /// Lebesgue volume of a cell in coordinates.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Index along axis `m` of `node`.
    #[inline]
    pub fn axis_index(&self, node: usize, m: usize) -> usize {
        (node / self.strides[m]) % self.points
    }

    pub fn coords_into(&self, node: usize, z: &mut [f64]) {
        for m in 0..self.lo.len() {
            z[m] = self.lo[m] + self.spacing[m] * self.axis_index(node, m) as f64;
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.lo.len()];
        self.coords_into(node, &mut z);
        z
    }

    pub fn point(&self, node: usize) -> DyadicPoint {
        DyadicPoint::from_coords(self.level, self.dim, &self.coords(node))
            .expect("grid coordinates match the level")
    }

    pub fn box_low(&self) -> DyadicPoint {
        DyadicPoint::from_coords(self.level, self.dim, &self.lo).expect("corner")
    }

    pub fn box_high(&self) -> DyadicPoint {
        DyadicPoint::from_coords(self.level, self.dim, &self.hi).expect("corner")
    }

    /// Node nearest to `z`, if `z` lies in the box.
    pub fn nearest_node(&self, z: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for m in 0..self.lo.len() {
            if z[m] < self.lo[m] - 1e-12 || z[m] > self.hi[m] + 1e-12 {
                return None;
            }
            let k = libm::round((z[m] - self.lo[m]) / self.spacing[m]) as usize;
            idx += k.min(self.points - 1) * self.strides[m];
        }
        Some(idx)
    }

    /// `L^j` distance between two coordinate vectors.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        libm::sqrt(s / (1u64 << self.level) as f64)
    }
}

/// Nodes kept away from the box faces and from the cone boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    /// Minimum eigenvalue slack of `x_1` and the increments.
    pub cone_slack: f64,
    /// Minimum coordinate distance to every box face.
    pub box_margin: f64,
}

impl Window {
    pub fn contains(&self, grid: &Grid, node: usize) -> bool {
        let z = grid.coords(node);
        let inside = z
            .iter()
            .zip(grid.lo().iter().zip(grid.hi()))
            .all(|(v, (a, b))| {
                *v >= a + self.box_margin - 1e-12 && *v <= b - self.box_margin + 1e-12
            });
        inside && interior_slack(&grid.point(node)) >= self.cone_slack
    }

    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        (0..grid.node_count())
            .filter(|&i| self.contains(grid, i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_cfl() {
        let g =
            Grid::with_cfl(1, 1, vec![0.0, 0.0], vec![1.0, 2.0], 11, 1.0, 2.0, 0.1, 0.9).unwrap();
        assert_eq!(g.node_count(), 121);
        assert_eq!(g.coords(12), vec![0.1, 0.2]);
        assert!(g.check_cfl(2.0, 0.1).is_ok());
        assert!(g.check_cfl(4.0, 0.1).is_err());
        assert!((g.horizon() - 1.0).abs() < 1e-12);
        assert_eq!(g.nearest_node(&[0.1, 0.2]), Some(12));
    }
}
