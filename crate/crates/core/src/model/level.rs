//! `H^j(x) = H(l_j x)` on coordinates of `L^j`, and its mollification.

use alloc::vec;
use alloc::vec::Vec;

use super::functional::{h_constant_diagonal, h_path_minimize, PathOptions};
use super::regularized::RegularizedNonlinearity;
use crate::error::{Error, Result};
use crate::geometry::isotonic::pava_in_place;
use crate::geometry::{lift, DyadicPoint};
use crate::linalg::n_coords;

/// Largest level handled by the allocation-free scalar evaluator.
pub const MAX_SCALAR_LEVEL: u32 = 6;

/// A Hamiltonian on the coordinates of `L^j`.
///
/// Coordinates are the concatenated orthonormal coordinates of the blocks.
/// Gradients are Riesz gradients for the `L^j` inner product, i.e. `2^j`
/// times the coordinate partials.
pub trait LevelHamiltonian: Send + Sync {
    fn level(&self) -> u32;
    fn dim(&self) -> usize;
    fn n_coords(&self) -> usize {
        n_coords(self.dim()) << self.level()
    }
    fn value(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64], out: &mut [f64]);
    /// Lipschitz constant in the `L^j` norm.
    fn lipschitz(&self) -> f64;
    /// Bound on every coordinate of the gradient.
    fn coord_speed(&self) -> f64;
}

impl<T: LevelHamiltonian + ?Sized> LevelHamiltonian for &T {
    fn level(&self) -> u32 {
        (**self).level()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, z: &[f64]) -> f64 {
        (**self).value(z)
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        (**self).gradient(z, out)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn coord_speed(&self) -> f64 {
        (**self).coord_speed()
    }
}

/// Exact `H^j` for `D = 1`: `2^-j sum_k xi_bar(max(iso(x)_k, 0))`.
#[derive(Debug, Clone)]
pub struct ScalarLevelH {
    reg: RegularizedNonlinearity,
    level: u32,
}

impl ScalarLevelH {
    pub fn new(reg: RegularizedNonlinearity, level: u32) -> Result<Self> {
        if reg.dim() != 1 {
            return Err(Error::Shape {
                what: "scalar Hamiltonian dimension",
                expected: 1,
                found: reg.dim(),
            });
        }
        if level > MAX_SCALAR_LEVEL {
            return Err(Error::Config(alloc::format!(
                "level {level} exceeds the supported maximum {MAX_SCALAR_LEVEL}"
            )));
        }
        Ok(ScalarLevelH { reg, level })
    }

    pub fn regularization(&self) -> &RegularizedNonlinearity {
        &self.reg
    }
}

impl LevelHamiltonian for ScalarLevelH {
    fn level(&self) -> u32 {
        self.level
    }
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let mut y = [0.0f64; 64];
        let mut ends = [0usize; 64];
        y[..n].copy_from_slice(z);
        pava_in_place(&mut y[..n], &mut ends[..n]);
        y[..n]
            .iter()
            .map(|v| self.reg.eval_scalar(v.max(0.0)))
            .sum::<f64>()
            / n as f64
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let n = z.len();
        let mut y = [0.0f64; 64];
        let mut ends = [0usize; 64];
        y[..n].copy_from_slice(z);
        pava_in_place(&mut y[..n], &mut ends[..n]);
        for (o, v) in out.iter_mut().zip(&y[..n]) {
            *o = if *v > 0.0 {
                self.reg.grad_scalar(*v)
            } else {
                0.0
            };
        }
    }
    fn lipschitz(&self) -> f64 {
        self.reg.lip()
    }
    fn coord_speed(&self) -> f64 {
        self.reg.lip()
    }
}

/// `H^j` through the path optimizer; fallible, meant for tabulation.
#[derive(Debug, Clone)]
pub struct PathLevelH {
    reg: RegularizedNonlinearity,
    level: u32,
    opts: PathOptions,
}

impl PathLevelH {
    pub fn new(reg: RegularizedNonlinearity, level: u32, opts: PathOptions) -> Self {
        PathLevelH { reg, level, opts }
    }

    pub fn try_value(&self, z: &[f64]) -> Result<f64> {
        let x = DyadicPoint::from_coords(self.level, self.reg.dim(), z)?;
        let kappa = lift(&x);
        if kappa.is_increasing_psd(0.0) {
            return Ok(kappa.integrate(|a| self.reg.eval(a)));
        }
        if self.level == 0 && self.reg.dim() == 2 && self.reg.diagonal_only() {
            return h_constant_diagonal(&self.reg, &x.blocks()[0]);
        }
        Ok(h_path_minimize(&self.reg, &kappa, self.opts)?.value)
    }
}

/// Multilinear interpolation of `H^j` on a box lattice.
///
/// Arguments outside the box are clamped onto it.
#[derive(Debug, Clone)]
pub struct TabulatedLevelH {
    level: u32,
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    points: usize,
    spacing: Vec<f64>,
    values: Vec<f64>,
    lip: f64,
    speed: f64,
}

impl TabulatedLevelH {
    /// Tabulate `path` on `points^n` nodes of `[lo, hi]`.
    pub fn build(path: &PathLevelH, lo: Vec<f64>, hi: Vec<f64>, points: usize) -> Result<Self> {
        let n = n_coords(path.reg.dim()) << path.level;
        if lo.len() != n || hi.len() != n {
            return Err(Error::Shape {
                what: "tabulation box",
                expected: n,
                found: lo.len().min(hi.len()),
            });
        }
        if points < 2 || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Config(alloc::string::String::from(
                "tabulation box needs lo < hi and at least 2 points per axis",
            )));
        }
        let spacing: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) / (points - 1) as f64)
            .collect();
        let total = points.pow(n as u32);
        let node = |idx: usize| -> Vec<f64> {
            let mut z = vec![0.0; n];
            let mut r = idx;
            for m in (0..n).rev() {
                z[m] = lo[m] + spacing[m] * (r % points) as f64;
                r /= points;
            }
            z
        };
        let values: Vec<Result<f64>> = crate::par::map(total, |i| path.try_value(&node(i)));
        let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
        let scale = (1u64 << path.level) as f64;
        let mut speed = 0.0f64;
        for i in 0..total {
            let mut stride = 1;
            for m in (0..n).rev() {
                let coord = (i / stride) % points;
                if coord + 1 < points {
                    let d = libm::fabs(values[i + stride] - values[i]) / spacing[m];
                    speed = speed.max(scale * d);
                }
                stride *= points;
            }
        }
        let lip = path.reg.lip().max(speed * libm::sqrt(n as f64 / scale));
        Ok(TabulatedLevelH {
            level: path.level,
            dim: path.reg.dim(),
            lo,
            hi,
            points,
            spacing,
            values,
            lip,
            speed,
        })
    }

    fn locate(&self, z: &[f64], cell: &mut [usize], frac: &mut [f64]) {
        for m in 0..z.len() {
            let u = ((z[m].clamp(self.lo[m], self.hi[m]) - self.lo[m]) / self.spacing[m])
                .min((self.points - 1) as f64);
            let c = (u as usize).min(self.points - 2);
            cell[m] = c;
            frac[m] = u - c as f64;
        }
    }

    fn corner_index(&self, cell: &[usize], corner: usize) -> usize {
        let n = cell.len();
        let mut idx = 0;
        for m in 0..n {
            let bit = (corner >> (n - 1 - m)) & 1;
            idx = idx * self.points + cell[m] + bit;
        }
        idx
    }
}

impl LevelHamiltonian for TabulatedLevelH {
    fn level(&self) -> u32 {
        self.level
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let mut cell = [0usize; 8];
        let mut frac = [0.0f64; 8];
        self.locate(z, &mut cell[..n], &mut frac[..n]);
        let mut acc = 0.0;
        for corner in 0..1usize << n {
            let mut w = 1.0;
            for m in 0..n {
                let bit = (corner >> (n - 1 - m)) & 1;
                w *= if bit == 1 { frac[m] } else { 1.0 - frac[m] };
            }
            acc += w * self.values[self.corner_index(&cell[..n], corner)];
        }
        acc
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let n = z.len();
        let mut cell = [0usize; 8];
        let mut frac = [0.0f64; 8];
        self.locate(z, &mut cell[..n], &mut frac[..n]);
        let scale = (1u64 << self.level) as f64;
        for (d, o) in out.iter_mut().enumerate() {
            if z[d] < self.lo[d] || z[d] > self.hi[d] {
                *o = 0.0;
                continue;
            }
            let mut acc = 0.0;
            for corner in 0..1usize << n {
                let mut w = 1.0;
                for m in 0..n {
                    let bit = (corner >> (n - 1 - m)) & 1;
                    w *= if m == d {
                        if bit == 1 {
                            1.0
                        } else {
                            -1.0
                        }
                    } else if bit == 1 {
                        frac[m]
                    } else {
                        1.0 - frac[m]
                    };
                }
                acc += w * self.values[self.corner_index(&cell[..n], corner)];
            }
            *o = scale * acc / self.spacing[d];
        }
    }
    fn lipschitz(&self) -> f64 {
        self.lip
    }
    fn coord_speed(&self) -> f64 {
        self.speed
    }
}

/// Either level Hamiltonian, chosen by dimension.
#[derive(Debug, Clone)]
pub enum AnyLevelH {
    Scalar(ScalarLevelH),
    Tabulated(TabulatedLevelH),
}

impl LevelHamiltonian for AnyLevelH {
    fn level(&self) -> u32 {
        match self {
            AnyLevelH::Scalar(h) => h.level(),
            AnyLevelH::Tabulated(h) => h.level(),
        }
    }
    fn dim(&self) -> usize {
        match self {
            AnyLevelH::Scalar(h) => h.dim(),
            AnyLevelH::Tabulated(h) => h.dim(),
        }
    }
    fn value(&self, z: &[f64]) -> f64 {
        match self {
            AnyLevelH::Scalar(h) => h.value(z),
            AnyLevelH::Tabulated(h) => h.value(z),
        }
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        match self {
            AnyLevelH::Scalar(h) => h.gradient(z, out),
            AnyLevelH::Tabulated(h) => h.gradient(z, out),
        }
    }
    fn lipschitz(&self) -> f64 {
        match self {
            AnyLevelH::Scalar(h) => h.lipschitz(),
            AnyLevelH::Tabulated(h) => h.lipschitz(),
        }
    }
    fn coord_speed(&self) -> f64 {
        match self {
            AnyLevelH::Scalar(h) => h.coord_speed(),
            AnyLevelH::Tabulated(h) => h.coord_speed(),
        }
    }
}

/// Lattice used to tabulate `H^j` when `D >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub path: PathOptions,
}

impl Default for TableSpec {
    fn default() -> Self {
        TableSpec {
            lo: -0.75,
            hi: 1.75,
            points: 21,
            path: PathOptions::default(),
        }
    }
}

/// Exact scalar `H^j` for `D = 1`, tabulated path infimum otherwise.
pub fn level_hamiltonian(
    reg: &RegularizedNonlinearity,
    level: u32,
    table: &TableSpec,
) -> Result<AnyLevelH> {
    if reg.dim() == 1 {
        return Ok(AnyLevelH::Scalar(ScalarLevelH::new(reg.clone(), level)?));
    }
    let n = n_coords(reg.dim()) << level;
    let path = PathLevelH::new(reg.clone(), level, table.path);
    Ok(AnyLevelH::Tabulated(TabulatedLevelH::build(
        &path,
        vec![table.lo; n],
        vec![table.hi; n],
        table.points,
    )?))
}

/// Gauss nodes of the bump `(1 - s^2)^2` on `[-1, 1]`.
const BUMP_NODES: [f64; 3] = [-0.577_350_269_189_625_8, 0.0, 0.577_350_269_189_625_8];
const BUMP_WEIGHTS: [f64; 3] = [3.0 / 14.0, 4.0 / 7.0, 3.0 / 14.0];

/// `H_eta = H * zeta_eta` by tensor Gauss quadrature of a polynomial bump.
#[derive(Debug, Clone)]
pub struct MollifiedH<H> {
    inner: H,
    eta: f64,
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl<H: LevelHamiltonian> MollifiedH<H> {
    pub fn new(inner: H, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Config(alloc::string::String::from(
                "mollification width must be finite and nonnegative",
            )));
        }
        let n = inner.n_coords();
        if eta > 0.0 && n > 8 {
            return Err(Error::Config(alloc::format!(
                "tensor mollifier supports at most 8 coordinates, got {n}"
            )));
        }
        let (offsets, weights) = if eta == 0.0 {
            (vec![0.0; n], vec![1.0])
        } else {
            let count = 3usize.pow(n as u32);
            let mut offsets = Vec::with_capacity(count * n);
            let mut weights = Vec::with_capacity(count);
            for k in 0..count {
                let mut r = k;
                let mut w = 1.0;
                let start = offsets.len();
                offsets.resize(start + n, 0.0);
                for m in (0..n).rev() {
                    let i = r % 3;
                    r /= 3;
                    offsets[start + m] = eta * BUMP_NODES[i];
                    w *= BUMP_WEIGHTS[i];
                }
                weights.push(w);
            }
            (offsets, weights)
        };
        Ok(MollifiedH {
            inner,
            eta,
            offsets,
            weights,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn inner(&self) -> &H {
        &self.inner
    }

    /// `L^j` norm of the largest quadrature offset.
    pub fn max_shift(&self) -> f64 {
        let n = self.inner.n_coords() as f64;
        let scale = (1u64 << self.inner.level()) as f64;
        self.eta * BUMP_NODES[2] * libm::sqrt(n / scale)
    }
}

impl<H: LevelHamiltonian> LevelHamiltonian for MollifiedH<H> {
    fn level(&self) -> u32 {
        self.inner.level()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let mut buf = [0.0f64; 16];
        let p = &mut buf[..n];
        self.weights
            .iter()
            .zip(self.offsets.chunks(n))
            .map(|(w, off)| {
                for m in 0..n {
                    p[m] = z[m] - off[m];
                }
                w * self.inner.value(p)
            })
            .sum()
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let n = z.len();
        let mut buf = [0.0f64; 16];
        let mut g = [0.0f64; 16];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (w, off) in self.weights.iter().zip(self.offsets.chunks(n)) {
            for m in 0..n {
                buf[m] = z[m] - off[m];
            }
            self.inner.gradient(&buf[..n], &mut g[..n]);
            for m in 0..n {
                out[m] += w * g[m];
            }
        }
    }
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }
    fn coord_speed(&self) -> f64 {
        self.inner.coord_speed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{regularize, Nonlinearity};

    #[test]
    fn bump_rule_is_normalized() {
        let s: f64 = BUMP_WEIGHTS.iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        let m2: f64 = BUMP_WEIGHTS
            .iter()
            .zip(BUMP_NODES)
            .map(|(w, x)| w * x * x)
            .sum();
        assert!((m2 - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_level_values() {
        let reg = regularize(&Nonlinearity::sk(1)).unwrap();
        let h = ScalarLevelH::new(reg, 1).unwrap();
        // on the cone inside the box: mean of xi
        assert!((h.value(&[0.2, 0.6]) - 0.2).abs() < 1e-15);
        // pooled
        assert!((h.value(&[0.6, 0.2]) - 0.16).abs() < 1e-15);
        let mut g = [0.0; 2];
        h.gradient(&[0.6, 0.2], &mut g);
        assert!((g[0] - 0.8).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }
}
