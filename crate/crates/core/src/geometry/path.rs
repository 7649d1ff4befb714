use alloc::vec::Vec;

use super::dyadic::DyadicPoint;
use crate::error::{Error, Result};
use crate::linalg::SymMat;

/// Right-continuous step function `[0, 1) -> S^D`.
///
/// `values[k]` is taken on `[breakpoints[k], breakpoints[k + 1])`, the last
/// interval closing at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    breakpoints: Vec<f64>,
    values: Vec<SymMat>,
}

impl StepPath {
    pub fn new(breakpoints: Vec<f64>, values: Vec<SymMat>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidPath("no intervals"));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::Shape {
                what: "step path values",
                expected: breakpoints.len(),
                found: values.len(),
            });
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidPath("first breakpoint must be 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidPath(
                "breakpoints must be strictly increasing",
            ));
        }
        if !(breakpoints[breakpoints.len() - 1] < 1.0) {
            return Err(Error::InvalidPath("breakpoints must lie in [0, 1)"));
        }
        let dim = values[0].dim();
        if let Some(v) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::Shape {
                what: "step path block dimension",
                expected: dim,
                found: v.dim(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value"));
        }
        Ok(StepPath {
            breakpoints,
            values,
        })
    }

    pub fn constant(value: SymMat) -> Self {
        StepPath {
            breakpoints: alloc::vec![0.0],
            values: alloc::vec![value],
        }
    }

    /// Scalar path (`D = 1`).
    pub fn from_scalars(breakpoints: Vec<f64>, values: &[f64]) -> Result<Self> {
        Self::new(
            breakpoints,
            values.iter().map(|v| SymMat::scalar(*v)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[SymMat] {
        &self.values
    }

    /// `[a, b)` of interval `k`.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        let b = self.breakpoints.get(k + 1).copied().unwrap_or(1.0);
        (self.breakpoints[k], b)
    }

    pub fn interval_len(&self, k: usize) -> f64 {
        let (a, b) = self.interval(k);
        b - a
    }

    fn index_of(&self, s: f64) -> usize {
        self.breakpoints
            .partition_point(|b| *b <= s)
            .saturating_sub(1)
    }

    pub fn value_at(&self, s: f64) -> &SymMat {
        &self.values[self.index_of(s)]
    }

    pub fn map(&self, f: impl Fn(&SymMat) -> SymMat) -> StepPath {
        StepPath {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }

    /// The same function on a finer partition containing all current breakpoints.
    pub fn refine(&self, breakpoints: &[f64]) -> Result<StepPath> {
        let mut values = Vec::with_capacity(breakpoints.len());
        let mut k = 0;
        for b in breakpoints {
            while k + 1 < self.breakpoints.len() && self.breakpoints[k + 1] <= *b {
                k += 1;
            }
            values.push(self.values[k].clone());
        }
        let out = StepPath::new(breakpoints.to_vec(), values)?;
        if self
            .breakpoints
            .iter()
            .any(|b| breakpoints.binary_search_by(|x| x.total_cmp(b)).is_err())
        {
            return Err(Error::InvalidPath(
                "refinement must contain all breakpoints",
            ));
        }
        Ok(out)
    }

    fn combine(&self, other: &StepPath, c: f64) -> Result<StepPath> {
        if self.dim() != other.dim() {
            return Err(Error::Shape {
                what: "step path block dimension",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let bps = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let a = self.refine(&bps)?;
        let b = other.refine(&bps)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| {
                let mut m = x.clone();
                m.axpy(c, y);
                m
            })
            .collect();
        Ok(StepPath {
            breakpoints: bps,
            values,
        })
    }

    pub fn add(&self, other: &StepPath) -> Result<StepPath> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &StepPath) -> Result<StepPath> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, c: f64) -> StepPath {
        self.map(|v| v.scale(c))
    }

    /// `int_0^1 <a(s), b(s)> ds`.
    pub fn inner_l2(&self, other: &StepPath) -> Result<f64> {
        let bps = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let a = self.refine(&bps)?;
        let b = other.refine(&bps)?;
        Ok((0..a.len())
            .map(|k| a.interval_len(k) * a.values[k].dot(&b.values[k]))
            .sum())
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = (0..self.len())
            .map(|k| self.interval_len(k) * self.values[k].dot(&self.values[k]))
            .sum();
        libm::sqrt(s)
    }

    pub fn norm_l1(&self) -> f64 {
        (0..self.len())
            .map(|k| self.interval_len(k) * self.values[k].norm())
            .sum()
    }

    /// `int_a^b kappa(s) ds` over `0 <= a <= b <= 1`.
    pub fn integral_over(&self, a: f64, b: f64) -> SymMat {
        let mut acc = SymMat::zeros(self.dim());
        for k in 0..self.len() {
            let (lo, hi) = self.interval(k);
            let len = hi.min(b) - lo.max(a);
            if len > 0.0 {
                acc.axpy(len, &self.values[k]);
            }
        }
        acc
    }

    pub fn integral(&self) -> SymMat {
        self.integral_over(0.0, 1.0)
    }

    /// `int_0^1 f(kappa(s)) ds` for a scalar functional `f`.
    pub fn integrate(&self, f: impl Fn(&SymMat) -> f64) -> f64 {
        (0..self.len())
            .map(|k| self.interval_len(k) * f(&self.values[k]))
            .sum()
    }

    /// Membership in the cone of increasing PSD paths: `kappa(0) >= 0` and
    /// every jump is PSD, up to `tol`.
    pub fn is_increasing_psd(&self, tol: f64) -> bool {
        self.values[0].is_psd(tol) && self.values.windows(2).all(|w| (&w[1] - &w[0]).is_psd(tol))
    }

    /// Membership in the dual cone: every tail integral `int_t^1 kappa` is PSD.
    ///
    /// Tail integrals are piecewise linear in `t`, so checking breakpoints suffices.
    pub fn is_in_dual(&self, tol: f64) -> bool {
        let mut tail = SymMat::zeros(self.dim());
        for k in (0..self.len()).rev() {
            tail.axpy(self.interval_len(k), &self.values[k]);
            if !tail.is_psd(tol) {
                return false;
            }
        }
        true
    }
}

/// Sorted union of two partitions.
pub fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        let next = match (a.get(i), b.get(k)) {
            (Some(x), Some(y)) if x < y => {
                i += 1;
                *x
            }
            (Some(x), Some(y)) if y < x => {
                k += 1;
                *y
            }
            (Some(x), Some(_)) => {
                i += 1;
                k += 1;
                *x
            }
            (Some(x), None) => {
                i += 1;
                *x
            }
            (None, Some(y)) => {
                k += 1;
                *y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// `p_j`: block averages over the dyadic intervals of level `j`.
pub fn project(kappa: &StepPath, level: u32) -> DyadicPoint {
    let n = 1usize << level;
    let scale = n as f64;
    let blocks = (0..n)
        .map(|k| {
            let a = k as f64 / scale;
            let b = (k + 1) as f64 / scale;
            kappa.integral_over(a, b).scale(scale)
        })
        .collect();
    DyadicPoint::new(level, blocks).expect("block count matches level")
}

/// `l_j`: the step path constant on each dyadic interval.
pub fn lift(x: &DyadicPoint) -> StepPath {
    let n = x.blocks().len();
    StepPath {
        breakpoints: (0..n).map(|k| k as f64 / n as f64).collect(),
        values: x.blocks().to_vec(),
    }
}

/// `l_j p_j kappa`.
pub fn local_average(kappa: &StepPath, level: u32) -> StepPath {
    lift(&project(kappa, level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_partitions() {
        let v = |x: f64| SymMat::scalar(x);
        assert!(StepPath::new(vec![0.1], vec![v(1.0)]).is_err());
        assert!(StepPath::new(vec![0.0, 0.5, 0.5], vec![v(1.0), v(2.0), v(3.0)]).is_err());
        assert!(StepPath::new(vec![0.0, 1.0], vec![v(1.0), v(2.0)]).is_err());
        assert!(StepPath::new(vec![0.0, 0.5], vec![v(1.0)]).is_err());
    }

    #[test]
    fn projection_of_linear_staircase() {
        let kappa =
            StepPath::from_scalars(vec![0.0, 0.25, 0.5, 0.75], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let p = project(&kappa, 1);
        assert_eq!(p.blocks()[0].get(0, 0), 0.5);
        assert_eq!(p.blocks()[1].get(0, 0), 2.5);
    }

    #[test]
    fn merge_is_sorted_union() {
        assert_eq!(
            merge_breakpoints(&[0.0, 0.5], &[0.0, 0.25, 0.5, 0.75]),
            vec![0.0, 0.25, 0.5, 0.75]
        );
    }
}
