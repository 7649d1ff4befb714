use alloc::vec;
use alloc::vec::Vec;

use super::initial::InitialCondition;
use crate::error::{Error, Result};
use crate::geometry::isotonic::pava;
use crate::geometry::{in_cone, metric_project_to_cone, DyadicPoint, ProjectionOptions};

/// Finite-difference step for off-cone gradients of matrix-valued extensions.
pub const H_EXT: f64 = 1e-6;

/// `psi_tilde(x) = psi^j(P x) + <grad psi^j(P x), x - P x>` on all of `L^j`,
/// with `P` the metric projection onto the cone.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedInitial {
    ic: InitialCondition,
    level: u32,
}

/// Build the extension of `ic` to `L^j`.
pub fn extend_psi_j(ic: InitialCondition, level: u32) -> ExtendedInitial {
    ExtendedInitial { ic, level }
}

impl ExtendedInitial {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.ic.dim()
    }

    pub fn initial(&self) -> &InitialCondition {
        &self.ic
    }

    fn check(&self, x: &DyadicPoint) -> Result<()> {
        if x.level() != self.level || x.dim() != self.ic.dim() {
            return Err(Error::Shape {
                what: "extension argument",
                expected: self.level as usize,
                found: x.level() as usize,
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &DyadicPoint) -> Result<f64> {
        self.check(x)?;
        if in_cone(x, 0.0) {
            return self.ic.eval_j(x);
        }
        let p = metric_project_to_cone(x, ProjectionOptions::default())?;
        let g = self.ic.grad_j(&p)?;
        Ok(self.ic.eval_j(&p)? + g.inner(&x.sub(&p)?)?)
    }

    pub fn grad(&self, x: &DyadicPoint) -> Result<DyadicPoint> {
        self.check(x)?;
        if in_cone(x, 0.0) {
            return self.ic.grad_j(x);
        }
        if x.dim() == 1 {
            return self.grad_scalar(x);
        }
        let z = x.coords();
        let mut g = vec![0.0; z.len()];
        let scale = (1u64 << self.level) as f64;
        let mut zp = z.clone();
        for m in 0..z.len() {
            zp[m] = z[m] + H_EXT;
            let fp = self.eval(&DyadicPoint::from_coords(self.level, x.dim(), &zp)?)?;
            zp[m] = z[m] - H_EXT;
            let fm = self.eval(&DyadicPoint::from_coords(self.level, x.dim(), &zp)?)?;
            zp[m] = z[m];
            g[m] = scale * (fp - fm) / (2.0 * H_EXT);
        }
        DyadicPoint::from_coords(self.level, x.dim(), &g)
    }

    /// Scalar case: `phi'(P x) + DP^T (phi''(P x) (x - P x))`, where `DP`
    /// averages over positive pooled blocks and vanishes on clamped ones.
    fn grad_scalar(&self, x: &DyadicPoint) -> Result<DyadicPoint> {
        let y: Vec<f64> = x.blocks().iter().map(|b| b.get(0, 0)).collect();
        let iso = pava(&y, &vec![1.0; y.len()]);
        let prof = self.ic.profile();
        let mut out = vec![0.0; y.len()];
        let mut start = 0;
        while start < y.len() {
            let mut end = start + 1;
            while end < y.len() && iso[end] == iso[start] {
                end += 1;
            }
            let m = iso[start];
            let p = m.max(0.0);
            let corr = if m > 0.0 {
                let mean: f64 = y[start..end]
                    .iter()
                    .map(|v| prof.ddphi(p) * (v - p))
                    .sum::<f64>()
                    / (end - start) as f64;
                mean
            } else {
                0.0
            };
            for o in &mut out[start..end] {
                *o = prof.dphi(p) + corr;
            }
            start = end;
        }
        DyadicPoint::from_scalars(self.level, &out)
    }

    /// Value from concatenated coordinates.
    pub fn eval_coords(&self, z: &[f64]) -> Result<f64> {
        self.eval(&DyadicPoint::from_coords(self.level, self.ic.dim(), z)?)
    }

    /// Riesz gradient from concatenated coordinates.
    pub fn grad_coords(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .grad(&DyadicPoint::from_coords(self.level, self.ic.dim(), z)?)?
            .coords())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Profile;

    #[test]
    fn affine_below_the_cone() {
        let ic = InitialCondition::new(Profile::Affine { slope: 1.0 }, 1).unwrap();
        let ext = extend_psi_j(ic, 0);
        let x = DyadicPoint::from_scalars(0, &[-2.0]).unwrap();
        assert_eq!(ext.eval(&x).unwrap(), -2.0);
        assert_eq!(ext.grad(&x).unwrap().blocks()[0].get(0, 0), 1.0);
    }

    #[test]
    fn matches_psi_on_the_cone() {
        let ic = InitialCondition::new(Profile::LogCosh { scale: 1.0 }, 1).unwrap();
        let ext = extend_psi_j(ic, 2);
        let x = DyadicPoint::from_scalars(2, &[0.1, 0.4, 0.4, 1.3]).unwrap();
        assert_eq!(ext.eval(&x).unwrap(), ic.eval_j(&x).unwrap());
    }
}
