use alloc::format;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sample::{random_psd, random_psd_unit_box};
use super::xi::{Nonlinearity, NonlinearityKind};
use crate::error::{Error, Result};
use crate::linalg::SymMat;

/// Seed of the admissibility probes run by [`regularize`].
pub const PROBE_SEED: u64 = 0x5eed_0001;
/// Number of sampled pairs per admissibility probe.
pub const PROBE_COUNT: usize = 1000;

/// A Lipschitz, PSD-increasing continuation `xi_bar` of `xi` off the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedNonlinearity {
    base: Nonlinearity,
    lip: f64,
    lower_bound: f64,
}

impl RegularizedNonlinearity {
    pub fn base(&self) -> &Nonlinearity {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Whether `xi_bar` depends only on the diagonal entries.
    pub fn diagonal_only(&self) -> bool {
        matches!(self.base.kind(), NonlinearityKind::Bipartite)
    }

    /// Lipschitz constant of `xi_bar` in the Frobenius norm.
    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// `xi_bar` on scalars.
    #[inline]
    pub fn eval_scalar(&self, x: f64) -> f64 {
        let one = SymMat::scalar(1.0);
        if x < 0.0 {
            let zero = SymMat::scalar(0.0);
            self.base.eval(&zero) + self.base.grad(&zero).get(0, 0) * x
        } else if x <= 1.0 {
            self.base.eval(&SymMat::scalar(x))
        } else {
            self.base.eval(&one) + self.base.grad(&one).get(0, 0) * (x - 1.0)
        }
    }

    /// `xi_bar'` on scalars.
    #[inline]
    pub fn grad_scalar(&self, x: f64) -> f64 {
        let c = x.clamp(0.0, 1.0);
        self.base.grad(&SymMat::scalar(c)).get(0, 0)
    }

    pub fn eval(&self, a: &SymMat) -> f64 {
        match self.base.kind() {
            NonlinearityKind::Bipartite => {
                let (u, v) = (a.get(0, 0), a.get(1, 1));
                if u <= 1.0 && v <= 1.0 {
                    u * v
                } else {
                    u + v - 1.0
                }
            }
            _ => self.eval_scalar(a.get(0, 0)),
        }
    }

    pub fn grad(&self, a: &SymMat) -> SymMat {
        match self.base.kind() {
            NonlinearityKind::Bipartite => {
                let (u, v) = (a.get(0, 0), a.get(1, 1));
                if u <= 1.0 && v <= 1.0 {
                    SymMat::diag(&[v, u])
                } else {
                    SymMat::identity(2)
                }
            }
            _ => SymMat::scalar(self.grad_scalar(a.get(0, 0))),
        }
    }
}

/// Probe the monotone-gradient assumption on random PSD pairs `a <= a'`.
pub fn probe_monotone_gradient(model: &Nonlinearity, count: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    for _ in 0..count {
        let a = random_psd(&mut rng, d, 1.5);
        let b = random_psd(&mut rng, d, 1.5);
        let a2 = &a + &b;
        let ga = model.grad(&a);
        let lam = ga.min_eigenvalue();
        if lam < -1e-8 {
            return Err(Error::Admissibility(format!(
                "{}: gradient at a PSD point has eigenvalue {lam:.3e}",
                model.name()
            )));
        }
        let lam = (&model.grad(&a2) - &ga).min_eigenvalue();
        if lam < -1e-8 {
            return Err(Error::Admissibility(format!(
                "{}: gradient is not PSD-increasing (eigenvalue {lam:.3e})",
                model.name()
            )));
        }
    }
    Ok(())
}

/// Probe agreement on the unit box, monotonicity and increasing increments.
pub fn probe_regularization(reg: &RegularizedNonlinearity, count: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = reg.dim();
    let fail = |what: &str, v: f64| {
        Err(Error::Admissibility(format!(
            "{}: regularization {what} ({v:.3e})",
            reg.base().name()
        )))
    };
    for _ in 0..count {
        let a = random_psd_unit_box(&mut rng, d);
        let diff = reg.eval(&a) - reg.base().eval(&a);
        if diff != 0.0 {
            return fail("differs from xi on the unit box", diff);
        }
        let a = random_psd(&mut rng, d, 2.0);
        let b = random_psd(&mut rng, d, 2.0);
        let c = random_psd(&mut rng, d, 2.0);
        let a2 = &a + &c;
        let inc = reg.eval(&(&a + &b)) - reg.eval(&a);
        if inc < -1e-12 {
            return fail("is not PSD-increasing", inc);
        }
        let gap = (reg.eval(&(&a2 + &b)) - reg.eval(&a2)) - inc;
        if gap < -1e-10 {
            return fail("has decreasing increments", gap);
        }
        let step = (&b - &c).norm();
        let jump = libm::fabs(reg.eval(&b) - reg.eval(&c));
        if jump > reg.lip() * step * (1.0 + 1e-12) + 1e-14 {
            return fail("exceeds its Lipschitz constant", jump / step);
        }
    }
    Ok(())
}

/// Build the regularization of `model` after probing its admissibility.
///
/// Scalar models continue linearly beyond 1. The bipartite model uses
/// `a_11 a_22` on the unit box and `a_11 + a_22 - 1` outside it.
pub fn regularize(model: &Nonlinearity) -> Result<RegularizedNonlinearity> {
    probe_monotone_gradient(model, PROBE_COUNT, PROBE_SEED)?;
    let (lip, lower_bound) = match (model.kind(), model.dim()) {
        (NonlinearityKind::Sk | NonlinearityKind::PSpin(_), 1) => {
            let g1 = model.grad(&SymMat::scalar(1.0)).get(0, 0);
            let g0 = model.grad(&SymMat::scalar(0.0)).get(0, 0);
            (g1.max(libm::fabs(g0)), model.eval(&SymMat::scalar(0.0)))
        }
        (NonlinearityKind::Bipartite, 2) => (core::f64::consts::SQRT_2, 0.0),
        _ => {
            return Err(Error::Admissibility(format!(
                "no regularization available for {} with D = {}",
                model.name(),
                model.dim()
            )))
        }
    };
    let reg = RegularizedNonlinearity {
        base: model.clone(),
        lip,
        lower_bound,
    };
    probe_regularization(&reg, PROBE_COUNT, PROBE_SEED ^ 1)?;
    Ok(reg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_continuation() {
        let reg = regularize(&Nonlinearity::sk(1)).unwrap();
        assert_eq!(reg.eval(&SymMat::scalar(2.0)), 3.0);
        assert_eq!(reg.eval(&SymMat::scalar(0.5)), 0.25);
        assert_eq!(reg.lip(), 2.0);
    }

    #[test]
    fn offdiagonal_bipartite_is_rejected() {
        let err = regularize(&Nonlinearity::bipartite_offdiagonal()).unwrap_err();
        assert!(matches!(err, Error::Admissibility(_)));
    }

    #[test]
    fn bipartite_is_admissible() {
        let reg = regularize(&Nonlinearity::bipartite()).unwrap();
        let a = SymMat::from_rows(&[&[2.0, 0.5], &[0.5, 0.5]]);
        assert_eq!(reg.eval(&a), 1.5);
    }
}
