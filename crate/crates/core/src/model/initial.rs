use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::geometry::{lift, DyadicPoint, StepPath};
use crate::linalg::SymMat;
use crate::TAU_CONE;

/// Scalar profile `phi`, lifted spectrally to symmetric matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `phi(u) = c u`.
    Affine { slope: f64 },
    /// `phi(u) = log cosh(s u) / s`; scalar only.
    LogCosh { scale: f64 },
    /// `phi(u) = c (u - log(1 + u))`, whose derivative is operator monotone.
    Ratio { amplitude: f64 },
}

fn log_cosh(x: f64) -> f64 {
    let a = libm::fabs(x);
    a + libm::log1p(libm::exp(-2.0 * a)) - core::f64::consts::LN_2
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Affine { .. } => "affine",
            Profile::LogCosh { .. } => "logcosh",
            Profile::Ratio { .. } => "ratio",
        }
    }

    #[inline]
    pub fn phi(&self, u: f64) -> f64 {
        match *self {
            Profile::Affine { slope } => slope * u,
            Profile::LogCosh { scale } => log_cosh(scale * u) / scale,
            Profile::Ratio { amplitude } => amplitude * (u - libm::log1p(u)),
        }
    }

    #[inline]
    pub fn dphi(&self, u: f64) -> f64 {
        match *self {
            Profile::Affine { slope } => slope,
            Profile::LogCosh { scale } => libm::tanh(scale * u),
            Profile::Ratio { amplitude } => amplitude * u / (1.0 + u),
        }
    }

    #[inline]
    pub fn ddphi(&self, u: f64) -> f64 {
        match *self {
            Profile::Affine { .. } => 0.0,
            Profile::LogCosh { scale } => {
                let t = libm::tanh(scale * u);
                scale * (1.0 - t * t)
            }
            Profile::Ratio { amplitude } => amplitude / ((1.0 + u) * (1.0 + u)),
        }
    }

    /// `sup phi''` on `[0, inf)`.
    pub fn grad_lip(&self) -> f64 {
        match *self {
            Profile::Affine { .. } => 0.0,
            Profile::LogCosh { scale } => scale,
            Profile::Ratio { amplitude } => amplitude,
        }
    }

    /// `sup phi'` on `[0, inf)`.
    pub fn slope_cap(&self) -> f64 {
        match *self {
            Profile::Affine { slope } => slope,
            Profile::LogCosh { .. } => 1.0,
            Profile::Ratio { amplitude } => amplitude,
        }
    }
}

/// `psi(q) = int_0^1 tr phi(q(s)) ds` with gradient `s -> phi'(q(s))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    profile: Profile,
    dim: usize,
}

impl InitialCondition {
    /// Checks that the gradient stays in the cone with `L^inf` norm at most 1.
    pub fn new(profile: Profile, dim: usize) -> Result<Self> {
        let ok = match profile {
            Profile::Affine { slope } => slope >= 0.0,
            Profile::LogCosh { scale } => scale > 0.0 && dim == 1,
            Profile::Ratio { amplitude } => amplitude >= 0.0,
        };
        if !ok || !profile.slope_cap().is_finite() {
            return Err(Error::Admissibility(format!(
                "profile {} with these parameters is not admissible for D = {dim}",
                profile.name()
            )));
        }
        let frob_cap = profile.slope_cap() * libm::sqrt(dim as f64);
        if frob_cap > 1.0 + 1e-12 {
            return Err(Error::Admissibility(format!(
                "profile {}: gradient norm cap {frob_cap:.4} exceeds 1",
                profile.name()
            )));
        }
        Ok(InitialCondition { profile, dim })
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> String {
        String::from(self.profile.name())
    }

    pub fn grad_lip(&self) -> f64 {
        self.profile.grad_lip()
    }

    /// `tr phi(a)`.
    pub fn phi_block(&self, a: &SymMat) -> f64 {
        if a.dim() == 1 {
            return self.profile.phi(a.get(0, 0));
        }
        a.trace_fn(|l| self.profile.phi(l))
    }

    /// `phi'(a)`.
    pub fn dphi_block(&self, a: &SymMat) -> SymMat {
        if let Profile::Affine { slope } = self.profile {
            return SymMat::scaled_identity(a.dim(), slope);
        }
        a.map_spectrum(|l| self.profile.dphi(l))
    }

    fn check(&self, q: &StepPath) -> Result<()> {
        if q.dim() != self.dim {
            return Err(Error::Shape {
                what: "path dimension",
                expected: self.dim,
                found: q.dim(),
            });
        }
        if !q.is_increasing_psd(TAU_CONE) {
            return Err(Error::Domain("initial condition evaluated off the cone"));
        }
        Ok(())
    }

    pub fn eval(&self, q: &StepPath) -> Result<f64> {
        self.check(q)?;
        Ok(q.integrate(|a| self.phi_block(a)))
    }

    pub fn grad(&self, q: &StepPath) -> Result<StepPath> {
        self.check(q)?;
        Ok(q.map(|a| self.dphi_block(a)))
    }

    /// `psi^j(x) = psi(l_j x)`.
    pub fn eval_j(&self, x: &DyadicPoint) -> Result<f64> {
        self.eval(&lift(x))
    }

    /// `grad psi^j(x) = p_j grad psi(l_j x)`, blockwise `phi'(x_k)`.
    pub fn grad_j(&self, x: &DyadicPoint) -> Result<DyadicPoint> {
        self.check(&lift(x))?;
        Ok(x.map_blocks(|a| self.dphi_block(a)))
    }
}
