use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operands of incompatible level or matrix dimension.
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A step path violating its structural invariants.
    InvalidPath(&'static str),
    /// An iterative method hit its iteration cap.
    IterationLimit {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// An optimizer stopped before reaching its tolerance.
    OptimizerStall {
        what: &'static str,
        best: f64,
        gap: f64,
    },
    /// A model failed one of its admissibility probes.
    Admissibility(String),
    /// An argument outside the domain of the operation.
    Domain(&'static str),
    /// Invalid run parameters (grid, ladders, probes).
    Config(String),
    /// A non-finite value appeared in a time-stepper.
    BlowUp { step: usize },
    /// The adjoint density went negative.
    NegativeDensity { step: usize, value: f64 },
    /// The adjoint density lost or gained mass.
    MassDrift { step: usize, drift: f64 },
    /// Too much of a measure lies off the cone to renormalize it.
    Degenerate { off_cone_mass: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                what,
                expected,
                found,
            } => write!(
                f,
                "shape mismatch in {what}: expected {expected}, found {found}"
            ),
            Error::InvalidPath(msg) => write!(f, "invalid step path: {msg}"),
            Error::IterationLimit {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::OptimizerStall { what, best, gap } => {
                write!(
                    f,
                    "{what} stalled: best value {best:.6e}, gap estimate {gap:.3e}"
                )
            }
            Error::Admissibility(msg) => write!(f, "model is not admissible: {msg}"),
            Error::Domain(msg) => write!(f, "argument outside domain: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::BlowUp { step } => write!(f, "non-finite value at time step {step}"),
            Error::NegativeDensity { step, value } => {
                write!(f, "adjoint density {value:.3e} below zero at step {step}")
            }
            Error::MassDrift { step, drift } => {
                write!(f, "adjoint mass drifted by {drift:.3e} at step {step}")
            }
            Error::Degenerate { off_cone_mass } => write!(
                f,
                "measure is degenerate: off-cone mass {off_cone_mass:.4} is at least 0.5"
            ),
        }
    }
}

impl core::error::Error for Error {}
