//! Finite-dimensional machinery for Hamilton–Jacobi equations posed on the
//! cone of increasing paths of positive semi-definite matrices.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`] – symmetric matrices, spectral calculus, PSD projection.
//! * [`geometry`] – the dyadic spaces `L^j`, step paths, projections and lifts,
//!   cone membership and metric projection onto the cone.
//! * [`model`] – nonlinearities, their regularizations, the functional `H`
//!   with its dyadic and mollified versions, initial conditions and their
//!   extensions off the cone.
//! * [`solver`] – grid solvers for the viscous equation, vanishing-viscosity
//!   ladders, Hopf–Lax / Hopf formulas and characteristics.
//! * [`adjoint`] – the backward adjoint transport equation and the averaged
//!   envelope measures built from it.
//! * [`envelope`] – envelope-representation residuals and convergence studies.
//!
//! Without the default `std` feature the crate is `no_std` (it still needs
//! `alloc`); `std` only switches on data-parallel node updates.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adjoint;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub(crate) mod par;
pub mod solver;

pub use error::{Error, Result};

/// Membership tolerance for the PSD cone under floating point.
pub const TAU_CONE: f64 = 1e-10;
