//! Fourier-Bessel spectral simulation of the 1-corotational harmonic map flow
//! from the unit disc to the sphere, driven by additive trace-class noise.
//!
//! The colatitude `h(t, r)` solves `dh = (Ah + b(r, h)) dt + dw` with
//! `A = ∂rr + ∂r/r - 1/r²` and `b(r, h) = (2h - sin 2h)/(2r²)`. Fields are
//! expanded in the Dirichlet eigenfunctions `e_k = c_k J1(x_k r)` of `A`.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod blowup;
pub mod dynamics;
pub mod error;
pub mod modal;
pub mod noise;
pub mod scalar;
pub mod solver;
pub mod timequad;

pub use error::{Result, ShmfError};
pub use scalar::Real;

pub type EigenBasis64 = bessel::EigenBasis<f64>;
pub type ModalField64 = modal::ModalField<f64>;
pub type NoiseSpectrum64 = noise::NoiseSpectrum<f64>;
pub type OuPath64 = noise::OuPath<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type Trajectory64 = solver::Trajectory<f64>;
pub type SubsolutionParams64 = blowup::SubsolutionParams<f64>;
pub type ControlPath64 = blowup::ControlPath<f64>;
