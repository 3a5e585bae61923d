//! Spectral laboratory for the third-order-in-time evolution equation
//!
//! ```text
//! u_ttt + (-Δ)^σ u + η (-Δ)^{σ/3} u_tt + η (-Δ)^{2σ/3} u_t = |u|^p
//! ```
//!
//! on R^n (radial frequency quadrature) and on periodic tori (pseudospectral).
//! The crate provides:
//!
//! * closed-form exponent tables and regime classification ([`model`]),
//! * torus grids, FFTs, fractional-Laplacian multipliers and norms ([`spectral`]),
//! * the three Fourier-space fundamental kernels in every damping regime,
//!   with stable divided-difference evaluation near confluent roots ([`kernels`]),
//! * linear evolution, asymptotic profiles and decay diagnostics ([`propagator`]),
//! * quadrature oracles for the decay lemmas and rate fitting ([`estimates`]),
//! * a mild-solution integrator with blow-up and lifespan detection ([`nonlinear`]),
//! * test functions and blow-up functionals ([`functionals`]),
//! * experiment orchestration and report persistence ([`lab`]).

pub mod error;
pub mod estimates;
pub mod functionals;
pub mod kernels;
pub mod lab;
pub mod model;
pub mod nonlinear;
pub mod propagator;
pub mod quad;
pub mod rational;
pub mod spectral;
pub mod util;

pub use error::{Error, Result};
pub use model::{Extended, ModelParams};
pub use spectral::{Field, SpectralField, TorusGrid};
