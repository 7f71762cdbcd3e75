//! Numerical laboratory for the elliptic periodic traveling waves of the
//! modified Camassa–Holm equation
//!
//! ```text
//! u_t − u_txx = u u_xxx + 2 u_x u_xx − 3 u² u_x.
//! ```
//!
//! The crate builds the explicit dnoidal waves ([`wave`]), discretizes the
//! linearized operator and its Hamiltonian counterpart ([`linop`]), evaluates
//! stability indices ([`indices`]) and integrates the full and linearized
//! dynamics ([`evolve`]).
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the quoted tolerances assume.

pub mod cli;
pub mod elliptic;
pub mod error;
pub mod evolve;
pub mod field;
pub mod fourier;
pub mod indices;
pub mod linop;
pub mod num;
pub mod wave;

pub use error::{Error, Result};
pub use num::Real;

pub type Wave = wave::WaveParams<f64>;
pub type Grid = field::PeriodicGrid<f64>;
pub type Field = field::PeriodicField<f64>;
pub type Operator = linop::OperatorMatrix<f64>;
pub type Spectrum = linop::SpectralReport<f64>;
pub type IndexSample = indices::IndexSample<f64>;
pub type KreinReport = indices::KreinReport<f64>;
pub type RunReport = evolve::StabilityRunReport<f64>;
