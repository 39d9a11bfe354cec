//! Spectra of high-dimensional sample correlation matrices.
//!
//! The crate builds the data model `X = U X̃` with a population correlation
//! matrix `T = U Uᵀ`, forms the sample correlation matrix `R = Y Yᵀ` from the
//! self-normalized rows `Y`, and compares its empirical spectral distribution
//! with the classical and generalized Marčenko–Pastur limits. It also
//! evaluates the resolvent quadratic form `W_n(z)` that decides whether the
//! classical limit holds, and the self-normalized moments `n E[Y₁₁⁴]`,
//! `n E[Y₁₁ Y₁₂]` through both Monte Carlo and Laplace-transform integrals.
//!
//! Modules, bottom-up:
//!
//! * [`distributions`]: entry laws and their Laplace profiles
//! * [`population`]: `T`, `U`, index sets and assumption reports
//! * [`ensemble`]: one realization of `X̃, X, S, R, Y`
//! * [`spectra`]: symmetric eigensolver and ESD functionals
//! * [`limit_laws`]: Marčenko–Pastur law and the generalized fixed-point solver
//! * [`diagnostics`]: `W_n(z)`, master-equation residuals, moment estimators
//! * [`harness`]: config-driven experiments and their output files

// NaN inputs must fail range checks, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod distributions;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod limit_laws;
pub mod measure;
pub mod population;
pub mod quadrature;
pub mod rng;
pub mod spectra;
pub mod stats;

pub use distributions::{DistributionKind, DistributionSpec, LaplaceProfile};
pub use ensemble::SampleEnsemble;
pub use error::{Error, Result};
pub use limit_laws::{LsdSolution, MpLaw};
pub use measure::DiscreteMeasure;
pub use population::{ModelSpec, PopulationModel};
pub use rng::StreamKey;
pub use spectra::EmpiricalSpectrum;

pub use num_complex::Complex64;

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
