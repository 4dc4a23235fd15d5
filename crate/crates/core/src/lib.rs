//! Numerical laboratory for the one-dimensional stochastic Burgers equation
//! with transport noise,
//!
//! ```text
//! du + u u_x dt = mu u_xx dt + sigma u_x dB(t),
//! ```
//!
//! and the deterministic wave patterns it is compared against.
//!
//! The crate is organised bottom-up:
//!
//! * [`waves`]: rarefaction, smoothed rarefaction and viscous shock profiles.
//! * [`deterministic`]: grids, fields and two independent solvers for the
//!   viscous Burgers equation (Cole–Hopf quadrature and a conservative
//!   finite-difference scheme).
//! * [`spde`]: Brownian paths, Euler–Maruyama and Brownian-shift schemes, the
//!   H¹ cut-off projection and the trajectory driver.
//! * [`analysis`]: norms, energy diagnostics, power-law fitting and the
//!   area-inequality toolkit.
//! * [`experiments`]: Monte Carlo ensembles for rarefaction stability, shock
//!   instability and scheme cross-validation.

pub mod analysis;
pub mod deterministic;
mod error;
pub mod experiments;
pub mod quadrature;
pub mod spde;
pub mod waves;

pub use analysis::{AreaPremises, AreaReport, RateFit, SampledFunction};
pub use deterministic::{Field, Grid, ViscousParams};
pub use error::{Error, Result};
pub use experiments::{EnsembleConfig, EnsembleStats};
pub use spde::{BrownianPath, CutoffParam, NoiseParams, Scheme};
pub use waves::{RiemannData, ShockProfileParams};
