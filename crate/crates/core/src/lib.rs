//! Pseudo-spectral simulation of the nonlocal thin film equation
//! `u_t = div(u^n grad (-Delta)^s u)` on Neumann boxes, with the regularized
//! approximation, its entropy and energy diagnostics, and numerical checks of
//! the nonlocal chain rule and the iteration lemmas used for support
//! estimates.

pub mod chainrule;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod iterlemmas;
pub mod model;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use spectral::{Grid, QuadratureSpec, SpectralField};
