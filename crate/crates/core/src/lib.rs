//! Strong and weak simulation of stochastic differential equations driven by
//! Brownian motion: path generation with matched refinements, Lévy-area
//! sampling, Itô/Stratonovich word algebra, one-step integrators, ensemble
//! error studies and a Feynman–Kac cross-check.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod fk;
pub mod levy;
pub mod mc;
pub mod model;
pub mod rng;
pub mod scheme;
pub mod stats;
pub mod wiener;

pub use error::{Result, SdeError};
pub use model::{ModelSpec, Payoff, SdeModel};
pub use rng::RngStream;
pub use scheme::{Scheme, SchemeKind};
pub use wiener::{PathBundle, PathKind};

/// Round-trip float formatting used by every CSV writer (17 significant digits).
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}
