//! Simulation and numerical verification for one-dimensional diffusions with
//! two-state Markov regime switching:
//!
//! ```text
//! dX_t = b(X_t, Z_t) dt + dW_t,   Z_t in {plus, minus}
//! ```
//!
//! * [`model`]: parameters, validation, transience condition and constants.
//! * [`skeleton`]: switching times of `Z` and cycle statistics.
//! * [`path`]: exact and Euler–Maruyama paths of `X` on a fixed skeleton.
//! * [`analytics`]: closed-form MGFs, Chernoff optimisation, geometric bounds.
//! * [`montecarlo`]: reproducible parallel estimation and verification runs.
//! * [`cli`]: run configurations, dispatch and report files.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod path;
pub mod rng;
pub mod skeleton;

pub use error::{Error, Result};
pub use model::{validate, ModelSpec, Regime, ValidatedModel};
pub use rng::{RandomSource, Stream};
