//! Sharp `L^p` constants for the operators `aI + bH` and the numerical
//! machinery around them.
//!
//! The crate is organised by task:
//!
//! - [`constants`]: the Pichorides and Essén constants and the sharp constant
//!   `B_p` (three equivalent trigonometric maximisations, cross-checked).
//! - [`majorant`]: the subharmonic majorant `G` in its closed forms, together
//!   with a grid certifier for majorisation, sub-mean-value and curvature
//!   conditions.
//! - [`sequence_ops`]: the discrete Hilbert kernel `D`, the kernel `J`,
//!   nonnegative averaging kernels, convolutions on finitely supported
//!   sequences and grid functions, and dilation experiments.
//! - [`norm_search`]: lower bounds for `l^p` operator norms by multi-start
//!   ascent, and `l^2` symbol oracles.
//! - [`disc_martingale`]: Brownian motion killed on a circle, analytic test
//!   functions, Monte Carlo estimates and the exact circle-average oracle.
//!
//! [`optimize`] and [`quadrature`] hold the one-dimensional search and
//! integration routines the other modules share.

pub mod constants;
pub mod disc_martingale;
pub mod error;
pub mod majorant;
pub mod norm_search;
pub mod numeric;
pub mod optimize;
pub mod quadrature;
pub mod sequence_ops;

pub use error::{Error, Result};
