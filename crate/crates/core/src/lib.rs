//! Scalar-on-function regression of stellar parameters from windowed line spectra.
//!
//! Spectra are cut into line windows, each window is projected on a Fourier or cubic
//! B-spline basis, and the two targets (T* in kK and log10 Rt) are regressed on the
//! stacked coefficients with least squares, Huber, ridge or lasso fits. Basis sizes are
//! chosen on rotated five-fold splits and prediction intervals come from a residual
//! bootstrap.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod dataset;
pub mod error;
pub mod intervals;
mod linalg;
pub mod metrics;
pub mod regress;
pub mod select;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::trapezoid;
