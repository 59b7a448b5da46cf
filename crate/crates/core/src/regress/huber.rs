use nalgebra::{DMatrix, DVector};

use super::ols::{checked_design, RCOND_LIMIT};
use super::{check_shapes, FitSpec, LinearModel};
use crate::dataset::Targets;
use crate::error::{Error, Result};
use crate::linalg::{median, ScaledDesign};

/// Consistency constant of the MAD under the Gaussian.
const MAD_CONSTANT: f64 = 0.6745;

/// Huber M-estimation by iteratively reweighted least squares, started from OLS.
///
/// The scale is re-estimated every iteration as `median(|r|) / 0.6745`. Iteration stops
/// when the relative change of (intercept, coefficients) falls below `spec.tol`.
pub fn fit_huber(x: &DMatrix<f64>, y: &Targets, spec: &FitSpec) -> Result<LinearModel> {
    check_shapes(x, y)?;
    let start = checked_design(x)?;
    let mut intercepts = [0.0; 2];
    let mut coefficients = DMatrix::zeros(x.ncols(), 2);
    for l in 0..2 {
        let target: DVector<f64> = y.column(l).into_owned();
        let (a, b) = irls(x, &target, &start, spec)?;
        intercepts[l] = a;
        coefficients.set_column(l, &b);
    }
    Ok(LinearModel::from_parts(intercepts, coefficients, spec.clone()))
}

fn irls(x: &DMatrix<f64>, y: &DVector<f64>, start: &ScaledDesign, spec: &FitSpec) -> Result<(f64, DVector<f64>)> {
    let (mut alpha, mut beta) = start.solve_filtered(y, 0.0);
    let y_scale = y.amax().max(1.0);
    for _ in 0..spec.max_iter {
        let resid = (y - x * &beta).add_scalar(-alpha);
        let abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        let sigma = median(&abs) / MAD_CONSTANT;
        if !(sigma > 1e-14 * y_scale) {
            // residuals vanish: every weight is 1 and OLS is the optimum
            return Ok((alpha, beta));
        }
        let cutoff = spec.huber_k * sigma;
        let weights = DVector::from_iterator(
            abs.len(),
            abs.iter().map(|&r| if r <= cutoff { 1.0 } else { cutoff / r }),
        );
        let (a_new, b_new) = weighted_least_squares(x, y, &weights)?;
        let diff = ((a_new - alpha).powi(2) + (&b_new - &beta).norm_squared()).sqrt();
        let size = (alpha.powi(2) + beta.norm_squared()).sqrt().max(f64::MIN_POSITIVE);
        alpha = a_new;
        beta = b_new;
        if diff / size < spec.tol {
            return Ok((alpha, beta));
        }
    }
    Err(Error::NonConvergence {
        iterations: spec.max_iter,
    })
}

/// Weighted least squares with an unweighted-penalty-free intercept.
fn weighted_least_squares(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let (n, k) = x.shape();
    let total = w.sum();
    let x_mean = DVector::from_fn(k, |j, _| x.column(j).dot(w) / total);
    let y_mean = y.dot(w) / total;
    let sw = w.map(f64::sqrt);
    let xw = DMatrix::from_fn(n, k, |i, j| sw[i] * (x[(i, j)] - x_mean[j]));
    let yw = DVector::from_fn(n, |i, _| sw[i] * (y[i] - y_mean));
    let design = ScaledDesign::new(&xw);
    let rcond = design.gram_rcond();
    if rcond < RCOND_LIMIT {
        return Err(Error::Singular {
            rcond,
            rows: n,
            columns: k,
        });
    }
    // xw and yw are already centered in the weighted sense, so only the slope is used.
    let (_, beta) = design.solve_filtered(&yw, 0.0);
    Ok((y_mean - x_mean.dot(&beta), beta))
}
