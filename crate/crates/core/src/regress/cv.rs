use nalgebra::{DMatrix, DVector};

use super::lasso::coordinate_descent;
use super::{check_shapes, FitSpec, Method};
use crate::dataset::Targets;
use crate::error::{Error, Result};
use crate::linalg::{CenteredColumns, ScaledDesign};
use crate::select::assign_folds;

/// Picks, per target, the grid λ with the smallest k-fold cross-validated MSE.
///
/// Ties go to the earlier grid entry. Deterministic for a given seed.
pub fn select_lambda(
    x: &DMatrix<f64>,
    y: &Targets,
    method: Method,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    spec: &FitSpec,
) -> Result<[f64; 2]> {
    check_shapes(x, y)?;
    if !method.is_penalized() {
        return Err(Error::InvalidArgument(format!("{method} has no penalty to select")));
    }
    if lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if lambda_grid.len() == 1 {
        return Ok([lambda_grid[0]; 2]);
    }
    let n = x.nrows();
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "cannot make {folds} folds from {n} rows"
        )));
    }
    let assignment = assign_folds(n, folds, seed);
    let mut sse = vec![[0.0_f64; 2]; lambda_grid.len()];
    let mut first_error = None;
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        let x_train = x.select_rows(&train);
        let x_test = x.select_rows(&test);
        let y_train = y.select_rows(&train);
        let y_test = y.select_rows(&test);
        let errors = match method {
            Method::Ridge => ridge_fold_errors(&x_train, &y_train, &x_test, &y_test, lambda_grid),
            _ => lasso_fold_errors(&x_train, &y_train, &x_test, &y_test, lambda_grid, spec),
        };
        for (acc, e) in sse.iter_mut().zip(errors) {
            for l in 0..2 {
                match &e[l] {
                    Ok(v) => acc[l] += v,
                    Err(err) => {
                        acc[l] = f64::INFINITY;
                        if first_error.is_none() {
                            first_error = Some(err.to_string());
                        }
                    }
                }
            }
        }
    }
    let mut chosen = [f64::NAN; 2];
    for l in 0..2 {
        let mut best = f64::INFINITY;
        for (lambda, acc) in lambda_grid.iter().zip(&sse) {
            if acc[l] < best {
                best = acc[l];
                chosen[l] = *lambda;
            }
        }
        if !best.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "every lambda failed in cross-validation: {}",
                first_error.clone().unwrap_or_default()
            )));
        }
    }
    Ok(chosen)
}

type FoldErrors = Vec<[Result<f64>; 2]>;

fn squared_error(x_test: &DMatrix<f64>, y_test: &DVector<f64>, alpha: f64, beta: &DVector<f64>) -> f64 {
    (y_test - x_test * beta).add_scalar(-alpha).norm_squared()
}

fn ridge_fold_errors(
    x_train: &DMatrix<f64>,
    y_train: &Targets,
    x_test: &DMatrix<f64>,
    y_test: &Targets,
    grid: &[f64],
) -> FoldErrors {
    let design = ScaledDesign::new(x_train);
    grid.iter()
        .map(|&lambda| {
            [0, 1].map(|l| {
                let target: DVector<f64> = y_train.column(l).into_owned();
                let (a, b) = design.solve_filtered(&target, lambda);
                Ok(squared_error(x_test, &y_test.column(l).into_owned(), a, &b))
            })
        })
        .collect()
}

/// Solves the grid from the largest λ down, warm-starting each fit from the previous one.
fn lasso_fold_errors(
    x_train: &DMatrix<f64>,
    y_train: &Targets,
    x_test: &DMatrix<f64>,
    y_test: &Targets,
    grid: &[f64],
    spec: &FitSpec,
) -> FoldErrors {
    let cols = CenteredColumns::new(x_train);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut out: Vec<[Result<f64>; 2]> = (0..grid.len()).map(|_| [Ok(0.0), Ok(0.0)]).collect();
    for l in 0..2 {
        let target: DVector<f64> = y_train.column(l).into_owned();
        let mean = target.mean();
        let yc = target.add_scalar(-mean);
        let test_col: DVector<f64> = y_test.column(l).into_owned();
        let mut warm = DVector::zeros(cols.z.ncols());
        for &g in &order {
            out[g][l] = coordinate_descent(&cols.z, &yc, grid[g], warm.clone(), spec.max_iter, spec.tol).map(|b| {
                let (a, beta) = cols.unscale(mean, &b);
                warm = b;
                squared_error(x_test, &test_col, a, &beta)
            });
        }
    }
    out
}
