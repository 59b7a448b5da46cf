use nalgebra::{DMatrix, DVector};

use super::{check_shapes, FitSpec, LinearModel};
use crate::dataset::Targets;
use crate::error::{Error, Result};
use crate::linalg::ScaledDesign;

/// Ridge regression with one penalty shared by both targets.
///
/// Solves `(X̃ᵀX̃ + λI) β̃ = X̃ᵀỸ` where X̃ is centered with unit-norm columns.
pub fn fit_ridge(x: &DMatrix<f64>, y: &Targets, lambda: f64) -> Result<LinearModel> {
    fit_ridge_per_target(x, y, [lambda; 2])
}

pub fn fit_ridge_per_target(x: &DMatrix<f64>, y: &Targets, lambdas: [f64; 2]) -> Result<LinearModel> {
    check_shapes(x, y)?;
    if lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda must be positive, got {lambdas:?}"
        )));
    }
    let design = ScaledDesign::new(x);
    Ok(solve_prepared(&design, y, lambdas))
}

pub(crate) fn solve_prepared(design: &ScaledDesign, y: &Targets, lambdas: [f64; 2]) -> LinearModel {
    let mut intercepts = [0.0; 2];
    let mut coefficients = DMatrix::zeros(design.columns, 2);
    for l in 0..2 {
        let target: DVector<f64> = y.column(l).into_owned();
        let (a, b) = design.solve_filtered(&target, lambdas[l]);
        intercepts[l] = a;
        coefficients.set_column(l, &b);
    }
    let mut model = LinearModel::from_parts(intercepts, coefficients, FitSpec::ridge(vec![lambdas[0]]));
    model.chosen_lambda = Some(lambdas);
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::fit_ols;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(n: usize, k: usize, seed: u64) -> (DMatrix<f64>, Targets) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(n, 2, |i, l| {
            (0..k).map(|j| x[(i, j)] * (j as f64 - l as f64)).sum::<f64>() + rng.random_range(-0.1..0.1)
        });
        (x, y)
    }

    #[test]
    fn tiny_lambda_matches_ols() {
        let (x, y) = problem(50, 6, 11);
        let r = fit_ridge(&x, &y, 1e-10).unwrap();
        let o = fit_ols(&x, &y).unwrap();
        assert!((&r.coefficients - &o.coefficients).amax() < 1e-6);
        assert!((r.intercepts[0] - o.intercepts[0]).abs() < 1e-6);
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let (x, y) = problem(50, 6, 12);
        let r = fit_ridge(&x, &y, 1e6).unwrap();
        let o = fit_ols(&x, &y).unwrap();
        for l in 0..2 {
            assert!(r.coefficients.column(l).norm() < 1e-3 * o.coefficients.column(l).norm());
        }
    }

    #[test]
    fn norm_decreases_with_lambda() {
        let (x, y) = problem(40, 10, 13);
        let mut last = [f64::INFINITY; 2];
        for lambda in [1e-4, 1e-2, 1.0, 10.0, 1e3] {
            let r = fit_ridge(&x, &y, lambda).unwrap();
            for l in 0..2 {
                let norm = r.coefficients.column(l).norm();
                assert!(norm <= last[l]);
                last[l] = norm;
            }
        }
    }

    #[test]
    fn handles_more_columns_than_rows() {
        let (x, y) = problem(20, 40, 14);
        let r = fit_ridge(&x, &y, 0.5).unwrap();
        assert!(r.coefficients.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_non_positive_lambda() {
        let (x, y) = problem(20, 3, 15);
        assert!(fit_ridge(&x, &y, 0.0).is_err());
    }
}
