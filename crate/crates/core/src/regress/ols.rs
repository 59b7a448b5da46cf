use nalgebra::{DMatrix, DVector};

use super::{check_shapes, FitSpec, LinearModel};
use crate::dataset::Targets;
use crate::error::{Error, Result};
use crate::linalg::ScaledDesign;

/// Reciprocal condition estimate of the scaled centered Gram matrix below which a
/// least-squares fit is refused.
pub(crate) const RCOND_LIMIT: f64 = 1e-12;

pub(crate) fn checked_design(x: &DMatrix<f64>) -> Result<ScaledDesign> {
    let (n, k) = x.shape();
    let design = ScaledDesign::new(x);
    let rcond = design.gram_rcond();
    if n <= k + 1 || rcond < RCOND_LIMIT {
        return Err(Error::Singular {
            rcond,
            rows: n,
            columns: k,
        });
    }
    Ok(design)
}

/// Ordinary least squares with an intercept per target.
pub fn fit_ols(x: &DMatrix<f64>, y: &Targets) -> Result<LinearModel> {
    check_shapes(x, y)?;
    let design = checked_design(x)?;
    let mut intercepts = [0.0; 2];
    let mut coefficients = DMatrix::zeros(x.ncols(), 2);
    for l in 0..2 {
        let target: DVector<f64> = y.column(l).into_owned();
        let (a, b) = design.solve_filtered(&target, 0.0);
        intercepts[l] = a;
        coefficients.set_column(l, &b);
    }
    Ok(LinearModel::from_parts(intercepts, coefficients, FitSpec::ols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::predict;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn noiseless_recovery() {
        let x = random(40, 6, 1);
        let beta = DMatrix::from_fn(6, 2, |i, l| (i as f64 + 1.0) * if l == 0 { 1.0 } else { -0.5 });
        let mut y = &x * &beta;
        for mut r in y.row_iter_mut() {
            r[0] += 10.0;
            r[1] += -2.0;
        }
        let m = fit_ols(&x, &y).unwrap();
        assert!((m.intercepts[0] - 10.0).abs() < 1e-8);
        assert!((m.intercepts[1] + 2.0).abs() < 1e-8);
        assert!((&m.coefficients - &beta).amax() < 1e-8);
    }

    #[test]
    fn hand_normal_equations_five_by_two() {
        // X = [[1,2],[2,1],[3,4],[4,3],[5,6]], y = [1,2,2,4,5]
        // Solved by hand via centered normal equations, Cramer's rule on the 2×2 system.
        let x = DMatrix::from_row_slice(5, 2, &[1., 2., 2., 1., 3., 4., 4., 3., 5., 6.]);
        let y1 = [1.0, 2.0, 2.0, 4.0, 5.0];
        let y = DMatrix::from_fn(5, 2, |i, l| if l == 0 { y1[i] } else { -y1[i] });
        let (xm0, xm1, ym) = (3.0, 3.2, 2.8);
        let mut s = [[0.0; 2]; 2];
        let mut r = [0.0; 2];
        for i in 0..5 {
            let c = [x[(i, 0)] - xm0, x[(i, 1)] - xm1];
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += c[a] * c[b];
                }
                r[a] += c[a] * (y1[i] - ym);
            }
        }
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let b0 = (r[0] * s[1][1] - s[0][1] * r[1]) / det;
        let b1 = (s[0][0] * r[1] - s[1][0] * r[0]) / det;
        let m = fit_ols(&x, &y).unwrap();
        assert!((m.coefficients[(0, 0)] - b0).abs() < 1e-10);
        assert!((m.coefficients[(1, 0)] - b1).abs() < 1e-10);
        assert!((m.coefficients[(0, 1)] + b0).abs() < 1e-10);
        assert!((m.intercepts[0] - (ym - b0 * xm0 - b1 * xm1)).abs() < 1e-10);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let x = random(60, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = DMatrix::from_fn(60, 2, |_, _| rng.random_range(-5.0..5.0));
        let m = fit_ols(&x, &y).unwrap();
        let resid = &y - predict(&m, &x).unwrap();
        let xc = DMatrix::from_fn(60, 8, |i, j| x[(i, j)] - x.column(j).mean());
        let g = xc.transpose() * &resid;
        let scale = (xc.transpose() * &y).amax();
        assert!(g.amax() < 1e-8 * scale);
        for l in 0..2 {
            assert!(resid.column(l).sum().abs() < 1e-9);
        }
    }

    #[test]
    fn identifiability_limit() {
        // 126 rows with 10 windows × 13 basis functions: more columns than rows.
        let x = random(126, 130, 5);
        let y = random(126, 2, 6);
        assert!(matches!(fit_ols(&x, &y), Err(Error::Singular { .. })));
        let x = random(126, 110, 5);
        assert!(fit_ols(&x, &y).is_ok());
    }

    #[test]
    fn collinear_columns_rejected() {
        let mut x = random(30, 3, 7);
        for i in 0..30 {
            x[(i, 2)] = 2.0 * x[(i, 0)] - x[(i, 1)];
        }
        let y = random(30, 2, 8);
        assert!(matches!(fit_ols(&x, &y), Err(Error::Singular { .. })));
    }
}
