use nalgebra::{DMatrix, DVector};

use super::{check_shapes, FitSpec, LinearModel};
use crate::dataset::Targets;
use crate::error::{Error, Result};
use crate::linalg::CenteredColumns;

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Signed support of `b`: the nonzero indices and their signs.
fn support(b: &DVector<f64>) -> Vec<(usize, bool)> {
    b.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, *v > 0.0))
        .collect()
}

fn objective(z: &DMatrix<f64>, yc: &DVector<f64>, lambda: f64, b: &DVector<f64>) -> f64 {
    (yc - z * b).norm_squared() / (2.0 * z.nrows() as f64) + lambda * b.lp_norm(1)
}

/// Direction to move the support coefficients in, on the face given by the signed
/// support of `b`, where the objective is a smooth quadratic. If the support columns
/// are dependent the objective falls linearly along `−P_null s`, which leaves the fit
/// unchanged; otherwise the direction points at the face minimizer
/// `Z_Aᵀ(y − Z_A b_A)/n = λ s_A`.
fn face_direction(
    z: &DMatrix<f64>,
    yc: &DVector<f64>,
    lambda: f64,
    pattern: &[(usize, bool)],
    ba: &DVector<f64>,
) -> Option<(DVector<f64>, bool)> {
    let n = z.nrows();
    let a = pattern.len();
    let za = DMatrix::from_fn(n, a, |i, c| z[(i, pattern[c].0)]);
    let svd = za.svd(true, true);
    let (u, vt) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&v| v > 1e-9 * smax).count();
    if rank == 0 {
        return None;
    }
    let (u, vt) = (u.columns(0, rank), vt.rows(0, rank));
    let signs = DVector::from_fn(a, |c, _| if pattern[c].1 { 1.0 } else { -1.0 });
    let vts = vt * &signs;
    let null_part = &signs - vt.transpose() * &vts;
    if null_part.norm() > 1e-9 * signs.norm() {
        return Some((-null_part, true));
    }
    // b = V (S⁻¹ Uᵀ y − n λ S⁻² Vᵀ s) plus the current null-space component
    let uty = u.transpose() * yc;
    let w = DVector::from_fn(rank, |c, _| {
        uty[c] / sv[c] - n as f64 * lambda * vts[c] / (sv[c] * sv[c])
    });
    let target = vt.transpose() * w + (ba - vt.transpose() * (vt * ba));
    Some((target - ba, false))
}

/// Active-set moves from `b` along face directions. A move stops where a coordinate
/// would cross zero; that coordinate is dropped and the smaller face is tried. Stops
/// at a face minimizer. The result is kept only if the objective went down.
fn face_step(z: &DMatrix<f64>, yc: &DVector<f64>, lambda: f64, b: &mut DVector<f64>) -> bool {
    let start = b.clone();
    let before = objective(z, yc, lambda, b);
    let mut pattern = support(b);
    while !pattern.is_empty() {
        let ba = DVector::from_iterator(pattern.len(), pattern.iter().map(|&(j, _)| b[j]));
        let Some((dir, unbounded)) = face_direction(z, yc, lambda, &pattern, &ba) else {
            break;
        };
        let mut t = if unbounded { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for (c, &(_, pos)) in pattern.iter().enumerate() {
            if (dir[c] < 0.0) == pos && dir[c] != 0.0 {
                let tc = -ba[c] / dir[c];
                if tc < t {
                    t = tc;
                    blocking = Some(c);
                }
            }
        }
        let Some(c) = blocking else {
            if !unbounded {
                for (c, &(j, _)) in pattern.iter().enumerate() {
                    b[j] += dir[c];
                }
            }
            break;
        };
        for (i, &(j, _)) in pattern.iter().enumerate() {
            b[j] += t * dir[i];
        }
        b[pattern[c].0] = 0.0;
        pattern.remove(c);
    }
    if objective(z, yc, lambda, b) < before {
        true
    } else {
        *b = start;
        false
    }
}

/// Cyclic coordinate descent for `(1/2n)‖y − Zb‖² + λ‖b‖₁` on centered `y`.
///
/// After each full sweep the nonzero coordinates are cycled alone. Once their sign
/// pattern holds steady an active-set step jumps to the minimizer on that support,
/// which skips the slow tail of descent on collinear columns. Converged when the
/// largest coordinate change of a full sweep is below `tol`; every sweep counts
/// towards `max_iter`.
pub(crate) fn coordinate_descent(
    z: &DMatrix<f64>,
    yc: &DVector<f64>,
    lambda: f64,
    start: DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<DVector<f64>> {
    const CHECK_EVERY: usize = 5;
    let n = z.nrows() as f64;
    let k = z.ncols();
    // Same expression as `lambda_max`, so λ ≥ λ_max gives exact zeros despite rounding.
    if lambda >= (z.transpose() * yc).amax() / n {
        return Ok(DVector::zeros(k));
    }
    let col_sq: Vec<f64> = (0..k).map(|j| z.column(j).norm_squared() / n).collect();
    let mut b = start;
    let mut resid = yc - z * &b;
    let all: Vec<usize> = (0..k).collect();
    let sweep = |b: &mut DVector<f64>, resid: &mut DVector<f64>, coords: &[usize]| {
        let mut max_delta = 0.0_f64;
        for &j in coords {
            if col_sq[j] == 0.0 {
                continue;
            }
            let zj = z.column(j);
            let rho = zj.dot(resid) / n + b[j] * col_sq[j];
            let updated = soft_threshold(rho, lambda) / col_sq[j];
            let delta = updated - b[j];
            if delta != 0.0 {
                resid.axpy(-delta, &zj, 1.0);
                b[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    };
    let mut tried: Vec<(usize, bool)> = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        if sweep(&mut b, &mut resid, &all) < tol {
            return Ok(b);
        }
        let active: Vec<usize> = (0..k).filter(|&j| b[j] != 0.0).collect();
        let mut pattern = support(&b);
        let mut count = 0;
        while iterations < max_iter {
            iterations += 1;
            if sweep(&mut b, &mut resid, &active) < tol {
                break;
            }
            count += 1;
            if count % CHECK_EVERY == 0 {
                let now = support(&b);
                if now == pattern && now != tried {
                    tried = now.clone();
                    if face_step(z, yc, lambda, &mut b) {
                        resid = yc - z * &b;
                        break;
                    }
                }
                pattern = now;
            }
        }
    }
    Err(Error::NonConvergence { iterations: max_iter })
}

/// Smallest λ at which every coefficient is zero: `max_j |X̃ⱼᵀ(y − ȳ)| / n`.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let cols = CenteredColumns::new(x);
    let yv = DVector::from_column_slice(y);
    let yc = yv.add_scalar(-yv.mean());
    (cols.z.transpose() * yc).amax() / x.nrows() as f64
}

/// Lasso with one penalty shared by both targets and default iteration settings.
pub fn fit_lasso(x: &DMatrix<f64>, y: &Targets, lambda: f64) -> Result<LinearModel> {
    fit_lasso_per_target(x, y, [lambda; 2], &FitSpec::lasso(vec![lambda]))
}

pub(crate) fn fit_lasso_per_target(
    x: &DMatrix<f64>,
    y: &Targets,
    lambdas: [f64; 2],
    spec: &FitSpec,
) -> Result<LinearModel> {
    check_shapes(x, y)?;
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lasso lambda must be non-negative, got {lambdas:?}"
        )));
    }
    let cols = CenteredColumns::new(x);
    let mut intercepts = [0.0; 2];
    let mut coefficients = DMatrix::zeros(x.ncols(), 2);
    for l in 0..2 {
        let target: DVector<f64> = y.column(l).into_owned();
        let mean = target.mean();
        let yc = target.add_scalar(-mean);
        let start = DVector::zeros(cols.z.ncols());
        let b = coordinate_descent(&cols.z, &yc, lambdas[l], start, spec.max_iter, spec.tol)?;
        let (a, beta) = cols.unscale(mean, &b);
        intercepts[l] = a;
        coefficients.set_column(l, &beta);
    }
    let mut model = LinearModel::from_parts(intercepts, coefficients, spec.clone());
    model.chosen_lambda = Some(lambdas);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::fit_ols;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn single_coordinate_closed_form() {
        // x already centered with unit norm, so internal scaling is the identity.
        let raw = [1.0, -2.0, 0.5, 3.0, -2.5];
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x = DMatrix::from_fn(5, 1, |i, _| raw[i] / norm);
        let yv = [0.3, -1.0, 0.8, 1.9, -1.6];
        let ymean = yv.iter().sum::<f64>() / 5.0;
        let y = DMatrix::from_fn(5, 2, |i, l| if l == 0 { yv[i] } else { 2.0 * yv[i] });
        let lambda = 0.05;
        let m = fit_lasso(&x, &y, lambda).unwrap();
        let n = 5.0;
        for l in 0..2 {
            let scale = if l == 0 { 1.0 } else { 2.0 };
            let xty: f64 = (0..5).map(|i| x[(i, 0)] * (scale * (yv[i] - ymean))).sum();
            let xtx: f64 = (0..5).map(|i| x[(i, 0)].powi(2)).sum();
            let expected = soft_threshold(xty / n, lambda) / (xtx / n);
            assert!((m.coefficients[(0, l)] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_above_lambda_max_and_ols_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DMatrix::from_fn(60, 5, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(60, 2, |i, l| {
            x[(i, 0)] * 2.0 - x[(i, 3)] * (l as f64 + 1.0) + rng.random_range(-0.2..0.2)
        });
        let y0: Vec<f64> = y.column(0).iter().copied().collect();
        let y1: Vec<f64> = y.column(1).iter().copied().collect();
        let lmax = lambda_max(&x, &y0).max(lambda_max(&x, &y1));
        let m = fit_lasso(&x, &y, lmax).unwrap();
        assert!(m.coefficients.iter().all(|&b| b == 0.0));
        let m = fit_lasso(&x, &y, 0.0).unwrap();
        let o = fit_ols(&x, &y).unwrap();
        assert!((&m.coefficients - &o.coefficients).amax() < 1e-4);
    }

    #[test]
    fn wide_design_small_lambda_meets_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let base = DMatrix::from_fn(30, 5, |_, _| rng.random_range(-1.0..1.0));
        // 80 nearly collinear columns built from 5 underlying ones.
        let x = DMatrix::from_fn(30, 80, |i, j| base[(i, j % 5)] + 1e-3 * rng.random_range(-1.0..1.0));
        let yv = DVector::from_fn(30, |i, _| {
            base[(i, 0)] - base[(i, 2)] + 0.1 * rng.random_range(-1.0..1.0)
        });
        let cols = CenteredColumns::new(&x);
        let yc = yv.add_scalar(-yv.mean());
        let (lambda, tol) = (1e-5, 1e-8);
        let b = coordinate_descent(&cols.z, &yc, lambda, DVector::zeros(80), 100_000, tol).unwrap();
        let grad = cols.z.transpose() * (&yc - &cols.z * &b) / 30.0;
        for j in 0..80 {
            if b[j] != 0.0 {
                assert!(
                    (grad[j] - lambda * b[j].signum()).abs() <= 10.0 * tol,
                    "active {j}: {}",
                    grad[j]
                );
            } else {
                assert!(grad[j].abs() <= lambda + 10.0 * tol, "inactive {j}: {}", grad[j]);
            }
        }
        assert!(b.iter().filter(|v| **v != 0.0).count() < 30);
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = DMatrix::from_fn(30, 8, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-1.0..1.0));
        let mut spec = FitSpec::lasso(vec![1e-6]);
        spec.max_iter = 1;
        spec.tol = 1e-14;
        assert!(matches!(
            fit_lasso_per_target(&x, &y, [1e-6; 2], &spec),
            Err(Error::NonConvergence { iterations: 1 })
        ));
    }
}
