//! Small dense helpers shared by the projection and regression code.

use nalgebra::{DMatrix, DVector, SVD};

/// Trapezoidal rule on a (possibly non-uniform) sorted grid.
pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xs, fs)| 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1]))
        .sum()
}

/// Reciprocal 2-norm condition number `s_min / s_max` from singular values.
pub(crate) fn reciprocal_condition(singular_values: &DVector<f64>) -> f64 {
    let max = singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let min = singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// [`CenteredColumns`] together with the thin SVD of the scaled matrix.
///
/// Solving in the scaled space and mapping back gives estimates that do not depend on
/// the units of the predictors; the intercept is recovered from the means.
pub(crate) struct ScaledDesign {
    pub means: DVector<f64>,
    /// Euclidean norm of each centered column; zero for constant columns.
    pub scales: DVector<f64>,
    pub svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Indices of the columns that were kept (nonzero scale).
    pub active: Vec<usize>,
    pub rows: usize,
    pub columns: usize,
}

const SCALE_FLOOR: f64 = 1e-300;

/// Centered copy of `x` restricted to non-constant columns, each scaled to unit norm.
pub(crate) struct CenteredColumns {
    pub means: DVector<f64>,
    pub scales: DVector<f64>,
    pub active: Vec<usize>,
    pub z: DMatrix<f64>,
}

impl CenteredColumns {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let k = x.ncols();
        let means = DVector::from_fn(k, |j, _| x.column(j).mean());
        let mut scales = DVector::zeros(k);
        for j in 0..k {
            let m = means[j];
            scales[j] = x.column(j).iter().map(|v| (v - m).powi(2)).sum::<f64>().sqrt();
        }
        let active: Vec<usize> = (0..k).filter(|&j| scales[j] > SCALE_FLOOR).collect();
        let z = DMatrix::from_fn(n, active.len(), |i, c| {
            let j = active[c];
            (x[(i, j)] - means[j]) / scales[j]
        });
        CenteredColumns {
            means,
            scales,
            active,
            z,
        }
    }

    /// Maps coefficients over the active scaled columns back to original units.
    pub fn unscale(&self, y_mean: f64, scaled: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut beta = DVector::zeros(self.means.len());
        for (c, &j) in self.active.iter().enumerate() {
            beta[j] = scaled[c] / self.scales[j];
        }
        let intercept = y_mean - self.means.dot(&beta);
        (intercept, beta)
    }
}

impl ScaledDesign {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let cols = CenteredColumns::new(x);
        let svd = SVD::new(cols.z.clone(), true, true);
        ScaledDesign {
            means: cols.means,
            scales: cols.scales,
            svd,
            active: cols.active,
            rows: x.nrows(),
            columns: x.ncols(),
        }
    }

    /// Reciprocal condition estimate of the scaled Gram matrix `ZᵀZ`.
    pub fn gram_rcond(&self) -> f64 {
        if self.active.len() < self.columns || self.columns + 1 > self.rows {
            return 0.0;
        }
        reciprocal_condition(&self.svd.singular_values).powi(2)
    }

    /// Solves in scaled space with singular-value filter `s / (s² + lambda)` and maps
    /// the coefficients back to original units. Returns (intercept, coefficients).
    pub fn solve_filtered(&self, y: &DVector<f64>, lambda: f64) -> (f64, DVector<f64>) {
        let y_mean = y.mean();
        let yc = y.add_scalar(-y_mean);
        let u = self.svd.u.as_ref().expect("svd computed with u");
        let v_t = self.svd.v_t.as_ref().expect("svd computed with v_t");
        let s = &self.svd.singular_values;
        let uty = u.transpose() * yc;
        let filtered = DVector::from_fn(s.len(), |i, _| {
            let si = s[i];
            let denom = si * si + lambda;
            if denom > 0.0 {
                uty[i] * si / denom
            } else {
                0.0
            }
        });
        let scaled = v_t.transpose() * filtered;
        self.unscale(y_mean, &scaled)
    }

    /// Weights `w` with `w·y` equal to the prediction at `x_f` of
    /// [`solve_filtered`](Self::solve_filtered)`(y, lambda)`, for any response `y`.
    pub fn prediction_weights(&self, x_f: &[f64], lambda: f64) -> DVector<f64> {
        let u = self.svd.u.as_ref().expect("svd computed with u");
        let v_t = self.svd.v_t.as_ref().expect("svd computed with v_t");
        let s = &self.svd.singular_values;
        let g = DVector::from_iterator(
            self.active.len(),
            self.active.iter().map(|&j| (x_f[j] - self.means[j]) / self.scales[j]),
        );
        let vg = v_t * g;
        let filtered = DVector::from_fn(s.len(), |i, _| {
            let denom = s[i] * s[i] + lambda;
            if denom > 0.0 {
                vg[i] * s[i] / denom
            } else {
                0.0
            }
        });
        let mut w = u * filtered;
        let mean = w.mean();
        w.add_scalar_mut(1.0 / self.rows as f64 - mean);
        w
    }

    /// Maps scaled-space coefficients (over the active columns) back to original units.
    pub fn unscale(&self, y_mean: f64, scaled: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut beta = DVector::zeros(self.columns);
        for (c, &j) in self.active.iter().enumerate() {
            beta[j] = scaled[c] / self.scales[j];
        }
        let intercept = y_mean - self.means.dot(&beta);
        (intercept, beta)
    }
}

/// Median of a slice (average of the two middle values for even lengths).
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_exact_for_linear() {
        let x = [0.0, 0.5, 2.0, 3.0];
        let f: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((trapezoid(&x, &f) - 12.0).abs() < 1e-14);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn constant_column_is_dropped() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0]);
        let d = ScaledDesign::new(&x);
        assert_eq!(d.active, vec![0]);
        assert_eq!(d.gram_rcond(), 0.0);
        let y = DVector::from_vec(vec![3.0, 5.0, 7.0, 9.0]);
        let (a, b) = d.solve_filtered(&y, 0.0);
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b[0] - 2.0).abs() < 1e-12);
        assert_eq!(b[1], 0.0);
    }
}
