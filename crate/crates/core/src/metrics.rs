//! Prediction error measures: per-target RMSE and the Γ-weighted mean error.

use serde::{Deserialize, Serialize};

use crate::dataset::Targets;
use crate::error::{Error, Result};

/// 2 × 2 covariance of the targets, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMatrix {
    pub entries: [[f64; 2]; 2],
}

impl GammaMatrix {
    /// Checks symmetry; positive definiteness is checked where the inverse is needed.
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite covariance entry".into()));
        }
        if (entries[0][1] - entries[1][0]).abs() > 1e-12 * (1.0 + entries[0][1].abs()) {
            return Err(Error::InvalidArgument("covariance matrix is not symmetric".into()));
        }
        Ok(GammaMatrix { entries })
    }

    pub fn identity() -> Self {
        GammaMatrix {
            entries: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn determinant(&self) -> f64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let e = &self.entries;
        let half_trace = 0.5 * (e[0][0] + e[1][1]);
        let disc = (0.25 * (e[0][0] - e[1][1]).powi(2) + e[0][1] * e[1][0]).max(0.0).sqrt();
        [half_trace - disc, half_trace + disc]
    }

    /// Smallest eigenvalue relative to the largest is below 1e-12, or not positive.
    pub fn is_singular(&self) -> bool {
        let [lo, hi] = self.eigenvalues();
        !(hi > 0.0) || lo <= 1e-12 * hi
    }

    pub fn inverse(&self) -> Result<[[f64; 2]; 2]> {
        if self.is_singular() {
            return Err(Error::SingularGamma);
        }
        let e = &self.entries;
        let det = self.determinant();
        Ok([[e[1][1] / det, -e[0][1] / det], [-e[1][0] / det, e[0][0] / det]])
    }
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets vs {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mse = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

/// RMSE of one target column of two n × 2 matrices.
pub fn rmse_column(y: &Targets, yhat: &Targets, column: usize) -> Result<f64> {
    check_pair(y, yhat)?;
    let a: Vec<f64> = y.column(column).iter().copied().collect();
    let b: Vec<f64> = yhat.column(column).iter().copied().collect();
    rmse(&a, &b)
}

/// `sqrt((1/n) Σ eᵢᵀ Γ⁻¹ eᵢ)` with `eᵢ = Yᵢ − Ŷᵢ`.
pub fn gamma_me(y: &Targets, yhat: &Targets, gamma: &GammaMatrix) -> Result<f64> {
    check_pair(y, yhat)?;
    let inv = gamma.inverse()?;
    let n = y.nrows();
    let total: f64 = (0..n)
        .map(|i| {
            let e = [y[(i, 0)] - yhat[(i, 0)], y[(i, 1)] - yhat[(i, 1)]];
            e[0] * (inv[0][0] * e[0] + inv[0][1] * e[1]) + e[1] * (inv[1][0] * e[0] + inv[1][1] * e[1])
        })
        .sum();
    Ok((total / n as f64).max(0.0).sqrt())
}

/// Sample covariance (n − 1 denominator) of the two target columns.
///
/// A rank-deficient estimate is returned with a logged warning.
pub fn estimate_gamma(y: &Targets) -> Result<GammaMatrix> {
    let n = y.nrows();
    if y.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected 2 target columns, got {}",
            y.ncols()
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let means = [y.column(0).mean(), y.column(1).mean()];
    let mut c = [[0.0; 2]; 2];
    for i in 0..n {
        let d = [y[(i, 0)] - means[0], y[(i, 1)] - means[1]];
        for a in 0..2 {
            for b in 0..2 {
                c[a][b] += d[a] * d[b];
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    c[1][0] = c[0][1];
    let gamma = GammaMatrix { entries: c };
    if gamma.is_singular() {
        log::warn!("target covariance is singular: {c:?}");
    }
    Ok(gamma)
}

fn check_pair(y: &Targets, yhat: &Targets) -> Result<()> {
    if y.shape() != yhat.shape() || y.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "targets {:?} vs predictions {:?}",
            y.shape(),
            yhat.shape()
        )));
    }
    if y.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}
