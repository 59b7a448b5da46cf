//! Residual-bootstrap prediction intervals and leave-one-out coverage.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_design_matrix, BasisKind, BasisSpec};
use crate::dataset::{Dataset, TargetScaling, Targets};
use crate::error::{Error, Result};
use crate::regress::{check_shapes, fit, predict, FitSpec, Method, TargetMode};
use crate::select::derive_seed;

pub const DEFAULT_REPLICATES: usize = 1000;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    /// 1 for T*, 2 for log10 Rt.
    pub target: usize,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub replicates: usize,
}

impl PredictionInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Sorted bootstrap pivots `x_f β̂ − x_f β̂* + r_f*` per target, in original target units.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub point: [f64; 2],
    pub values: [Vec<f64>; 2],
    pub failed: usize,
    /// Penalty held fixed across the refits, for ridge and lasso.
    pub lambdas: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(alpha: f64, replicates: usize, seed: u64) -> Result<Self> {
        let c = BootstrapConfig {
            alpha,
            replicates,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_REPLICATES} bootstrap replicates, got {}",
                self.replicates
            )));
        }
        Ok(())
    }
}

/// One line of interval output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub model_id: String,
    pub target: usize,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub replicates: usize,
    pub method: Method,
    pub p: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
}

impl IntervalRecord {
    pub fn new(model_id: &str, interval: &PredictionInterval, method: Method, p: usize, lambda: Option<f64>) -> Self {
        IntervalRecord {
            model_id: model_id.to_string(),
            target: interval.target,
            point: interval.point,
            lower: interval.lower,
            upper: interval.upper,
            alpha: interval.alpha,
            replicates: interval.replicates,
            method,
            p,
            lambda,
        }
    }
}

/// Residual-bootstrap prediction intervals for one new design row `x_f`.
pub fn bootstrap_interval(
    x: &DMatrix<f64>,
    y: &Targets,
    spec: &FitSpec,
    mode: TargetMode,
    x_f: &[f64],
    config: &BootstrapConfig,
) -> Result<[PredictionInterval; 2]> {
    config.validate()?;
    let draws = bootstrap_draws(x, y, spec, mode, x_f, config.replicates, config.seed)?;
    interval_from_draws(&draws, config.alpha)
}

/// Runs the bootstrap replicates. Replicate `t` draws from its own stream of the seeded
/// generator, so the draws do not depend on scheduling.
pub fn bootstrap_draws(
    x: &DMatrix<f64>,
    y: &Targets,
    spec: &FitSpec,
    mode: TargetMode,
    x_f: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<BootstrapDraws> {
    draws_impl(x, y, spec, mode, x_f, replicates, seed, false)
}

#[allow(clippy::too_many_arguments)]
fn draws_impl(
    x: &DMatrix<f64>,
    y: &Targets,
    spec: &FitSpec,
    mode: TargetMode,
    x_f: &[f64],
    replicates: usize,
    seed: u64,
    force_refit: bool,
) -> Result<BootstrapDraws> {
    check_shapes(x, y)?;
    if x_f.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "query row has {} entries, design has {} columns",
            x_f.len(),
            x.ncols()
        )));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("zero bootstrap replicates".into()));
    }
    let scaling = match mode {
        TargetMode::Brut => None,
        TargetMode::Norm => Some(TargetScaling::fit(y)?),
    };
    let ys = match &scaling {
        Some(s) => s.standardize_matrix(y),
        None => y.clone(),
    };
    let n = x.nrows();
    let model = fit(x, &ys, spec, None)?;
    let lambdas = model.chosen_lambda;
    let fitted = predict(&model, x)?;
    let mut resid = &ys - &fitted;
    for l in 0..2 {
        let mean = resid.column(l).mean();
        resid.column_mut(l).add_scalar_mut(-mean);
    }
    let point = model.predict_row(x_f)?;

    // OLS and fixed-λ ridge predictions are linear in the response.
    let weights = match spec.method {
        Method::Ols | Method::Ridge if !force_refit => {
            let design = crate::linalg::ScaledDesign::new(x);
            let lam = lambdas.unwrap_or([0.0; 2]);
            let w = [
                design.prediction_weights(x_f, lam[0]),
                design.prediction_weights(x_f, lam[1]),
            ];
            let base = [w[0].dot(&fitted.column(0)), w[1].dot(&fitted.column(1))];
            Some((w, base))
        }
        _ => None,
    };

    let results: Vec<Result<[f64; 2]>> = (0..replicates)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let f = rng.random_range(0..n);
            let star = match &weights {
                Some((w, base)) => [0, 1].map(|l| {
                    base[l]
                        + idx
                            .iter()
                            .enumerate()
                            .map(|(i, &j)| w[l][i] * resid[(j, l)])
                            .sum::<f64>()
                }),
                None => {
                    let ystar = DMatrix::from_fn(n, 2, |i, l| fitted[(i, l)] + resid[(idx[i], l)]);
                    fit(x, &ystar, spec, lambdas)?.predict_row(x_f)?
                }
            };
            Ok([0, 1].map(|l| point[l] - star[l] + resid[(f, l)]))
        })
        .collect();

    let mut values = [Vec::with_capacity(replicates), Vec::with_capacity(replicates)];
    let mut failed = 0;
    let mut last_error = None;
    for r in results {
        match r {
            Ok(b) if b.iter().all(|v| v.is_finite()) => {
                values[0].push(b[0]);
                values[1].push(b[1]);
            }
            Ok(_) => failed += 1,
            Err(e) => {
                failed += 1;
                last_error = Some(e);
            }
        }
    }
    if failed > replicates / 100 {
        if let Some(e) = &last_error {
            log::warn!("bootstrap refit failed: {e}");
        }
        return Err(Error::BootstrapFailures {
            failed,
            total: replicates,
        });
    }
    if failed > 0 {
        log::warn!("skipped {failed} of {replicates} bootstrap replicates");
    }

    let mut point = point;
    if let Some(s) = &scaling {
        point = s.destandardize(point);
        for l in 0..2 {
            values[l].iter_mut().for_each(|v| *v *= s.std_devs[l]);
        }
    }
    for v in &mut values {
        v.sort_by(|a, b| a.total_cmp(b));
    }
    Ok(BootstrapDraws {
        point,
        values,
        failed,
        lambdas,
    })
}

/// 1-based nearest rank `⌈q·m⌉`, clamped to `1..=m`. A tolerance guards against
/// products such as `0.05 · 100` rounding just above an integer.
fn nearest_rank(q: f64, m: usize) -> usize {
    let r = (q * m as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(m)
}

/// `[x_f β̂ + q*, x_f β̂ + Q*]` with q*, Q* the nearest-rank α/2 and 1 − α/2 quantiles.
pub fn interval_from_draws(draws: &BootstrapDraws, alpha: f64) -> Result<[PredictionInterval; 2]> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let build = |l: usize| -> Result<PredictionInterval> {
        let v = &draws.values[l];
        if v.is_empty() {
            return Err(Error::BootstrapFailures {
                failed: draws.failed,
                total: draws.failed,
            });
        }
        let m = v.len();
        let lo = v[nearest_rank(alpha / 2.0, m) - 1];
        let hi = v[nearest_rank(1.0 - alpha / 2.0, m) - 1];
        Ok(PredictionInterval {
            target: l + 1,
            point: draws.point[l],
            lower: draws.point[l] + lo,
            upper: draws.point[l] + hi,
            alpha,
            replicates: m + draws.failed,
        })
    };
    Ok([build(0)?, build(1)?])
}

/// Leave-one-out coverage: every curve in turn is predicted from the others and its
/// true parameters are checked against the bootstrap intervals.
pub fn coverage_loo(
    dataset: &Dataset,
    kind: BasisKind,
    p: usize,
    spec: &FitSpec,
    mode: TargetMode,
    config: &BootstrapConfig,
) -> Result<[f64; 2]> {
    config.validate()?;
    let n = dataset.len();
    if n < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: n });
    }
    let design = build_design_matrix(&dataset.curves, &BasisSpec::new(kind, p)?)?;
    let targets = dataset.targets();
    let hits = (0..n)
        .into_par_iter()
        .map(|i| {
            let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let x = design.entries.select_rows(&train);
            let y = targets.select_rows(&train);
            let x_f: Vec<f64> = design.entries.row(i).iter().copied().collect();
            let draws = bootstrap_draws(
                &x,
                &y,
                spec,
                mode,
                &x_f,
                config.replicates,
                derive_seed(config.seed, i as u64, 0),
            )?;
            let iv = interval_from_draws(&draws, config.alpha)?;
            Ok([0, 1].map(|l| iv[l].contains(targets[(i, l)]) as usize))
        })
        .collect::<Result<Vec<[usize; 2]>>>()?;
    let total = [0, 1].map(|l| hits.iter().map(|h| h[l]).sum::<usize>() as f64 / n as f64);
    Ok(total)
}
