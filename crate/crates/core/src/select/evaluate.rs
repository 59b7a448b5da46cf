use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{derive_seed, FoldPlan, EVAL_FOLDS};
use super::report::{EvalReport, RotationReport, ValidationPoint, ROTATION_CONVENTION};
use crate::basis::{build_design_matrix, BasisKind, BasisSpec, DesignMatrix, BSPLINE_ORDER};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{estimate_gamma, gamma_me, rmse_column, GammaMatrix};
use crate::regress::{fit_design, predict_design, FitSpec, Method, TargetMode};

/// Largest basis size tried per method.
fn p_cap(method: Method) -> usize {
    match method {
        Method::Ols | Method::Robust => 13,
        Method::Lasso => 31,
        Method::Ridge => 35,
    }
}

/// Candidate basis sizes: odd values, from 1 for Fourier and from 5 for B-splines.
pub fn p_grid(method: Method, kind: BasisKind) -> Vec<usize> {
    let start = match kind {
        BasisKind::Fourier => 1,
        BasisKind::BSpline => BSPLINE_ORDER + 1,
    };
    (start..=p_cap(method)).step_by(2).collect()
}

/// Which target covariance weights ΓME.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// Estimated once from every row of the dataset.
    Full,
    /// Re-estimated from the fitting rows of each rotation.
    TrainingFold,
}

impl std::str::FromStr for GammaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(GammaMode::Full),
            "training_fold" | "training" => Ok(GammaMode::TrainingFold),
            other => Err(Error::InvalidArgument(format!("unknown gamma mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub seed: u64,
    pub gamma_mode: GammaMode,
    /// Overrides the default grid of [`p_grid`].
    pub p_grid: Option<Vec<usize>>,
}

impl EvalOptions {
    pub fn new(seed: u64) -> Self {
        EvalOptions {
            seed,
            gamma_mode: GammaMode::Full,
            p_grid: None,
        }
    }
}

/// Rotated five-fold evaluation with validation-driven choice of the basis size.
///
/// In each rotation the model is fitted on three folds for every grid size, the size
/// with the smallest validation ΓME is kept (smaller size on ties), and the fit at that
/// size is scored on the test fold. Metrics are always in original target units.
pub fn evaluate(
    dataset: &Dataset,
    kind: BasisKind,
    spec: &FitSpec,
    mode: TargetMode,
    options: &EvalOptions,
) -> Result<EvalReport> {
    spec.validate()?;
    let plan = FoldPlan::new(dataset.len(), options.seed)?;
    let grid = options.p_grid.clone().unwrap_or_else(|| p_grid(spec.method, kind));
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty basis-size grid".into()));
    }
    let targets = dataset.targets();
    let full_gamma = estimate_gamma(&targets)?;

    let designs: BTreeMap<usize, std::result::Result<DesignMatrix, String>> = grid
        .iter()
        .map(|&p| {
            let built = BasisSpec::new(kind, p)
                .and_then(|b| build_design_matrix(&dataset.curves, &b))
                .map_err(|e| e.to_string());
            (p, built)
        })
        .collect();

    let rotations = (0..EVAL_FOLDS)
        .into_par_iter()
        .map(|r| {
            let split = plan.rotation(r);
            let y_train = targets.select_rows(&split.train);
            let y_val = targets.select_rows(&split.validation);
            let y_test = targets.select_rows(&split.test);
            let gamma = match options.gamma_mode {
                GammaMode::Full => full_gamma,
                GammaMode::TrainingFold => estimate_gamma(&y_train)?,
            };
            let mut curve = Vec::with_capacity(grid.len());
            let mut best: Option<(usize, f64, crate::regress::LinearModel, &DesignMatrix)> = None;
            for &p in &grid {
                let design = match &designs[&p] {
                    Ok(d) => d,
                    Err(msg) => {
                        curve.push(ValidationPoint {
                            p,
                            gamma_me: None,
                            error: Some(msg.clone()),
                        });
                        continue;
                    }
                };
                let mut cell_spec = spec.clone();
                cell_spec.cv_seed = derive_seed(options.seed, r as u64, p as u64);
                let scored =
                    fit_design(&design.select_rows(&split.train), &y_train, &cell_spec, mode, None).and_then(|model| {
                        let yhat = predict_design(&model, &design.select_rows(&split.validation))?;
                        Ok((gamma_me(&y_val, &yhat, &gamma)?, model))
                    });
                match scored {
                    Ok((score, model)) => {
                        curve.push(ValidationPoint {
                            p,
                            gamma_me: Some(score),
                            error: None,
                        });
                        if best.as_ref().is_none_or(|b| score < b.1) {
                            best = Some((p, score, model, design));
                        }
                    }
                    Err(e) => curve.push(ValidationPoint {
                        p,
                        gamma_me: None,
                        error: Some(e.to_string()),
                    }),
                }
            }
            let (chosen_p, _, model, design) = best.ok_or(Error::AllFitsFailed)?;
            let yhat = predict_design(&model, &design.select_rows(&split.test))?;
            Ok(RotationReport {
                rotation: r,
                validation_fold: split.validation_fold + 1,
                test_fold: split.test_fold + 1,
                train_size: split.train.len(),
                validation_size: split.validation.len(),
                test_size: split.test.len(),
                chosen_p: Some(chosen_p),
                chosen_lambda: model.chosen_lambda,
                rmse: [rmse_column(&y_test, &yhat, 0)?, rmse_column(&y_test, &yhat, 1)?],
                gamma_me: gamma_me(&y_test, &yhat, &gamma)?,
                validation_curve: curve,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport::aggregate(
        format!("{}/{}", spec.method.label(), mode),
        Some(spec.method),
        Some(kind),
        Some(mode),
        options.seed,
        full_gamma,
        options.gamma_mode,
        grid,
        rotations,
    ))
}

impl EvalReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn aggregate(
        label: String,
        method: Option<Method>,
        basis: Option<BasisKind>,
        target_mode: Option<TargetMode>,
        seed: u64,
        gamma: GammaMatrix,
        gamma_mode: GammaMode,
        p_grid: Vec<usize>,
        rotations: Vec<RotationReport>,
    ) -> Self {
        let k = rotations.len() as f64;
        let mean = |f: &dyn Fn(&RotationReport) -> f64| rotations.iter().map(f).sum::<f64>() / k;
        let mut chosen: Vec<usize> = rotations.iter().filter_map(|r| r.chosen_p).collect();
        chosen.sort_unstable();
        let median_p = (!chosen.is_empty()).then(|| chosen[(chosen.len() - 1) / 2]);
        let modal_p = modal(&chosen);
        EvalReport {
            label,
            method,
            basis,
            target_mode,
            seed,
            folds: EVAL_FOLDS,
            rotation_convention: ROTATION_CONVENTION.to_string(),
            gamma,
            gamma_mode,
            p_grid,
            mean_rmse: [mean(&|r| r.rmse[0]), mean(&|r| r.rmse[1])],
            mean_gamma_me: mean(&|r| r.gamma_me),
            median_p,
            modal_p,
            rotations,
        }
    }
}

/// Most frequent value; ties go to the smaller value.
fn modal(sorted: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for chunk in sorted.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(_, c)| chunk.len() > c) {
            best = Some((chunk[0], chunk.len()));
        }
    }
    best.map(|(v, _)| v)
}
