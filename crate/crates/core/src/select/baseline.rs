use nalgebra::DMatrix;
use rayon::prelude::*;

use super::evaluate::{EvalOptions, GammaMode};
use super::folds::{FoldPlan, EVAL_FOLDS};
use super::report::{EvalReport, RotationReport};
use crate::dataset::{Dataset, Segment, Targets, WindowedSpectrum};
use crate::error::{Error, Result};
use crate::linalg::trapezoid;
use crate::metrics::{estimate_gamma, gamma_me, rmse_column};

/// Squared L2 distance between two curves summed over their windows, integrated with
/// the trapezoid rule on the first curve's grid. The second curve is linearly
/// interpolated when its grid differs.
pub fn windowed_l2_distance(a: &WindowedSpectrum, b: &WindowedSpectrum) -> Result<f64> {
    if a.segments.len() != b.segments.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} windows, {} has {}",
            a.model_id,
            a.segments.len(),
            b.model_id,
            b.segments.len()
        )));
    }
    let mut total = 0.0;
    for (sa, sb) in a.segments.iter().zip(&b.segments) {
        let diff: Vec<f64> = if sa.wavelengths == sb.wavelengths {
            sa.flux.iter().zip(&sb.flux).map(|(u, v)| (u - v).powi(2)).collect()
        } else {
            sa.wavelengths
                .iter()
                .zip(&sa.flux)
                .map(|(&w, &f)| (f - interpolate(sb, w)).powi(2))
                .collect()
        };
        total += trapezoid(&sa.wavelengths, &diff);
    }
    Ok(total)
}

fn interpolate(segment: &Segment, w: f64) -> f64 {
    let x = &segment.wavelengths;
    let k = x.partition_point(|&v| v < w);
    if k == 0 {
        return segment.flux[0];
    }
    if k >= x.len() {
        return segment.flux[x.len() - 1];
    }
    let t = (w - x[k - 1]) / (x[k] - x[k - 1]);
    segment.flux[k - 1] + t * (segment.flux[k] - segment.flux[k - 1])
}

/// Parameters of the reference curve closest to `query`; ties go to the earlier reference.
pub fn astro_predict(
    references: &[&WindowedSpectrum],
    targets: &Targets,
    query: &WindowedSpectrum,
) -> Result<[f64; 2]> {
    if references.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut best = (f64::INFINITY, 0);
    for (i, r) in references.iter().enumerate() {
        let d = windowed_l2_distance(query, r)?;
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok([targets[(best.1, 0)], targets[(best.1, 1)]])
}

/// Nearest-spectrum baseline on the same rotations as [`super::evaluate`]: every test
/// curve takes the parameters of its nearest neighbour among the fitting folds.
pub fn astro_baseline_eval(dataset: &Dataset, options: &EvalOptions) -> Result<EvalReport> {
    let plan = FoldPlan::new(dataset.len(), options.seed)?;
    let targets = dataset.targets();
    let full_gamma = estimate_gamma(&targets)?;
    let rotations = (0..EVAL_FOLDS)
        .into_par_iter()
        .map(|r| {
            let split = plan.rotation(r);
            let refs: Vec<&WindowedSpectrum> = split.train.iter().map(|&i| &dataset.curves[i]).collect();
            let y_train = targets.select_rows(&split.train);
            let y_test = targets.select_rows(&split.test);
            let gamma = match options.gamma_mode {
                GammaMode::Full => full_gamma,
                GammaMode::TrainingFold => estimate_gamma(&y_train)?,
            };
            let mut yhat = DMatrix::zeros(split.test.len(), 2);
            for (row, &i) in split.test.iter().enumerate() {
                let p = astro_predict(&refs, &y_train, &dataset.curves[i])?;
                yhat[(row, 0)] = p[0];
                yhat[(row, 1)] = p[1];
            }
            Ok(RotationReport {
                rotation: r,
                validation_fold: split.validation_fold + 1,
                test_fold: split.test_fold + 1,
                train_size: split.train.len(),
                validation_size: split.validation.len(),
                test_size: split.test.len(),
                chosen_p: None,
                chosen_lambda: None,
                rmse: [rmse_column(&y_test, &yhat, 0)?, rmse_column(&y_test, &yhat, 1)?],
                gamma_me: gamma_me(&y_test, &yhat, &gamma)?,
                validation_curve: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::aggregate(
        "Astro".into(),
        None,
        None,
        None,
        options.seed,
        full_gamma,
        options.gamma_mode,
        Vec::new(),
        rotations,
    ))
}
