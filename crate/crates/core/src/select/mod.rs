//! Basis-size selection and out-of-sample evaluation over rotated five-fold splits,
//! plus the nearest-spectrum baseline evaluated on the same splits.

mod baseline;
mod evaluate;
mod folds;
mod report;

pub use baseline::{astro_baseline_eval, astro_predict, windowed_l2_distance};
pub use evaluate::{evaluate, p_grid, EvalOptions, GammaMode};
pub use folds::{assign_folds, FoldPlan, RotationSplit, EVAL_FOLDS};
pub use report::{render_table, EvalReport, RotationReport, ValidationPoint, ROTATION_CONVENTION};

pub(crate) use folds::derive_seed;
