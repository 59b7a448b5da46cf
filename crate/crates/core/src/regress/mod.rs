//! Two-target linear regression on design matrices: OLS, Huber IRLS, ridge and lasso.
//!
//! Every fitter centers the predictors and the targets, so intercepts are estimated
//! without penalty. Ridge and lasso work on centered predictors rescaled to unit
//! Euclidean norm and map the coefficients back to original units.

mod cv;
mod huber;
mod lasso;
mod model;
mod ols;
mod ridge;

use serde::{Deserialize, Serialize};

pub use cv::select_lambda;
pub use huber::fit_huber;
pub use lasso::{fit_lasso, lambda_max};
pub use model::{LinearModel, ModelDocument, MODEL_FORMAT, MODEL_VERSION};
pub use ols::fit_ols;
pub use ridge::{fit_ridge, fit_ridge_per_target};

use nalgebra::DMatrix;

use crate::basis::DesignMatrix;
use crate::dataset::{TargetScaling, Targets};
use crate::error::{Error, Result};

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "lm", alias = "ols")]
    Ols,
    Robust,
    Ridge,
    Lasso,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ols, Method::Robust, Method::Ridge, Method::Lasso];

    pub fn is_penalized(self) -> bool {
        matches!(self, Method::Ridge | Method::Lasso)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Ols => "LM",
            Method::Robust => "Robust LM",
            Method::Ridge => "Ridge",
            Method::Lasso => "Lasso",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ols => "lm",
            Method::Robust => "robust",
            Method::Ridge => "ridge",
            Method::Lasso => "lasso",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lm" | "ols" => Ok(Method::Ols),
            "robust" | "huber" => Ok(Method::Robust),
            "ridge" => Ok(Method::Ridge),
            "lasso" => Ok(Method::Lasso),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Raw targets ("brut") or targets standardized on the training rows ("norm").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Brut,
    Norm,
}

impl std::fmt::Display for TargetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetMode::Brut => "Brut",
            TargetMode::Norm => "Norm",
        })
    }
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brut" | "raw" => Ok(TargetMode::Brut),
            "norm" | "standardized" => Ok(TargetMode::Norm),
            other => Err(Error::InvalidArgument(format!("unknown target mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub method: Method,
    /// Candidate penalties; a single value is used as is.
    pub lambda_grid: Vec<f64>,
    pub huber_k: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Folds of the inner cross-validation used to pick λ.
    pub cv_folds: usize,
    pub cv_seed: u64,
}

pub const DEFAULT_HUBER_K: f64 = 1.345;

impl FitSpec {
    pub fn ols() -> Self {
        FitSpec {
            method: Method::Ols,
            lambda_grid: Vec::new(),
            huber_k: DEFAULT_HUBER_K,
            max_iter: 50,
            tol: 1e-8,
            cv_folds: 5,
            cv_seed: 0,
        }
    }

    pub fn robust() -> Self {
        FitSpec {
            method: Method::Robust,
            ..Self::ols()
        }
    }

    pub fn ridge(lambda_grid: Vec<f64>) -> Self {
        FitSpec {
            method: Method::Ridge,
            lambda_grid,
            ..Self::ols()
        }
    }

    pub fn lasso(lambda_grid: Vec<f64>) -> Self {
        FitSpec {
            method: Method::Lasso,
            lambda_grid,
            max_iter: 100_000,
            ..Self::ols()
        }
    }

    /// Defaults for a method, with the default λ grid for penalized methods.
    pub fn for_method(method: Method) -> Self {
        match method {
            Method::Ols => Self::ols(),
            Method::Robust => Self::robust(),
            Method::Ridge => Self::ridge(default_lambda_grid(method)),
            Method::Lasso => Self::lasso(default_lambda_grid(method)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.huber_k > 0.0) {
            return Err(Error::InvalidArgument("huber_k must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if self.method.is_penalized() {
            if self.lambda_grid.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "{} needs a non-empty lambda grid",
                    self.method
                )));
            }
            let floor_ok = |l: f64| match self.method {
                Method::Ridge => l > 0.0,
                _ => l >= 0.0,
            };
            if let Some(bad) = self.lambda_grid.iter().find(|&&l| !floor_ok(l) || !l.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid lambda {bad}")));
            }
            if self.lambda_grid.len() > 1 && self.cv_folds < 2 {
                return Err(Error::InvalidArgument("cv_folds must be at least 2".into()));
            }
        }
        Ok(())
    }
}

/// Geometric λ grids: ridge 1e-6..1e2, lasso 1e-5..1e1, one value per decade.
pub fn default_lambda_grid(method: Method) -> Vec<f64> {
    let (lo, hi) = match method {
        Method::Ridge => (-6, 2),
        Method::Lasso => (-5, 1),
        _ => return Vec::new(),
    };
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

/// Fits with the method of `spec`. For penalized methods λ is `lambdas` when given,
/// the single grid value when the grid has one entry, and otherwise chosen by
/// inner cross-validation.
pub fn fit(x: &DMatrix<f64>, y: &Targets, spec: &FitSpec, lambdas: Option<[f64; 2]>) -> Result<LinearModel> {
    spec.validate()?;
    check_shapes(x, y)?;
    let mut model = match spec.method {
        Method::Ols => fit_ols(x, y)?,
        Method::Robust => fit_huber(x, y, spec)?,
        Method::Ridge | Method::Lasso => {
            let lambdas = match lambdas {
                Some(l) => l,
                None if spec.lambda_grid.len() == 1 => [spec.lambda_grid[0]; 2],
                None => select_lambda(x, y, spec.method, &spec.lambda_grid, spec.cv_folds, spec.cv_seed, spec)?,
            };
            if spec.method == Method::Ridge {
                fit_ridge_per_target(x, y, lambdas)?
            } else {
                lasso::fit_lasso_per_target(x, y, lambdas, spec)?
            }
        }
    };
    model.method = spec.clone();
    Ok(model)
}

/// Fits on a design matrix in the given target mode and attaches the column layout.
pub fn fit_design(
    design: &DesignMatrix,
    y: &Targets,
    spec: &FitSpec,
    mode: TargetMode,
    lambdas: Option<[f64; 2]>,
) -> Result<LinearModel> {
    let mut model = match mode {
        TargetMode::Brut => fit(&design.entries, y, spec, lambdas)?,
        TargetMode::Norm => {
            let scaling = TargetScaling::fit(y)?;
            let mut m = fit(&design.entries, &scaling.standardize_matrix(y), spec, lambdas)?;
            m.target_scaling = Some(scaling);
            m
        }
    };
    model.basis = Some(design.basis);
    model.columns = design.columns.clone();
    model.windows = design.windows.clone();
    Ok(model)
}

/// `Ŷ = α + X B`, destandardized when the model carries a target scaling.
pub fn predict(model: &LinearModel, x: &DMatrix<f64>) -> Result<Targets> {
    if x.ncols() != model.coefficients.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients, design has {} columns",
            model.coefficients.nrows(),
            x.ncols()
        )));
    }
    let mut yhat = x * &model.coefficients;
    for mut row in yhat.row_iter_mut() {
        row[0] += model.intercepts[0];
        row[1] += model.intercepts[1];
    }
    Ok(match &model.target_scaling {
        Some(s) => s.destandardize_matrix(&yhat),
        None => yhat,
    })
}

/// Predicts from a design matrix after checking that its layout matches the model.
pub fn predict_design(model: &LinearModel, design: &DesignMatrix) -> Result<Targets> {
    if let Some(basis) = model.basis {
        if basis != design.basis {
            return Err(Error::DimensionMismatch(format!(
                "model basis {:?} but design basis {:?}",
                basis, design.basis
            )));
        }
    }
    if !model.windows.is_empty() && model.windows != design.windows {
        return Err(Error::DimensionMismatch("window lists differ".into()));
    }
    predict(model, &design.entries)
}

pub(crate) fn check_shapes(x: &DMatrix<f64>, y: &Targets) -> Result<()> {
    if y.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "targets must have 2 columns, got {}",
            y.ncols()
        )));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, targets have {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite entry in design or targets".into()));
    }
    Ok(())
}
