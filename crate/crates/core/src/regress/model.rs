use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FitSpec;
use crate::basis::{BasisSpec, ColumnMeta};
use crate::dataset::{LineWindow, TargetScaling};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "stellar-fda-model";
pub const MODEL_VERSION: u32 = 1;

/// Fitted intercepts and coefficients for both targets.
///
/// `coefficients` is (M·p) × 2; column 0 belongs to T*, column 1 to log Rt. When
/// `target_scaling` is set the parameters live in standardized target units.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercepts: [f64; 2],
    pub coefficients: DMatrix<f64>,
    pub method: FitSpec,
    pub chosen_lambda: Option<[f64; 2]>,
    pub target_scaling: Option<TargetScaling>,
    pub basis: Option<BasisSpec>,
    pub columns: Vec<ColumnMeta>,
    pub windows: Vec<LineWindow>,
}

impl LinearModel {
    pub fn from_parts(intercepts: [f64; 2], coefficients: DMatrix<f64>, method: FitSpec) -> Self {
        let columns = (0..coefficients.nrows())
            .map(|basis| ColumnMeta { window: 0, basis })
            .collect();
        LinearModel {
            intercepts,
            coefficients,
            method,
            chosen_lambda: None,
            target_scaling: None,
            basis: None,
            columns,
            windows: Vec::new(),
        }
    }

    /// Coefficient vector of one target (0 = T*, 1 = log Rt).
    pub fn beta(&self, target: usize) -> Vec<f64> {
        self.coefficients.column(target).iter().copied().collect()
    }

    /// Point prediction for one design row, in original target units.
    pub fn predict_row(&self, row: &[f64]) -> Result<[f64; 2]> {
        if row.len() != self.coefficients.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} entries, model has {} coefficients",
                row.len(),
                self.coefficients.nrows()
            )));
        }
        let mut y = self.intercepts;
        for (j, x) in row.iter().enumerate() {
            y[0] += x * self.coefficients[(j, 0)];
            y[1] += x * self.coefficients[(j, 1)];
        }
        Ok(match &self.target_scaling {
            Some(s) => s.destandardize(y),
            None => y,
        })
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            intercepts: self.intercepts,
            coefficients: self
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| CoefficientEntry {
                    window: c.window,
                    basis: c.basis,
                    beta: [self.coefficients[(j, 0)], self.coefficients[(j, 1)]],
                })
                .collect(),
            method: self.method.clone(),
            chosen_lambda: self.chosen_lambda,
            target_scaling: self.target_scaling,
            basis: self.basis,
            windows: self.windows.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unexpected model format {:?}",
                doc.format
            )));
        }
        if doc.version != MODEL_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                doc.version
            )));
        }
        if let Some(b) = doc.basis {
            b.validate()?;
            if !doc.windows.is_empty() && doc.coefficients.len() != b.size * doc.windows.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} coefficients for {} windows of size {}",
                    doc.coefficients.len(),
                    doc.windows.len(),
                    b.size
                )));
            }
        }
        let k = doc.coefficients.len();
        let coefficients = DMatrix::from_fn(k, 2, |j, l| doc.coefficients[j].beta[l]);
        if coefficients.iter().chain(&doc.intercepts).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model parameter".into()));
        }
        Ok(LinearModel {
            intercepts: doc.intercepts,
            coefficients,
            method: doc.method,
            chosen_lambda: doc.chosen_lambda,
            target_scaling: doc.target_scaling,
            basis: doc.basis,
            columns: doc
                .coefficients
                .iter()
                .map(|c| ColumnMeta {
                    window: c.window,
                    basis: c.basis,
                })
                .collect(),
            windows: doc.windows,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Serialized form of a [`LinearModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub intercepts: [f64; 2],
    pub coefficients: Vec<CoefficientEntry>,
    pub method: FitSpec,
    pub chosen_lambda: Option<[f64; 2]>,
    pub target_scaling: Option<TargetScaling>,
    pub basis: Option<BasisSpec>,
    pub windows: Vec<LineWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub window: usize,
    pub basis: usize,
    /// Coefficient for (T*, log Rt).
    pub beta: [f64; 2],
}
