use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::evaluate::GammaMode;
use crate::basis::BasisKind;
use crate::error::Result;
use crate::metrics::GammaMatrix;
use crate::regress::{Method, TargetMode};

pub const ROTATION_CONVENTION: &str =
    "rotation r (0-based) validates on fold (r+3) mod 5 and tests on fold (r+4) mod 5; folds reported 1-based";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub p: usize,
    pub gamma_me: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub rotation: usize,
    pub validation_fold: usize,
    pub test_fold: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub chosen_p: Option<usize>,
    pub chosen_lambda: Option<[f64; 2]>,
    pub rmse: [f64; 2],
    pub gamma_me: f64,
    pub validation_curve: Vec<ValidationPoint>,
}

/// Outcome of one evaluation cell, averaged over the rotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub method: Option<Method>,
    pub basis: Option<BasisKind>,
    pub target_mode: Option<TargetMode>,
    pub seed: u64,
    pub folds: usize,
    pub rotation_convention: String,
    pub gamma: GammaMatrix,
    pub gamma_mode: GammaMode,
    pub p_grid: Vec<usize>,
    pub mean_rmse: [f64; 2],
    pub mean_gamma_me: f64,
    pub median_p: Option<usize>,
    pub modal_p: Option<usize>,
    pub rotations: Vec<RotationReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

type CellFn = dyn Fn(&EvalReport) -> String;

/// Plain-text table with one column per report and rows RMSE₁, RMSE₂, ΓME and the
/// median selected basis size.
pub fn render_table(reports: &[EvalReport]) -> String {
    let headers: Vec<String> = reports.iter().map(|r| r.label.clone()).collect();
    let width = headers.iter().map(|h| h.chars().count()).max().unwrap_or(0).max(10);
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "");
    for h in &headers {
        let _ = write!(out, " {h:>width$}");
    }
    out.push('\n');
    let rows: [(&str, &CellFn); 4] = [
        ("RMSE1", &|r| format!("{:.4}", r.mean_rmse[0])),
        ("RMSE2", &|r| format!("{:.4}", r.mean_rmse[1])),
        ("GammaME", &|r| format!("{:.4}", r.mean_gamma_me)),
        ("Nbase", &|r| r.median_p.map_or("-".into(), |p| p.to_string())),
    ];
    for (name, cell) in rows {
        let _ = write!(out, "{name:<8}");
        for r in reports {
            let _ = write!(out, " {:>width$}", cell(r));
        }
        out.push('\n');
    }
    out
}
