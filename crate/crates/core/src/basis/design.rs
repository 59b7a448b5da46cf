use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BasisSpec;
use crate::dataset::{LineWindow, WindowedSpectrum};
use crate::error::{Error, Result};

/// Window and basis index of one design-matrix column (both zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub window: usize,
    pub basis: usize,
}

/// n × (M·p) matrix of basis coefficients, window-major: column `j·p + k` holds
/// coefficient `k` of window `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub entries: DMatrix<f64>,
    pub row_ids: Vec<String>,
    pub columns: Vec<ColumnMeta>,
    pub basis: BasisSpec,
    pub windows: Vec<LineWindow>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    /// Rows at the given indices, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            entries: self.entries.select_rows(rows),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            columns: self.columns.clone(),
            basis: self.basis,
            windows: self.windows.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "model_id")?;
        for c in &self.columns {
            write!(out, ",w{}_b{}", c.window + 1, c.basis + 1)?;
        }
        writeln!(out)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            write!(out, "{id}")?;
            for v in self.entries.row(i).iter() {
                write!(out, ",{v:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn column_layout(windows: usize, size: usize) -> Vec<ColumnMeta> {
    (0..windows)
        .flat_map(|window| (0..size).map(move |basis| ColumnMeta { window, basis }))
        .collect()
}

/// Projects every window of every curve. Curves are processed in parallel.
pub fn build_design_matrix(curves: &[WindowedSpectrum], spec: &BasisSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let first = curves.first().ok_or(Error::EmptyDataset)?;
    let windows = first.windows();
    let p = spec.size;
    let m = windows.len();
    if let Some(bad) = curves.iter().find(|c| c.windows() != windows) {
        return Err(Error::DimensionMismatch(format!(
            "{} does not share the window list of {}",
            bad.model_id, first.model_id
        )));
    }
    let rows: Vec<Vec<f64>> = curves
        .par_iter()
        .map(|curve| {
            let mut row = Vec::with_capacity(m * p);
            for segment in &curve.segments {
                row.extend(spec.project(segment)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let entries = DMatrix::from_fn(curves.len(), m * p, |i, c| rows[i][c]);
    Ok(DesignMatrix {
        entries,
        row_ids: curves.iter().map(|c| c.model_id.clone()).collect(),
        columns: column_layout(m, p),
        basis: *spec,
        windows,
    })
}
