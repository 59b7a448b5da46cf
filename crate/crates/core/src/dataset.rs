//! Spectra ingestion, line windows and target scaling.
//!
//! A grid is described by a CSV manifest with header `model_id,file,t_star,log_rt`
//! and one two-column text file per model (wavelength in Å, normalized flux),
//! separated by whitespace or commas. Lines starting with `#` are ignored.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// n × 2 matrix of targets, column 0 is T* (kK), column 1 is log10 Rt.
pub type Targets = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    pub model_id: String,
    pub wavelengths: Vec<f64>,
    pub flux: Vec<f64>,
}

impl SpectrumRecord {
    pub fn new(model_id: impl Into<String>, wavelengths: Vec<f64>, flux: Vec<f64>) -> Result<Self> {
        let model_id = model_id.into();
        if wavelengths.len() != flux.len() {
            return Err(Error::DimensionMismatch(format!(
                "{model_id}: {} wavelengths but {} flux values",
                wavelengths.len(),
                flux.len()
            )));
        }
        if wavelengths.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if let Some(i) = wavelengths.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotone { model_id, index: i + 1 });
        }
        if flux.iter().chain(&wavelengths).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{model_id}: non-finite sample")));
        }
        Ok(SpectrumRecord {
            model_id,
            wavelengths,
            flux,
        })
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }
}

/// Closed wavelength interval `[lower, upper]` in Å around one spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineWindow {
    pub lower: f64,
    pub upper: f64,
}

impl LineWindow {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidWindow { lower, upper });
        }
        Ok(LineWindow { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, wavelength: f64) -> bool {
        self.lower <= wavelength && wavelength <= self.upper
    }
}

/// The ten H and He line windows, in the order used for the design matrix.
pub fn default_windows() -> Vec<LineWindow> {
    const BOUNDS: [(f64, f64); 10] = [
        (6500.0, 6600.0),
        (4800.0, 4900.0),
        (4300.0, 4360.0),
        (4370.0, 4405.0),
        (4460.0, 4485.0),
        (4700.0, 4730.0),
        (4900.0, 4940.0),
        (4180.0, 4220.0),
        (4525.0, 4560.0),
        (4670.0, 4700.0),
    ];
    BOUNDS
        .iter()
        .map(|&(lower, upper)| LineWindow { lower, upper })
        .collect()
}

/// One spectrum restricted to one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub window: LineWindow,
    pub wavelengths: Vec<f64>,
    pub flux: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSpectrum {
    pub model_id: String,
    pub segments: Vec<Segment>,
}

impl WindowedSpectrum {
    pub fn windows(&self) -> Vec<LineWindow> {
        self.segments.iter().map(|s| s.window).collect()
    }
}

/// Restricts a record to each window. Samples on the window bounds are kept.
pub fn extract_windows(record: &SpectrumRecord, windows: &[LineWindow]) -> Result<WindowedSpectrum> {
    let segments = windows
        .iter()
        .map(|&window| {
            let start = record.wavelengths.partition_point(|&w| w < window.lower);
            let end = record.wavelengths.partition_point(|&w| w <= window.upper);
            if start >= end {
                return Err(Error::EmptyWindow {
                    lower: window.lower,
                    upper: window.upper,
                });
            }
            Ok(Segment {
                window,
                wavelengths: record.wavelengths[start..end].to_vec(),
                flux: record.flux[start..end].to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WindowedSpectrum {
        model_id: record.model_id.clone(),
        segments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub model_id: String,
    /// Effective temperature in kK.
    pub t_star: f64,
    /// log10 of the modified radius.
    pub log_rt: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterTable {
    rows: Vec<ParameterRow>,
}

impl ParameterTable {
    pub fn new(rows: Vec<ParameterRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for row in &rows {
            if !seen.insert(row.model_id.as_str()) {
                return Err(Error::DuplicateModel(row.model_id.clone()));
            }
        }
        Ok(ParameterTable { rows })
    }

    pub fn rows(&self) -> &[ParameterRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, model_id: &str) -> Option<&ParameterRow> {
        self.rows.iter().find(|r| r.model_id == model_id)
    }

    pub fn targets(&self) -> Targets {
        DMatrix::from_fn(self.rows.len(), 2, |i, l| match l {
            0 => self.rows[i].t_star,
            _ => self.rows[i].log_rt,
        })
    }

    /// Builds a table from ids and an n × 2 target matrix.
    pub fn from_targets(ids: &[String], targets: &Targets) -> Result<Self> {
        if ids.len() != targets.nrows() || targets.ncols() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for a {}x{} target matrix",
                ids.len(),
                targets.nrows(),
                targets.ncols()
            )));
        }
        Self::new(
            ids.iter()
                .enumerate()
                .map(|(i, id)| ParameterRow {
                    model_id: id.clone(),
                    t_star: targets[(i, 0)],
                    log_rt: targets[(i, 1)],
                })
                .collect(),
        )
    }
}

/// Column means and sample standard deviations of the two targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub means: [f64; 2],
    pub std_devs: [f64; 2],
}

impl TargetScaling {
    pub fn new(means: [f64; 2], std_devs: [f64; 2]) -> Result<Self> {
        if std_devs.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "standard deviations must be positive, got {std_devs:?}"
            )));
        }
        Ok(TargetScaling { means, std_devs })
    }

    /// Estimates the scaling from the columns of an n × 2 target matrix (n − 1 denominator).
    pub fn fit(targets: &Targets) -> Result<Self> {
        let n = targets.nrows();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let mut means = [0.0; 2];
        let mut std_devs = [0.0; 2];
        for l in 0..2 {
            let col = targets.column(l);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if !(sd > f64::EPSILON * mean.abs().max(1.0)) {
                return Err(Error::ZeroVariance(l));
            }
            means[l] = mean;
            std_devs[l] = sd;
        }
        Ok(TargetScaling { means, std_devs })
    }

    pub fn standardize(&self, y: [f64; 2]) -> [f64; 2] {
        [
            (y[0] - self.means[0]) / self.std_devs[0],
            (y[1] - self.means[1]) / self.std_devs[1],
        ]
    }

    pub fn destandardize(&self, y: [f64; 2]) -> [f64; 2] {
        [
            y[0] * self.std_devs[0] + self.means[0],
            y[1] * self.std_devs[1] + self.means[1],
        ]
    }

    pub fn standardize_matrix(&self, targets: &Targets) -> Targets {
        Targets::from_fn(targets.nrows(), 2, |i, l| {
            (targets[(i, l)] - self.means[l]) / self.std_devs[l]
        })
    }

    pub fn destandardize_matrix(&self, targets: &Targets) -> Targets {
        Targets::from_fn(targets.nrows(), 2, |i, l| {
            targets[(i, l)] * self.std_devs[l] + self.means[l]
        })
    }
}

pub fn standardize_targets(table: &ParameterTable) -> Result<(ParameterTable, TargetScaling)> {
    let targets = table.targets();
    let scaling = TargetScaling::fit(&targets)?;
    let ids: Vec<String> = table.rows.iter().map(|r| r.model_id.clone()).collect();
    let scaled = ParameterTable::from_targets(&ids, &scaling.standardize_matrix(&targets))?;
    Ok((scaled, scaling))
}

pub fn destandardize_predictions(yhat: [f64; 2], scaling: &TargetScaling) -> [f64; 2] {
    scaling.destandardize(yhat)
}

/// Reads one two-column spectrum file.
pub fn read_spectrum(path: &Path, model_id: &str) -> Result<SpectrumRecord> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spectrum(&text, path, model_id)
}

pub(crate) fn parse_spectrum(text: &str, path: &Path, model_id: &str) -> Result<SpectrumRecord> {
    let mut wavelengths = Vec::new();
    let mut flux = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(parse_err(format!("expected 2 columns, found {}", fields.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| parse_err(format!("{s:?}: {e}")));
        wavelengths.push(parse(fields[0])?);
        flux.push(parse(fields[1])?);
    }
    if wavelengths.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no samples".into(),
        });
    }
    SpectrumRecord::new(model_id, wavelengths, flux)
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    model_id: String,
    file: String,
    t_star: f64,
    log_rt: f64,
}

/// Loads every spectrum named in the manifest. File paths are relative to `spectra_dir`.
///
/// All spectra must share one wavelength grid.
pub fn load_grid(manifest_path: &Path, spectra_dir: &Path) -> Result<(Vec<SpectrumRecord>, ParameterTable)> {
    if !manifest_path.is_file() {
        return Err(Error::MissingFile(manifest_path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(manifest_path)
        .map_err(|e| csv_error(manifest_path, e))?;

    let mut records: Vec<SpectrumRecord> = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| csv_error(manifest_path, e))?;
        if !seen.insert(row.model_id.clone()) {
            return Err(Error::DuplicateModel(row.model_id));
        }
        let path = resolve(spectra_dir, &row.file);
        let record = read_spectrum(&path, &row.model_id)?;
        if let Some(first) = records.first() {
            if first.wavelengths != record.wavelengths {
                return Err(Error::GridMismatch {
                    model_id: record.model_id,
                    reference: first.model_id.clone(),
                });
            }
        }
        records.push(record);
        rows.push(ParameterRow {
            model_id: row.model_id,
            t_star: row.t_star,
            log_rt: row.log_rt,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((records, ParameterTable::new(rows)?))
}

fn resolve(dir: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Windowed curves paired with their targets, in matching order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub curves: Vec<WindowedSpectrum>,
    pub params: ParameterTable,
}

impl Dataset {
    pub fn new(curves: Vec<WindowedSpectrum>, params: ParameterTable) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if curves.len() != params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} curves but {} parameter rows",
                curves.len(),
                params.len()
            )));
        }
        let windows = curves[0].windows();
        for (curve, row) in curves.iter().zip(params.rows()) {
            if curve.model_id != row.model_id {
                return Err(Error::UnknownModel(row.model_id.clone()));
            }
            if curve.windows() != windows {
                return Err(Error::DimensionMismatch(format!(
                    "{} uses a different window list",
                    curve.model_id
                )));
            }
        }
        Ok(Dataset { curves, params })
    }

    /// Loads a grid and extracts the given windows from every spectrum.
    pub fn load(manifest: &Path, spectra_dir: &Path, windows: &[LineWindow]) -> Result<Self> {
        let (records, params) = load_grid(manifest, spectra_dir)?;
        let curves = records
            .iter()
            .map(|r| extract_windows(r, windows))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(curves, params)
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn windows(&self) -> Vec<LineWindow> {
        self.curves[0].windows()
    }

    pub fn targets(&self) -> Targets {
        self.params.targets()
    }

    pub fn ids(&self) -> Vec<String> {
        self.curves.iter().map(|c| c.model_id.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn record(lo: f64, hi: f64, n: usize) -> SpectrumRecord {
        let w: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let f = w.iter().map(|x| 1.0 - 0.001 * (x - lo)).collect();
        SpectrumRecord::new("m", w, f).unwrap()
    }

    #[test]
    fn default_windows_layout() {
        let w = default_windows();
        assert_eq!(w.len(), 10);
        assert_eq!(
            w[0],
            LineWindow {
                lower: 6500.0,
                upper: 6600.0
            }
        );
        let narrowest = w.iter().map(LineWindow::width).fold(f64::INFINITY, f64::min);
        assert_eq!(narrowest, 25.0);
        for (i, a) in w.iter().enumerate() {
            for b in &w[i + 1..] {
                let overlap = a.upper.min(b.upper) - a.lower.max(b.lower);
                assert!(overlap <= 0.0, "{a:?} overlaps {b:?}");
            }
        }
    }

    #[test]
    fn identity_restriction() {
        let r = record(6500.0, 6600.0, 101);
        let ws = extract_windows(&r, &[LineWindow::new(6500.0, 6600.0).unwrap()]).unwrap();
        assert_eq!(ws.segments.len(), 1);
        assert_eq!(ws.segments[0].wavelengths, r.wavelengths);
        assert_eq!(ws.segments[0].flux, r.flux);
    }

    #[test]
    fn out_of_range_window_is_empty() {
        let r = record(4000.0, 7000.0, 3001);
        let err = extract_windows(&r, &[LineWindow::new(9000.0, 9100.0).unwrap()]).unwrap_err();
        assert!(matches!(err, Error::EmptyWindow { .. }));
        assert!(err.to_string().contains("empty window"));
    }

    #[test]
    fn closed_bounds() {
        let r = record(4000.0, 7000.0, 3001);
        let ws = extract_windows(&r, &[LineWindow::new(4900.0, 4940.0).unwrap()]).unwrap();
        let seg = &ws.segments[0];
        assert_eq!(seg.wavelengths.first(), Some(&4900.0));
        assert_eq!(seg.wavelengths.last(), Some(&4940.0));
        assert_eq!(seg.len(), 41);
    }

    #[test]
    fn standardize_hand_example() {
        let table = ParameterTable::new(
            (1..=3)
                .map(|i| ParameterRow {
                    model_id: format!("m{i}"),
                    t_star: i as f64,
                    log_rt: (i * i) as f64,
                })
                .collect(),
        )
        .unwrap();
        let (scaled, scaling) = standardize_targets(&table).unwrap();
        assert_eq!(scaling.means[0], 2.0);
        assert!((scaling.std_devs[0] - 1.0).abs() < 1e-15);
        let t: Vec<f64> = scaled.rows().iter().map(|r| r.t_star).collect();
        assert_eq!(t, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardize_is_idempotent_on_standard_columns() {
        let table = ParameterTable::new(vec![
            ParameterRow {
                model_id: "a".into(),
                t_star: -1.0,
                log_rt: 1.0,
            },
            ParameterRow {
                model_id: "b".into(),
                t_star: 0.0,
                log_rt: 0.0,
            },
            ParameterRow {
                model_id: "c".into(),
                t_star: 1.0,
                log_rt: -1.0,
            },
        ])
        .unwrap();
        let (scaled, scaling) = standardize_targets(&table).unwrap();
        assert!(scaling.means.iter().all(|m| m.abs() < 1e-12));
        assert!(scaling.std_devs.iter().all(|s| (s - 1.0).abs() < 1e-12));
        for (a, b) in scaled.rows().iter().zip(table.rows()) {
            assert!((a.t_star - b.t_star).abs() < 1e-12);
            assert!((a.log_rt - b.log_rt).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_rejected() {
        let table = ParameterTable::new(vec![
            ParameterRow {
                model_id: "a".into(),
                t_star: 5.0,
                log_rt: 1.0,
            },
            ParameterRow {
                model_id: "b".into(),
                t_star: 5.0,
                log_rt: 2.0,
            },
        ])
        .unwrap();
        assert!(matches!(standardize_targets(&table), Err(Error::ZeroVariance(0))));
    }

    #[test]
    fn destandardize_examples() {
        let s = TargetScaling::new([50.0, 0.5], [10.0, 0.2]).unwrap();
        assert_eq!(destandardize_predictions([0.0, 0.0], &s), [50.0, 0.5]);
        let id = TargetScaling::new([0.0, 0.0], [1.0, 1.0]).unwrap();
        assert_eq!(destandardize_predictions([1.0, -1.0], &id), [1.0, -1.0]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let rows = vec![
            ParameterRow {
                model_id: "a".into(),
                t_star: 1.0,
                log_rt: 1.0,
            },
            ParameterRow {
                model_id: "a".into(),
                t_star: 2.0,
                log_rt: 2.0,
            },
        ];
        assert!(matches!(ParameterTable::new(rows), Err(Error::DuplicateModel(_))));
    }

    #[test]
    fn non_monotone_rejected() {
        let err = SpectrumRecord::new("x", vec![1.0, 3.0, 2.0], vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::NonMonotone { index: 2, .. }));
    }

    #[test]
    fn parse_comma_and_whitespace() {
        let text = "# header\n4000.0, 1.0\n4001.0\t0.9\n\n4002.0   0.8\n";
        let r = parse_spectrum(text, Path::new("x.txt"), "x").unwrap();
        assert_eq!(r.wavelengths, vec![4000.0, 4001.0, 4002.0]);
        assert_eq!(r.flux, vec![1.0, 0.9, 0.8]);
        let bad = parse_spectrum("4000 1 2\n", Path::new("x.txt"), "x").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn load_grid_errors() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.csv");
        fs::write(&manifest, "model_id,file,t_star,log_rt\n").unwrap();
        assert!(matches!(load_grid(&manifest, dir.path()), Err(Error::EmptyDataset)));

        fs::write(&manifest, "model_id,file,t_star,log_rt\na,absent.txt,50,0.5\n").unwrap();
        let err = load_grid(&manifest, dir.path()).unwrap_err();
        assert!(err.to_string().contains("absent.txt"));

        let mut f = fs::File::create(dir.path().join("a.txt")).unwrap();
        writeln!(f, "1 1\n2 1\n3 1").unwrap();
        let mut f = fs::File::create(dir.path().join("b.txt")).unwrap();
        writeln!(f, "1 1\n2 1\n4 1").unwrap();
        fs::write(
            &manifest,
            "model_id,file,t_star,log_rt\na,a.txt,50,0.5\nb,b.txt,60,0.6\n",
        )
        .unwrap();
        assert!(matches!(
            load_grid(&manifest, dir.path()),
            Err(Error::GridMismatch { .. })
        ));

        fs::write(
            &manifest,
            "model_id,file,t_star,log_rt\na,a.txt,50,0.5\na,a.txt,60,0.6\n",
        )
        .unwrap();
        assert!(matches!(
            load_grid(&manifest, dir.path()),
            Err(Error::DuplicateModel(_))
        ));
    }
}
