//! Synthetic spectra grids with a planted functional linear model.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{build_design_matrix, fourier_basis_eval, BasisSpec, DesignMatrix};
use crate::dataset::{default_windows, Dataset, LineWindow, ParameterRow, ParameterTable, Segment, WindowedSpectrum};
use crate::error::{Error, Result};
use crate::regress::{FitSpec, LinearModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub windows: Vec<LineWindow>,
    pub samples_per_window: usize,
    /// Fourier size of the planted coefficient functions.
    pub true_p: usize,
    /// Fourier terms in each simulated curve; at least `true_p`, so that designs larger
    /// than the planted size stay well conditioned.
    pub curve_terms: usize,
    /// Amplitude of the curve terms beyond `true_p`, relative to the leading ones.
    pub tail_amplitude: f64,
    /// Planted coefficients per window and basis function; drawn at random when absent.
    pub coefficients: Option<Vec<Vec<[f64; 2]>>>,
    pub intercepts: [f64; 2],
    /// Standard deviation of the noise-free targets' linear part when coefficients are drawn.
    pub signal_scale: [f64; 2],
    pub noise_sigma: [f64; 2],
    pub outlier_fraction: f64,
    pub continuum: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 126,
            windows: default_windows(),
            samples_per_window: 200,
            true_p: 7,
            curve_terms: 35,
            tail_amplitude: 0.5,
            coefficients: None,
            intercepts: [40.0, 1.0],
            signal_scale: [5.0, 0.3],
            noise_sigma: [0.5, 0.03],
            outlier_fraction: 0.0,
            continuum: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn new(n: usize, true_p: usize, seed: u64) -> Self {
        SynthSpec {
            n,
            true_p,
            seed,
            ..SynthSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 2 {
            return bad(format!("need at least 2 curves, got {}", self.n));
        }
        if self.windows.is_empty() {
            return bad("no windows".into());
        }
        BasisSpec::fourier(self.true_p)?;
        BasisSpec::fourier(self.curve_terms)?;
        if self.curve_terms < self.true_p {
            return bad(format!("curve_terms {} below true_p {}", self.curve_terms, self.true_p));
        }
        if self.samples_per_window < 2 {
            return bad("need at least 2 samples per window".into());
        }
        if self.noise_sigma.iter().any(|s| !(*s >= 0.0)) {
            return bad(format!("noise sigma must be non-negative, got {:?}", self.noise_sigma));
        }
        if !(0.0..0.5).contains(&self.outlier_fraction) {
            return bad(format!(
                "outlier fraction must lie in [0, 0.5), got {}",
                self.outlier_fraction
            ));
        }
        if let Some(c) = &self.coefficients {
            if c.len() != self.windows.len() || c.iter().any(|w| w.len() != self.true_p) {
                return bad("coefficients must be windows × true_p".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticGrid {
    pub curves: Vec<WindowedSpectrum>,
    pub params: ParameterTable,
    /// The generating model on the Fourier basis of size `true_p`.
    pub truth: LinearModel,
    /// Rows whose targets were multiplied by ten.
    pub outliers: Vec<usize>,
}

impl SyntheticGrid {
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.curves.clone(), self.params.clone())
    }

    /// Writes one two-column spectrum file per curve plus a manifest, in the format read
    /// by [`crate::dataset::load_grid`]. Returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let spectra = dir.join("spectra");
        fs::create_dir_all(&spectra).map_err(|e| Error::io(&spectra, e))?;
        let manifest = dir.join("manifest.csv");
        let mut out = String::from("model_id,file,t_star,log_rt\n");
        for (curve, row) in self.curves.iter().zip(self.params.rows()) {
            let name = format!("{}.dat", curve.model_id);
            let path = spectra.join(&name);
            let file = format!("spectra/{name}");
            let mut points: Vec<(f64, f64)> = curve
                .segments
                .iter()
                .flat_map(|s| s.wavelengths.iter().copied().zip(s.flux.iter().copied()))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            if points.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidArgument(format!(
                    "{} has overlapping windows",
                    curve.model_id
                )));
            }
            let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut body = String::from("# wavelength flux\n");
            for (w, v) in points {
                body.push_str(&format!("{w} {v}\n"));
            }
            f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))?;
            out.push_str(&format!("{},{},{},{}\n", row.model_id, file, row.t_star, row.log_rt));
        }
        fs::write(&manifest, out).map_err(|e| Error::io(&manifest, e))?;
        Ok(manifest)
    }
}

/// Draws curves as random Fourier expansions on each window, sampled at cell midpoints,
/// and targets as `α + Σⱼ ⟨βⱼ, Xⱼ⟩ + ε` with the inner products computed exactly as the
/// design matrix computes them.
pub fn generate(spec: &SynthSpec) -> Result<SyntheticGrid> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.windows.len();
    let curve_basis = BasisSpec::fourier(spec.curve_terms)?;
    let truth_basis = BasisSpec::fourier(spec.true_p)?;

    let grids: Vec<Vec<f64>> = spec
        .windows
        .iter()
        .map(|w| {
            let h = w.width() / spec.samples_per_window as f64;
            (0..spec.samples_per_window)
                .map(|i| w.lower + (i as f64 + 0.5) * h)
                .collect()
        })
        .collect();
    let basis_values: Vec<Vec<Vec<f64>>> = spec
        .windows
        .iter()
        .zip(&grids)
        .map(|(w, g)| {
            g.iter()
                .map(|&t| fourier_basis_eval(&curve_basis, w, t))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let curves: Vec<WindowedSpectrum> = (0..spec.n)
        .map(|i| {
            let segments = (0..m)
                .map(|j| {
                    let amps: Vec<f64> = (0..spec.curve_terms)
                        .map(|k| {
                            let z: f64 = rng.sample(StandardNormal);
                            if k < spec.true_p {
                                z
                            } else {
                                spec.tail_amplitude * z
                            }
                        })
                        .collect();
                    let flux = basis_values[j]
                        .iter()
                        .map(|phi| spec.continuum + phi.iter().zip(&amps).map(|(a, b)| a * b).sum::<f64>())
                        .collect();
                    Segment {
                        window: spec.windows[j],
                        wavelengths: grids[j].clone(),
                        flux,
                    }
                })
                .collect();
            WindowedSpectrum {
                model_id: format!("syn{i:04}"),
                segments,
            }
        })
        .collect();

    let coefficients = match &spec.coefficients {
        Some(c) => c.clone(),
        None => {
            let scale = (m * spec.true_p) as f64;
            (0..m)
                .map(|_| {
                    (0..spec.true_p)
                        .map(|_| {
                            [0, 1].map(|l| {
                                let z: f64 = rng.sample(StandardNormal);
                                z * spec.signal_scale[l] / scale.sqrt()
                            })
                        })
                        .collect()
                })
                .collect()
        }
    };
    let beta = DMatrix::from_fn(m * spec.true_p, 2, |r, l| {
        coefficients[r / spec.true_p][r % spec.true_p][l]
    });

    let design: DesignMatrix = build_design_matrix(&curves, &truth_basis)?;
    let mut targets = &design.entries * &beta;
    for i in 0..spec.n {
        for l in 0..2 {
            let e: f64 = rng.sample(StandardNormal);
            targets[(i, l)] += spec.intercepts[l] + spec.noise_sigma[l] * e;
        }
    }
    let n_out = (spec.outlier_fraction * spec.n as f64).floor() as usize;
    let mut outliers = sample(&mut rng, spec.n, n_out).into_vec();
    outliers.sort_unstable();
    for &i in &outliers {
        targets[(i, 0)] *= 10.0;
        targets[(i, 1)] *= 10.0;
    }

    let rows = curves
        .iter()
        .enumerate()
        .map(|(i, c)| ParameterRow {
            model_id: c.model_id.clone(),
            t_star: targets[(i, 0)],
            log_rt: targets[(i, 1)],
        })
        .collect();
    let params = ParameterTable::new(rows)?;

    let mut truth = LinearModel::from_parts(spec.intercepts, beta, FitSpec::ols());
    truth.basis = Some(truth_basis);
    truth.columns = design.columns.clone();
    truth.windows = spec.windows.clone();

    Ok(SyntheticGrid {
        curves,
        params,
        truth,
        outliers,
    })
}
