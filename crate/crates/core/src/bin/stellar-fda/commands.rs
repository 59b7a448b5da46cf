use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use stellar_fda::basis::{build_design_matrix, BasisKind, BasisSpec, DesignMatrix};
use stellar_fda::dataset::{default_windows, extract_windows, read_spectrum, Dataset, LineWindow, SpectrumRecord};
use stellar_fda::intervals::{
    bootstrap_draws, coverage_loo, interval_from_draws, BootstrapConfig, IntervalRecord, DEFAULT_REPLICATES,
};
use stellar_fda::regress::{fit_design, predict_design, FitSpec, LinearModel, Method, TargetMode};
use stellar_fda::select::{astro_baseline_eval, evaluate, p_grid, render_table, EvalOptions, EvalReport, GammaMode};
use stellar_fda::synth::{generate, SynthSpec};
use stellar_fda::{Error, Result};

use crate::args::*;
use crate::config::{pick, Config};

const DEFAULT_P: usize = 7;
const DEFAULT_ALPHA: f64 = 0.05;
const LEAST_SQUARES_P_CAP: usize = 13;
const DATA_KEYS: [&str; 2] = ["manifest", "spectra_dir"];
const MODEL_KEYS: [&str; 7] = [
    "basis",
    "method",
    "target_mode",
    "lambda_grid",
    "huber_k",
    "max_iter",
    "tol",
];

pub fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    if let Some(threads) = pick(cli.threads, config.value("threads")?) {
        if threads == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Ingest(a) => ingest(a, &config),
        Command::Evaluate(a) => cmd_evaluate(a, &config),
        Command::Fit(a) => cmd_fit(a, &config),
        Command::Predict(a) => cmd_predict(a, &config),
        Command::Intervals(a) => cmd_intervals(a, &config),
        Command::Coverage(a) => cmd_coverage(a, &config),
        Command::Baseline(a) => cmd_baseline(a, &config),
        Command::Synth(a) => cmd_synth(a, &config),
    }
}

fn keys<'a>(groups: &[&[&'a str]]) -> Vec<&'a str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgument(format!("{flag} is required")))
}

fn timed<T>(phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    eprintln!("timing {phase}: {:.3} s", start.elapsed().as_secs_f64());
    out
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn windows(config: &Config) -> Result<Vec<LineWindow>> {
    match config.value::<Vec<[f64; 2]>>("windows")? {
        Some(pairs) => pairs.iter().map(|[a, b]| LineWindow::new(*a, *b)).collect(),
        None => Ok(default_windows()),
    }
}

fn load_data(data: &DataArgs, config: &Config) -> Result<Dataset> {
    let manifest = required(pick(data.manifest.clone(), config.path("manifest")?), "--manifest")?;
    let dir = pick(data.spectra_dir.clone(), config.path("spectra_dir")?)
        .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
    let windows = windows(config)?;
    timed("load", || Dataset::load(&manifest, &dir, &windows))
}

struct ModelChoice {
    kind: BasisKind,
    spec: FitSpec,
    mode: TargetMode,
}

fn model_choice(args: &ModelArgs, config: &Config, seed: Option<u64>) -> Result<ModelChoice> {
    let kind = pick(args.basis, config.parsed("basis")?).unwrap_or(BasisKind::Fourier);
    let method = pick(args.method, config.parsed("method")?).unwrap_or(Method::Ols);
    let mode = pick(args.target_mode, config.parsed("target_mode")?).unwrap_or(TargetMode::Brut);
    let grid = pick(args.lambda_grid.clone(), config.value("lambda_grid")?);
    let spec = fit_spec(method, grid, &solver(&args.solver, config)?, seed)?;
    Ok(ModelChoice { kind, spec, mode })
}

fn solver(args: &SolverArgs, config: &Config) -> Result<SolverArgs> {
    Ok(SolverArgs {
        huber_k: pick(args.huber_k, config.value("huber_k")?),
        max_iter: pick(args.max_iter, config.value("max_iter")?),
        tol: pick(args.tol, config.value("tol")?),
    })
}

fn fit_spec(method: Method, grid: Option<Vec<f64>>, solver: &SolverArgs, seed: Option<u64>) -> Result<FitSpec> {
    let mut spec = FitSpec::for_method(method);
    if let Some(g) = grid {
        spec.lambda_grid = g;
    }
    spec.huber_k = solver.huber_k.unwrap_or(spec.huber_k);
    spec.max_iter = solver.max_iter.unwrap_or(spec.max_iter);
    spec.tol = solver.tol.unwrap_or(spec.tol);
    if method.is_penalized() && spec.lambda_grid.len() > 1 {
        spec.cv_seed = required(seed, "--seed (λ cross-validation)")?;
    } else if let Some(s) = seed {
        spec.cv_seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn project(curves: &[stellar_fda::dataset::WindowedSpectrum], kind: BasisKind, p: usize) -> Result<DesignMatrix> {
    let basis = BasisSpec::new(kind, p)?;
    timed("projection", || build_design_matrix(curves, &basis))
}

fn ingest(a: IngestArgs, config: &Config) -> Result<()> {
    config.check_keys("ingest", &keys(&[&DATA_KEYS, &["basis", "p", "out"]]))?;
    let data = load_data(&a.data, config)?;
    let kind = pick(a.basis, config.parsed("basis")?).unwrap_or(BasisKind::Fourier);
    let p = pick(a.p, config.value("p")?).unwrap_or(DEFAULT_P);
    let design = project(&data.curves, kind, p)?;
    println!(
        "{} spectra, {} windows, {kind} basis p={p}, design {} x {}",
        data.len(),
        data.windows().len(),
        design.nrows(),
        design.ncols()
    );
    if let Some(out) = pick(a.out, config.path("out")?) {
        let file = fs::File::create(&out).map_err(|e| Error::Io {
            path: out.clone(),
            source: e,
        })?;
        design
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::Io { path: out, source: e })?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, config: &Config) -> Result<()> {
    config.check_keys(
        "evaluate",
        &keys(&[
            &DATA_KEYS,
            &MODEL_KEYS,
            &["p_max", "gamma_mode", "no_baseline", "seed", "out", "table"],
        ]),
    )?;
    let seed = required(pick(a.seed, config.value("seed")?), "--seed")?;
    let bases = pick(a.bases, config.parsed_list("basis")?).unwrap_or_else(|| vec![BasisKind::Fourier]);
    let methods = pick(a.methods, config.parsed_list("method")?).unwrap_or_else(|| Method::ALL.to_vec());
    let modes = pick(a.target_modes, config.parsed_list("target_mode")?)
        .unwrap_or_else(|| vec![TargetMode::Brut, TargetMode::Norm]);
    let lambda_grid = pick(a.lambda_grid, config.value("lambda_grid")?);
    let solver = solver(&a.solver, config)?;
    let p_max: Option<usize> = pick(a.p_max, config.value("p_max")?);
    let gamma_mode = pick(a.gamma_mode, config.parsed("gamma_mode")?).unwrap_or(GammaMode::Full);
    let no_baseline = a.no_baseline || config.value("no_baseline")?.unwrap_or(false);
    if let Some(cap) = p_max {
        if cap > LEAST_SQUARES_P_CAP {
            if let Some(m) = methods.iter().find(|m| matches!(m, Method::Ols | Method::Robust)) {
                return Err(Error::InvalidArgument(format!(
                    "--p-max {cap} exceeds {LEAST_SQUARES_P_CAP}, the largest size identifiable for {m}"
                )));
            }
        }
    }
    let data = load_data(&a.data, config)?;

    let mut reports: Vec<EvalReport> = Vec::new();
    let mut options = EvalOptions::new(seed);
    options.gamma_mode = gamma_mode;
    if !no_baseline {
        reports.push(timed("baseline", || astro_baseline_eval(&data, &options))?);
    }
    for &kind in &bases {
        for &method in &methods {
            let spec = fit_spec(method, lambda_grid.clone(), &solver, Some(seed))?;
            let mut grid = p_grid(method, kind);
            if let Some(cap) = p_max {
                grid.retain(|&p| p <= cap);
            }
            if grid.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no {kind} basis size up to --p-max for {method}"
                )));
            }
            let mut cell_options = options.clone();
            cell_options.p_grid = Some(grid);
            for &mode in &modes {
                let mut report = timed(&format!("evaluate {kind} {method} {mode}"), || {
                    evaluate(&data, kind, &spec, mode, &cell_options)
                })?;
                if bases.len() > 1 {
                    report.label = format!("{kind} {}", report.label);
                }
                reports.push(report);
            }
        }
    }
    let table = render_table(&reports);
    print!("{table}");
    if let Some(path) = pick(a.table, config.path("table")?) {
        write_text(Some(&path), &table)?;
    }
    if let Some(path) = pick(a.out, config.path("out")?) {
        write_text(Some(&path), &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    }
    Ok(())
}

fn cmd_fit(a: FitArgs, config: &Config) -> Result<()> {
    config.check_keys("fit", &keys(&[&DATA_KEYS, &MODEL_KEYS, &["p", "seed", "out"]]))?;
    let seed = pick(a.seed, config.value("seed")?);
    let choice = model_choice(&a.model, config, seed)?;
    let p = pick(a.p, config.value("p")?).unwrap_or(DEFAULT_P);
    let data = load_data(&a.data, config)?;
    let design = project(&data.curves, choice.kind, p)?;
    let targets = data.targets();
    let model = timed("fit", || fit_design(&design, &targets, &choice.spec, choice.mode, None))?;
    if let Some(l) = model.chosen_lambda {
        eprintln!("chosen lambda: {} {}", l[0], l[1]);
    }
    let json = model.to_json()? + "\n";
    write_text(pick(a.out, config.path("out")?).as_deref(), &json)
}

/// Query spectra from `--query` files (model_id = file stem) and a query manifest.
fn read_queries(args: &QueryArgs, config: &Config) -> Result<Vec<SpectrumRecord>> {
    let mut out = Vec::new();
    for path in &args.queries {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        out.push(read_spectrum(path, &id)?);
    }
    if let Some(manifest) = pick(args.query_manifest.clone(), config.path("query_manifest")?) {
        let dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
        let parse_error = |line: usize, message: String| Error::Parse {
            path: manifest.clone(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(&manifest)
            .map_err(|e| parse_error(0, e.to_string()))?;
        let headers = reader.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_error(1, format!("missing column {name}")))
        };
        let (id_col, file_col) = (column("model_id")?, column("file")?);
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                parse_error(line, e.to_string())
            })?;
            let file = PathBuf::from(&row[file_col]);
            let path = if file.is_absolute() { file } else { dir.join(file) };
            out.push(read_spectrum(&path, &row[id_col])?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(
            "no query spectra: use --query or --query-manifest".into(),
        ));
    }
    Ok(out)
}

fn cmd_predict(a: PredictArgs, config: &Config) -> Result<()> {
    config.check_keys("predict", &["model", "query_manifest", "out"])?;
    let model_path = required(pick(a.model, config.path("model")?), "--model")?;
    let model = LinearModel::load(&model_path)?;
    let basis = model
        .basis
        .ok_or_else(|| Error::InvalidArgument(format!("{} carries no basis", model_path.display())))?;
    let queries = timed("load", || read_queries(&a.query, config))?;
    let design = timed("projection", || {
        let curves = queries
            .iter()
            .map(|q| extract_windows(q, &model.windows))
            .collect::<Result<Vec<_>>>()?;
        build_design_matrix(&curves, &basis)
    })?;
    let yhat = timed("prediction", || predict_design(&model, &design))?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    writer.write_record(["model_id", "t_star", "log_rt"]).map_err(io_err)?;
    for (i, q) in queries.iter().enumerate() {
        writer
            .write_record([q.model_id.clone(), yhat[(i, 0)].to_string(), yhat[(i, 1)].to_string()])
            .map_err(io_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_text(
        pick(a.out, config.path("out")?).as_deref(),
        &String::from_utf8_lossy(&bytes),
    )
}

fn bootstrap_settings(
    alpha: Option<f64>,
    replicates: Option<usize>,
    seed: Option<u64>,
    config: &Config,
) -> Result<BootstrapConfig> {
    let alpha = pick(alpha, config.value("alpha")?).unwrap_or(DEFAULT_ALPHA);
    let replicates = pick(replicates, config.value("replicates")?).unwrap_or(DEFAULT_REPLICATES);
    let seed = required(pick(seed, config.value("seed")?), "--seed")?;
    BootstrapConfig::new(alpha, replicates, seed)
}

fn cmd_intervals(a: IntervalsArgs, config: &Config) -> Result<()> {
    config.check_keys(
        "intervals",
        &keys(&[
            &DATA_KEYS,
            &MODEL_KEYS,
            &["p", "query_manifest", "alpha", "replicates", "seed", "out"],
        ]),
    )?;
    let boot = bootstrap_settings(a.alpha, a.replicates, a.seed, config)?;
    let choice = model_choice(&a.model, config, Some(boot.seed))?;
    let p = pick(a.p, config.value("p")?).unwrap_or(DEFAULT_P);
    let data = load_data(&a.data, config)?;
    let queries = read_queries(&a.query, config)?;
    let design = project(&data.curves, choice.kind, p)?;
    let query_curves = queries
        .iter()
        .map(|q| extract_windows(q, &data.windows()))
        .collect::<Result<Vec<_>>>()?;
    let query_design = build_design_matrix(&query_curves, &design.basis)?;
    let targets = data.targets();
    let records = timed("bootstrap", || {
        let mut records = Vec::new();
        for (i, q) in queries.iter().enumerate() {
            let row: Vec<f64> = query_design.entries.row(i).iter().copied().collect();
            let draws = bootstrap_draws(
                &design.entries,
                &targets,
                &choice.spec,
                choice.mode,
                &row,
                boot.replicates,
                boot.seed,
            )?;
            for iv in interval_from_draws(&draws, boot.alpha)? {
                let lambda = draws.lambdas.map(|l| l[iv.target - 1]);
                records.push(IntervalRecord::new(&q.model_id, &iv, choice.spec.method, p, lambda));
            }
        }
        Ok(records)
    })?;
    write_text(
        pick(a.out, config.path("out")?).as_deref(),
        &(serde_json::to_string_pretty(&records)? + "\n"),
    )
}

fn cmd_coverage(a: CoverageArgs, config: &Config) -> Result<()> {
    config.check_keys(
        "coverage",
        &keys(&[&DATA_KEYS, &MODEL_KEYS, &["p", "alpha", "replicates", "seed", "out"]]),
    )?;
    let boot = bootstrap_settings(a.alpha, a.replicates, a.seed, config)?;
    let choice = model_choice(&a.model, config, Some(boot.seed))?;
    let p = pick(a.p, config.value("p")?).unwrap_or(DEFAULT_P);
    let data = load_data(&a.data, config)?;
    let coverage = timed("coverage", || {
        coverage_loo(&data, choice.kind, p, &choice.spec, choice.mode, &boot)
    })?;
    println!("coverage T*: {:.3}", coverage[0]);
    println!("coverage log10 Rt: {:.3}", coverage[1]);
    if let Some(path) = pick(a.out, config.path("out")?) {
        let doc = serde_json::json!({
            "coverage": coverage,
            "alpha": boot.alpha,
            "T": boot.replicates,
            "seed": boot.seed,
            "method": choice.spec.method,
            "basis": choice.kind,
            "p": p,
            "target_mode": choice.mode,
            "n": data.len(),
        });
        write_text(Some(&path), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(())
}

fn cmd_baseline(a: BaselineArgs, config: &Config) -> Result<()> {
    config.check_keys("baseline", &keys(&[&DATA_KEYS, &["gamma_mode", "seed", "out"]]))?;
    let seed = required(pick(a.seed, config.value("seed")?), "--seed")?;
    let mut options = EvalOptions::new(seed);
    options.gamma_mode = pick(a.gamma_mode, config.parsed("gamma_mode")?).unwrap_or(GammaMode::Full);
    let data = load_data(&a.data, config)?;
    let report = timed("baseline", || astro_baseline_eval(&data, &options))?;
    print!("{}", render_table(std::slice::from_ref(&report)));
    if let Some(path) = pick(a.out, config.path("out")?) {
        write_text(Some(&path), &(report.to_json()? + "\n"))?;
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs, config: &Config) -> Result<()> {
    config.check_keys(
        "synth",
        &[
            "n",
            "true_p",
            "window_count",
            "samples_per_window",
            "noise",
            "outlier_fraction",
            "seed",
            "out",
        ],
    )?;
    let seed = required(pick(a.seed, config.value("seed")?), "--seed")?;
    let out = required(pick(a.out, config.path("out")?), "--out")?;
    let mut spec = SynthSpec {
        seed,
        ..SynthSpec::default()
    };
    if let Some(n) = pick(a.n, config.value("n")?) {
        spec.n = n;
    }
    if let Some(p) = pick(a.true_p, config.value("true_p")?) {
        spec.true_p = p;
    }
    let all = default_windows();
    let count = pick(a.window_count, config.value("window_count")?).unwrap_or(all.len());
    if count == 0 || count > all.len() {
        return Err(Error::InvalidArgument(format!(
            "--window-count must lie in 1..={}",
            all.len()
        )));
    }
    spec.windows = all[..count].to_vec();
    if let Some(s) = pick(a.samples_per_window, config.value("samples_per_window")?) {
        spec.samples_per_window = s;
    }
    if let Some(noise) = pick(a.noise, config.value::<Vec<f64>>("noise")?) {
        if noise.len() != 2 {
            return Err(Error::InvalidArgument("--noise takes two values".into()));
        }
        spec.noise_sigma = [noise[0], noise[1]];
    }
    if let Some(f) = pick(a.outlier_fraction, config.value("outlier_fraction")?) {
        spec.outlier_fraction = f;
    }
    let grid = timed("generate", || generate(&spec))?;
    fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let manifest = grid.write(&out)?;
    grid.truth.save(&out.join("truth.json"))?;
    let pairs: Vec<String> = spec
        .windows
        .iter()
        .map(|w| format!("[{}, {}]", w.lower, w.upper))
        .collect();
    let grid_config = format!("manifest = \"manifest.csv\"\nwindows = [{}]\n", pairs.join(", "));
    write_text(Some(&out.join("grid.toml")), &grid_config)?;
    println!("wrote {} spectra to {}", spec.n, manifest.display());
    Ok(())
}
