//! C ABI over `stellar-fda`.
//!
//! Datasets and models are opaque heap handles released with their `_free` function.
//! Every call returns an [`SfdaStatus`]; on failure [`sfda_last_error`] describes the
//! problem. Strings handed out by the library are released with [`sfda_string_free`].
//! Panics are caught at the boundary and reported as [`SfdaStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use libc::{c_char, size_t};
use stellar_fda::basis::{build_design_matrix, BasisKind, BasisSpec};
use stellar_fda::dataset::{default_windows, extract_windows, Dataset, SpectrumRecord};
use stellar_fda::regress::{fit_design, predict_design, FitSpec, LinearModel, Method, TargetMode};
use stellar_fda::select::{evaluate, EvalOptions};
use stellar_fda::synth::{generate, SynthSpec};
use stellar_fda::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfdaStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad arguments or malformed input data.
    InvalidInput = 2,
    /// Rank deficiency, non-convergence and other numerical failures.
    Numeric = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfdaBasis {
    Fourier = 0,
    Bspline = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfdaMethod {
    Ols = 0,
    Robust = 1,
    Ridge = 2,
    Lasso = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfdaTargetMode {
    Brut = 0,
    Norm = 1,
}

/// Loaded or generated spectra with their two targets.
pub struct SfdaDataset(Dataset);

/// Fitted linear model with its basis and window layout.
pub struct SfdaModel(LinearModel);

impl From<SfdaBasis> for BasisKind {
    fn from(b: SfdaBasis) -> Self {
        match b {
            SfdaBasis::Fourier => BasisKind::Fourier,
            SfdaBasis::Bspline => BasisKind::BSpline,
        }
    }
}

impl From<SfdaMethod> for Method {
    fn from(m: SfdaMethod) -> Self {
        match m {
            SfdaMethod::Ols => Method::Ols,
            SfdaMethod::Robust => Method::Robust,
            SfdaMethod::Ridge => Method::Ridge,
            SfdaMethod::Lasso => Method::Lasso,
        }
    }
}

impl From<SfdaTargetMode> for TargetMode {
    fn from(m: SfdaTargetMode) -> Self {
        match m {
            SfdaTargetMode::Brut => TargetMode::Brut,
            SfdaTargetMode::Norm => TargetMode::Norm,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let clean = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn status_of(e: &Error) -> SfdaStatus {
    match e {
        Error::Io { .. } | Error::MissingFile(_) => SfdaStatus::Io,
        e if e.is_input_error() => SfdaStatus::InvalidInput,
        _ => SfdaStatus::Numeric,
    }
}

/// Runs `f`, records any error and converts panics.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> SfdaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SfdaStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            SfdaStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {message}"));
            SfdaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Core(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Core(Error::InvalidArgument("string contains a NUL byte".into())))
}

/// Message of the last failed call on this thread; empty after a successful call.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sfda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sfda_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a manifest (`model_id,file,t_star,log_rt`) and its spectra over the default
/// line windows. `spectra_dir` may be null, meaning the manifest's directory.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfda_dataset_load(
    manifest: *const c_char,
    spectra_dir: *const c_char,
    out: *mut *mut SfdaDataset,
) -> SfdaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let manifest = PathBuf::from(str_arg(manifest, "manifest")?);
        let dir = if spectra_dir.is_null() {
            manifest.parent().map(Path::to_path_buf).unwrap_or_default()
        } else {
            PathBuf::from(str_arg(spectra_dir, "spectra_dir")?)
        };
        let data = Dataset::load(&manifest, &dir, &default_windows())?;
        *out = Box::into_raw(Box::new(SfdaDataset(data)));
        Ok(())
    })
}

/// Generates a synthetic grid with a planted linear model over the first
/// `window_count` default windows (0 means all).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfda_dataset_synth(
    n: size_t,
    true_p: size_t,
    window_count: size_t,
    seed: u64,
    out: *mut *mut SfdaDataset,
) -> SfdaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let mut spec = SynthSpec::new(n, true_p, seed);
        if window_count > 0 {
            if window_count > spec.windows.len() {
                return Err(Error::InvalidArgument(format!(
                    "window_count {window_count} exceeds {}",
                    spec.windows.len()
                ))
                .into());
            }
            spec.windows.truncate(window_count);
        }
        let data = generate(&spec)?.dataset()?;
        *out = Box::into_raw(Box::new(SfdaDataset(data)));
        Ok(())
    })
}

/// Number of spectra; 0 for null.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn sfda_dataset_len(data: *const SfdaDataset) -> size_t {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// Copies the targets row-major (`t_star`, `log_rt` per spectrum) into `out`, which
/// must hold `2 * len` values.
///
/// # Safety
/// `data` must be a live handle and `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sfda_dataset_targets(data: *const SfdaDataset, out: *mut f64, out_len: size_t) -> SfdaStatus {
    guard(|| {
        let data = ref_arg(data, "data")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let y = data.0.targets();
        if out_len < 2 * y.nrows() {
            return Err(Error::InvalidArgument(format!("out holds {out_len} values, need {}", 2 * y.nrows())).into());
        }
        let out = std::slice::from_raw_parts_mut(out, 2 * y.nrows());
        for i in 0..y.nrows() {
            out[2 * i] = y[(i, 0)];
            out[2 * i + 1] = y[(i, 1)];
        }
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfda_dataset_free(data: *mut SfdaDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Fits one model on basis size `p`. For ridge and lasso a finite `lambda > 0` is used
/// as is; otherwise λ is chosen by cross-validation over the default grid with `seed`.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfda_fit(
    data: *const SfdaDataset,
    basis: SfdaBasis,
    p: size_t,
    method: SfdaMethod,
    mode: SfdaTargetMode,
    lambda: f64,
    seed: u64,
    out: *mut *mut SfdaModel,
) -> SfdaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let data = ref_arg(data, "data")?;
        let method = Method::from(method);
        let mut spec = FitSpec::for_method(method);
        if method.is_penalized() && lambda.is_finite() && lambda > 0.0 {
            spec.lambda_grid = vec![lambda];
        }
        spec.cv_seed = seed;
        let design = build_design_matrix(&data.0.curves, &BasisSpec::new(basis.into(), p)?)?;
        let model = fit_design(&design, &data.0.targets(), &spec, mode.into(), None)?;
        *out = Box::into_raw(Box::new(SfdaModel(model)));
        Ok(())
    })
}

/// Predicts every spectrum of `data`, row-major into `out` (`2 * len` values). The
/// dataset must use the model's windows.
///
/// # Safety
/// Handles must be live and `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sfda_predict(
    model: *const SfdaModel,
    data: *const SfdaDataset,
    out: *mut f64,
    out_len: size_t,
) -> SfdaStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        let data = ref_arg(data, "data")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let n = data.0.len();
        if out_len < 2 * n {
            return Err(Error::InvalidArgument(format!("out holds {out_len} values, need {}", 2 * n)).into());
        }
        let basis = model
            .basis
            .ok_or_else(|| Error::InvalidArgument("model carries no basis".into()))?;
        if data.0.windows() != model.windows {
            return Err(Error::InvalidArgument("dataset windows differ from the model's windows".into()).into());
        }
        let yhat = predict_design(model, &build_design_matrix(&data.0.curves, &basis)?)?;
        let out = std::slice::from_raw_parts_mut(out, 2 * n);
        for i in 0..n {
            out[2 * i] = yhat[(i, 0)];
            out[2 * i + 1] = yhat[(i, 1)];
        }
        Ok(())
    })
}

/// Predicts one spectrum given as parallel wavelength and flux arrays.
///
/// # Safety
/// `wavelengths` and `flux` must point to `len` doubles, `out` to 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn sfda_predict_spectrum(
    model: *const SfdaModel,
    wavelengths: *const f64,
    flux: *const f64,
    len: size_t,
    out: *mut f64,
) -> SfdaStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        if wavelengths.is_null() || flux.is_null() {
            return Err(Failure::Null("spectrum"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let basis = model
            .basis
            .ok_or_else(|| Error::InvalidArgument("model carries no basis".into()))?;
        let record = SpectrumRecord::new(
            "query",
            std::slice::from_raw_parts(wavelengths, len).to_vec(),
            std::slice::from_raw_parts(flux, len).to_vec(),
        )?;
        let curve = extract_windows(&record, &model.windows)?;
        let yhat = predict_design(model, &build_design_matrix(&[curve], &basis)?)?;
        *out = yhat[(0, 0)];
        *out.add(1) = yhat[(0, 1)];
        Ok(())
    })
}

/// Serializes a model to JSON; free the result with [`sfda_string_free`].
///
/// # Safety
/// `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfda_model_to_json(model: *const SfdaModel, out: *mut *mut c_char) -> SfdaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = ref_arg(model, "model")?;
        *out = into_c_string(model.0.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfda_model_from_json(json: *const c_char, out: *mut *mut SfdaModel) -> SfdaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = LinearModel::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(SfdaModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be live; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sfda_model_save(model: *const SfdaModel, path: *const c_char) -> SfdaStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        model.0.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfda_model_load(path: *const c_char, out: *mut *mut SfdaModel) -> SfdaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = LinearModel::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SfdaModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfda_model_free(model: *mut SfdaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Rotated five-fold evaluation with validated basis size; writes the report as JSON.
/// Free the result with [`sfda_string_free`].
///
/// # Safety
/// `data` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfda_evaluate_json(
    data: *const SfdaDataset,
    basis: SfdaBasis,
    method: SfdaMethod,
    mode: SfdaTargetMode,
    seed: u64,
    out: *mut *mut c_char,
) -> SfdaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let data = ref_arg(data, "data")?;
        let spec = FitSpec {
            cv_seed: seed,
            ..FitSpec::for_method(method.into())
        };
        let report = evaluate(&data.0, basis.into(), &spec, mode.into(), &EvalOptions::new(seed))?;
        *out = into_c_string(report.to_json()?)?;
        Ok(())
    })
}
