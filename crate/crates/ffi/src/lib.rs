//! C ABI over `csobench`.
//!
//! Every fallible call returns a [`CsoStatus`]; on failure the message is
//! available from [`cso_last_error`] on the same thread until the next
//! failing call. Panics never cross the boundary. Objects are handed out as
//! opaque pointers and released with their `_free` function.
//!
//! The matching header is `include/csobench.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use csobench::eval::{run_experiment, write_artifacts, ModelKind};
use csobench::geometry::{angular_separation, SkyCoord};
use csobench::gp::{GpModel, GpSettings, MaternKernel};
use csobench::io::dataset::Dataset;
use csobench::io::{load_dataset, write_dataset, Config};
use csobench::preprocess::minmax_normalize;
use csobench::sim::simulate_dataset;
use csobench::{Error, Label};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    CorruptDataset = 4,
    Numerical = 5,
    OutputExists = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CsoStatus {
    match e {
        Error::Io { .. } => CsoStatus::Io,
        Error::CorruptDataset { .. } | Error::ModelFormat(_) | Error::Json(_) => {
            CsoStatus::CorruptDataset
        }
        Error::OutputExists(_) => CsoStatus::OutputExists,
        Error::Factorization { .. }
        | Error::NonFiniteLoss { .. }
        | Error::NegativeExpectation { .. }
        | Error::DegenerateCutout { .. } => CsoStatus::Numerical,
        _ => CsoStatus::InvalidArgument,
    }
}

struct Fail(CsoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CsoStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(CsoStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CsoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsoStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CsoStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    str_arg(p, what).map(PathBuf::from)
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut_arg<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failure on this thread, or null. Owned by the
/// library; valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn cso_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cso_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Matérn covariance at distance `r`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn cso_matern(
    nu: f64,
    length_scale: f64,
    variance: f64,
    r: f64,
    out: *mut f64,
) -> CsoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(r >= 0.0) {
            return Err(invalid(format!("distance must be >= 0, got {r}")));
        }
        *out = MaternKernel::new(nu, length_scale, variance)?.eval(r);
        Ok(())
    })
}

/// Min/max scaling of `n` values into `out` (may alias `values`).
///
/// # Safety
/// `values` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cso_minmax(values: *const f64, n: usize, out: *mut f64) -> CsoStatus {
    guard(|| {
        let v = slice_arg(values, n, "values")?.to_vec();
        let scaled = minmax_normalize(&v)?;
        slice_mut_arg(out, n, "out")?.copy_from_slice(&scaled.values);
        Ok(())
    })
}

/// Great-circle separation in arcseconds between two (RA, Dec) positions in
/// degrees.
///
/// # Safety
/// `out_arcsec` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn cso_angular_separation(
    ra1: f64,
    dec1: f64,
    ra2: f64,
    dec2: f64,
    out_arcsec: *mut f64,
) -> CsoStatus {
    guard(|| {
        *out_arg(out_arcsec, "out_arcsec")? =
            angular_separation(SkyCoord::new(ra1, dec1), SkyCoord::new(ra2, dec2));
        Ok(())
    })
}

/// Simulates `n_single + n_cso` cutouts with default settings into `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cso_simulate(
    dir: *const c_char,
    n_single: usize,
    n_cso: usize,
    seed: u64,
    force: bool,
) -> CsoStatus {
    guard(|| {
        let dir = path_arg(dir, "dir")?;
        let cfg = Config::default();
        let cut = simulate_dataset(&cfg.sim, n_single, n_cso, seed)?;
        write_dataset(&dir, &cut, &cfg.sim, seed, force)?;
        Ok(())
    })
}

/// A verified dataset held in memory.
pub struct CsoDataset(Dataset);

/// Loads and verifies a dataset directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn cso_dataset_load(
    dir: *const c_char,
    out: *mut *mut CsoDataset,
) -> CsoStatus {
    guard(|| {
        let slot = out_arg(out, "out")?;
        *slot = ptr::null_mut();
        let ds = load_dataset(&path_arg(dir, "dir")?)?;
        *slot = Box::into_raw(Box::new(CsoDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a pointer from [`cso_dataset_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cso_dataset_free(ds: *mut CsoDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of cutouts (0 for a null handle).
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cso_dataset_len(ds: *const CsoDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Cutout side length in pixels (0 for a null handle).
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cso_dataset_cutout_size(ds: *const CsoDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.manifest.cutout_size)
}

unsafe fn dataset_index<'a>(ds: *const CsoDataset, i: usize) -> Result<&'a Dataset, Fail> {
    let d = &ds.as_ref().ok_or_else(|| null("dataset"))?.0;
    if i >= d.len() {
        return Err(invalid(format!(
            "index {i} out of range for {} cutouts",
            d.len()
        )));
    }
    Ok(d)
}

/// Label of cutout `i`: 0 = single, 1 = CSO.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cso_dataset_label(
    ds: *const CsoDataset,
    i: usize,
    out: *mut i32,
) -> CsoStatus {
    guard(|| {
        let d = dataset_index(ds, i)?;
        *out_arg(out, "out")? = d.manifest.records[i].label.index() as i32;
        Ok(())
    })
}

/// Copies the row-major pixels of cutout `i`; `len` must equal size².
///
/// # Safety
/// `ds` must be a live handle and `out` hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn cso_dataset_pixels(
    ds: *const CsoDataset,
    i: usize,
    out: *mut f32,
    len: usize,
) -> CsoStatus {
    guard(|| {
        let d = dataset_index(ds, i)?;
        let px = d.cutout_pixels(i);
        if len != px.len() {
            return Err(invalid(format!(
                "buffer holds {len} floats, cutout has {}",
                px.len()
            )));
        }
        slice_mut_arg(out, len, "out")?.copy_from_slice(px);
        Ok(())
    })
}

/// Covariates of cutout `i`. Separation and magnitude difference are NaN
/// for single-satellite cutouts. Any output pointer may be null.
///
/// # Safety
/// `ds` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cso_dataset_covariates(
    ds: *const CsoDataset,
    i: usize,
    separation_arcsec: *mut f64,
    delta_mag: *mut f64,
    primary_mag: *mut f64,
) -> CsoStatus {
    guard(|| {
        let r = &dataset_index(ds, i)?.manifest.records[i];
        if let Some(p) = separation_arcsec.as_mut() {
            *p = r.separation_arcsec.unwrap_or(f64::NAN);
        }
        if let Some(p) = delta_mag.as_mut() {
            *p = r.delta_mag.unwrap_or(f64::NAN);
        }
        if let Some(p) = primary_mag.as_mut() {
            *p = r.scene.primary_mag;
        }
        Ok(())
    })
}

/// GP classifier hyperparameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsoGpSettings {
    pub nu: f64,
    pub length_scale: f64,
    pub variance: f64,
    pub k_neighbors: usize,
    pub nugget: f64,
    pub ambiguity_threshold: f64,
}

impl From<CsoGpSettings> for GpSettings {
    fn from(s: CsoGpSettings) -> Self {
        GpSettings {
            nu: s.nu,
            length_scale: s.length_scale,
            variance: s.variance,
            k_neighbors: s.k_neighbors,
            nugget: s.nugget,
            ambiguity_threshold: s.ambiguity_threshold,
        }
    }
}

#[no_mangle]
pub extern "C" fn cso_gp_default_settings() -> CsoGpSettings {
    let d = GpSettings::default();
    CsoGpSettings {
        nu: d.nu,
        length_scale: d.length_scale,
        variance: d.variance,
        k_neighbors: d.k_neighbors,
        nugget: d.nugget,
        ambiguity_threshold: d.ambiguity_threshold,
    }
}

/// A fitted nearest-neighbour GP classifier.
pub struct CsoGpModel(GpModel);

/// Fits the GP on `n` row-major feature vectors of length `dim` with labels
/// 0 (single) or 1 (CSO). A null `settings` means the defaults.
///
/// # Safety
/// `features` must hold `n * dim` doubles, `labels` `n` ints, `settings` be
/// null or valid, and `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn cso_gp_fit(
    features: *const f64,
    n: usize,
    dim: usize,
    labels: *const i32,
    settings: *const CsoGpSettings,
    out: *mut *mut CsoGpModel,
) -> CsoStatus {
    guard(|| {
        let slot = out_arg(out, "out")?;
        *slot = ptr::null_mut();
        if dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| invalid("n * dim overflows"))?;
        let x = slice_arg(features, len, "features")?;
        let labels = slice_arg(labels, n, "labels")?
            .iter()
            .map(|&l| match l {
                0 => Ok(Label::Single),
                1 => Ok(Label::Cso),
                _ => Err(invalid(format!("label {l} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let s: GpSettings = settings
            .as_ref()
            .copied()
            .map_or_else(GpSettings::default, Into::into);
        let rows: Vec<&[f64]> = x.chunks_exact(dim).collect();
        *slot = Box::into_raw(Box::new(CsoGpModel(GpModel::fit(&rows, &labels, &s)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a pointer from [`cso_gp_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cso_gp_free(model: *mut CsoGpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies `m` row-major queries. `labels_out` receives 0/1 per query;
/// `mean_out` (2 per query, single then CSO) and `variance_out` (1 per
/// query) may be null.
///
/// # Safety
/// `model` must be live, `queries` hold `m * dim` doubles and each non-null
/// output the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn cso_gp_predict(
    model: *const CsoGpModel,
    queries: *const f64,
    m: usize,
    labels_out: *mut i32,
    mean_out: *mut f64,
    variance_out: *mut f64,
) -> CsoStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let dim = model.dim();
        let len = m
            .checked_mul(dim)
            .ok_or_else(|| invalid("m * dim overflows"))?;
        let q = slice_arg(queries, len, "queries")?;
        let rows: Vec<&[f64]> = q.chunks_exact(dim).collect();
        let preds = model.classify_batch(&rows)?;
        let labels = slice_mut_arg(labels_out, m, "labels_out")?;
        for (l, p) in labels.iter_mut().zip(&preds) {
            *l = p.label.index() as i32;
        }
        if !mean_out.is_null() {
            let means = slice_mut_arg(mean_out, 2 * m, "mean_out")?;
            for (c, p) in means.chunks_exact_mut(2).zip(&preds) {
                c.copy_from_slice(&p.mean);
            }
        }
        if !variance_out.is_null() {
            for (v, p) in slice_mut_arg(variance_out, m, "variance_out")?
                .iter_mut()
                .zip(&preds)
            {
                *v = p.variance;
            }
        }
        Ok(())
    })
}

/// Runs `runs` train/test repetitions of the comma-separated `models`
/// ("gp", "logreg", "cnn" or "all") on a dataset directory and writes the
/// result artifacts to `out_dir`. `config` is a key = value config text or
/// null for the defaults.
///
/// # Safety
/// String arguments must be NUL-terminated (`config` may be null).
#[no_mangle]
pub unsafe extern "C" fn cso_evaluate(
    dataset_dir: *const c_char,
    models: *const c_char,
    runs: usize,
    seed: u64,
    config: *const c_char,
    out_dir: *const c_char,
) -> CsoStatus {
    guard(|| {
        let ds = load_dataset(&path_arg(dataset_dir, "dataset_dir")?)?;
        let names = str_arg(models, "models")?;
        let kinds: Vec<ModelKind> = if names == "all" {
            ModelKind::ALL.to_vec()
        } else {
            names
                .split(',')
                .map(|m| m.trim().parse())
                .collect::<Result<_, _>>()?
        };
        let cfg = if config.is_null() {
            Config::default()
        } else {
            Config::parse(str_arg(config, "config")?)?
        };
        let mut plan = cfg.plan(kinds, seed);
        plan.runs = runs;
        let items = ds.items();
        let exp = run_experiment(&items, &plan, &mut |_, _| Ok(()))?;
        write_artifacts(
            &path_arg(out_dir, "out_dir")?,
            &items,
            &exp,
            cfg.harness.bins,
        )?;
        Ok(())
    })
}
