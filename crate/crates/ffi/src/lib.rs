//! C ABI over the `pcresample` library.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`PcrStatus`]; on failure the message is available from
//! [`pcr_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DMatrix;
use pcresample::apps::fit_sphere;
use pcresample::features::local_variation;
use pcresample::filters::ideal_lowpass;
use pcresample::graph::auto_sigma_k;
use pcresample::io::load_cloud_auto;
use pcresample::resampling::{
    dist_allpass, dist_haar_lowpass, dist_highpass, dist_ideal_lowpass, sample, ResamplingDistribution,
};
use pcresample::{
    build_graph, recenter, scale_normalize, shift_operator, Error, IsolatedPolicy, PointCloud, ShiftKind, SparseGraph,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Degenerate = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcrStrategy {
    Allpass = 0,
    Highpass = 1,
    LowpassHaar = 2,
    LowpassIdeal = 3,
}

impl PcrStrategy {
    fn from_raw(v: u32) -> Option<Self> {
        [Self::Allpass, Self::Highpass, Self::LowpassHaar, Self::LowpassIdeal]
            .into_iter()
            .find(|s| *s as u32 == v)
    }
}

/// Parameters for [`pcr_distribution`]. Start from [`pcr_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcrParams {
    /// Gaussian kernel width; `<= 0` picks it from nearest-neighbor distances.
    pub sigma: f64,
    /// Edge radius; `<= 0` means `2 * sigma`.
    pub tau: f64,
    /// Spectral norm the coordinates are scaled to.
    pub c: f64,
    /// Band size for the ideal low-pass strategy.
    pub bandwidth: usize,
    /// High-pass score exponent, 1 or 2.
    pub exponent: u32,
    /// Weight of the uniform floor mixed into the result, in `[0, 1]`.
    pub beta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PcrSphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub rms_residual: f64,
}

pub struct PcrCloud(PointCloud);

pub struct PcrDistribution(ResamplingDistribution);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PcrStatus {
    match e {
        Error::Parse { .. } | Error::File { .. } | Error::Io(_) => PcrStatus::Io,
        Error::EmptyCloud
        | Error::DegenerateCloud
        | Error::IsolatedNode(_)
        | Error::AllZeroFeatures
        | Error::ZeroSupport
        | Error::UnsupportedFeature(_)
        | Error::InsufficientNeighbors { .. }
        | Error::DegenerateConfiguration(_) => PcrStatus::Degenerate,
        Error::ConvergenceFailure(..) | Error::IllConditioned(_) => PcrStatus::Numerical,
        _ => PcrStatus::InvalidArgument,
    }
}

struct Failure(PcrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(PcrStatus::InvalidArgument, msg.to_string())
}

fn null(what: &str) -> Failure {
    Failure(PcrStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            PcrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(invalid(&format!("{what} holds {len} values, need {need}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

fn graph_for(cloud: &PointCloud, sigma: f64, tau: f64) -> Result<SparseGraph, Error> {
    let sigma = if sigma > 0.0 { sigma } else { auto_sigma_k(cloud, 10)? };
    let tau = if tau > 0.0 { tau } else { 2.0 * sigma };
    build_graph(cloud, sigma, tau)
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pcr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn pcr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn pcr_params_default() -> PcrParams {
    PcrParams {
        sigma: 0.0,
        tau: 0.0,
        c: 1.0,
        bandwidth: 10,
        exponent: 2,
        beta: 0.0,
    }
}

/// Builds a cloud from `n` row-major xyz triples and optional row-major
/// attributes (`attrs` may be null when `attr_dim` is 0).
///
/// # Safety
/// `xyz` must point to `3 * n` doubles, `attrs` to `n * attr_dim` doubles,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcr_cloud_from_xyz(
    xyz: *const f64,
    n: usize,
    attrs: *const f64,
    attr_dim: usize,
    out: *mut *mut PcrCloud,
) -> PcrStatus {
    guard(|| {
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if attr_dim > 0 && attrs.is_null() {
            return Err(null("attrs"));
        }
        let coords = DMatrix::from_row_slice(n, 3, std::slice::from_raw_parts(xyz, 3 * n));
        let extra = if attr_dim > 0 {
            DMatrix::from_row_slice(n, attr_dim, std::slice::from_raw_parts(attrs, n * attr_dim))
        } else {
            DMatrix::zeros(n, 0)
        };
        let cloud = PointCloud::new(coords, extra)?;
        *out = Box::into_raw(Box::new(PcrCloud(cloud)));
        Ok(())
    })
}

/// Loads a `.csv`, `.xyz` or `.ply` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcr_cloud_load(path: *const c_char, out: *mut *mut PcrCloud) -> PcrStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let cloud = load_cloud_auto(Path::new(path))?;
        *out = Box::into_raw(Box::new(PcrCloud(cloud)));
        Ok(())
    })
}

/// # Safety
/// `cloud` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcr_cloud_free(cloud: *mut PcrCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcr_cloud_len(cloud: *const PcrCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Number of attribute columns; 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcr_cloud_attr_dim(cloud: *const PcrCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.attr_dim())
}

/// Squared norm of each point's Haar high-pass response on a transition
/// graph. `sigma`/`tau <= 0` select them automatically.
///
/// # Safety
/// `cloud` must be live and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pcr_local_variation(
    cloud: *const PcrCloud,
    sigma: f64,
    tau: f64,
    include_attrs: bool,
    out: *mut f64,
    out_len: usize,
) -> PcrStatus {
    guard(|| {
        let cloud = &deref(cloud, "cloud")?.0;
        let out = out_slice(out, out_len, cloud.len(), "out")?;
        let graph = graph_for(cloud, sigma, tau)?;
        let shift = shift_operator(&graph, ShiftKind::Transition, IsolatedPolicy::SelfLoop)?;
        out.copy_from_slice(&local_variation(&shift, cloud, include_attrs)?.column());
        Ok(())
    })
}

/// Resampling distribution for `strategy`, one of the [`PcrStrategy`]
/// values. The cloud is recentered and
/// scaled to spectral norm `params.c` first; the graph is built on that
/// normalized cloud.
///
/// # Safety
/// `cloud` must be live, `params` null or valid, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcr_distribution(
    cloud: *const PcrCloud,
    strategy: u32,
    params: *const PcrParams,
    out: *mut *mut PcrDistribution,
) -> PcrStatus {
    guard(|| {
        let cloud = &deref(cloud, "cloud")?.0;
        let p = params.as_ref().copied().unwrap_or_else(|| pcr_params_default());
        if out.is_null() {
            return Err(null("out"));
        }
        let strategy = PcrStrategy::from_raw(strategy).ok_or_else(|| invalid("unknown strategy"))?;
        let x = scale_normalize(&recenter(cloud), p.c)?;
        let dist = match strategy {
            PcrStrategy::Allpass => dist_allpass(&x, p.c)?,
            other => {
                let graph = graph_for(&x, p.sigma, p.tau)?;
                let transition = || shift_operator(&graph, ShiftKind::Transition, IsolatedPolicy::SelfLoop);
                match other {
                    PcrStrategy::Highpass => dist_highpass(&transition()?, &x, p.exponent)?,
                    PcrStrategy::LowpassHaar => dist_haar_lowpass(&transition()?, &x, p.c)?,
                    _ => {
                        let na = shift_operator(&graph, ShiftKind::NormalizedAdjacency, IsolatedPolicy::SelfLoop)?;
                        dist_ideal_lowpass(&ideal_lowpass(&na, p.bandwidth)?, &x, p.c)?
                    }
                }
            }
        };
        let dist = dist.with_floor(p.beta)?;
        *out = Box::into_raw(Box::new(PcrDistribution(dist)));
        Ok(())
    })
}

/// # Safety
/// `dist` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcr_distribution_free(dist: *mut PcrDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// # Safety
/// `dist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcr_distribution_len(dist: *const PcrDistribution) -> usize {
    dist.as_ref().map_or(0, |d| d.0.len())
}

/// Copies the probabilities into `out`.
///
/// # Safety
/// `dist` must be live and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pcr_distribution_probs(
    dist: *const PcrDistribution,
    out: *mut f64,
    out_len: usize,
) -> PcrStatus {
    guard(|| {
        let dist = &deref(dist, "dist")?.0;
        out_slice(out, out_len, dist.len(), "out")?.copy_from_slice(dist.probs());
        Ok(())
    })
}

/// Draws `m` indices i.i.d. from `dist` and writes them with their
/// reconstruction weights `1/sqrt(m * pi)`. Deterministic in `seed`.
///
/// # Safety
/// `dist` must be live; `indices` and `weights` must each hold `m` values.
#[no_mangle]
pub unsafe extern "C" fn pcr_sample(
    dist: *const PcrDistribution,
    m: usize,
    seed: u64,
    indices: *mut usize,
    weights: *mut f64,
) -> PcrStatus {
    guard(|| {
        let dist = &deref(dist, "dist")?.0;
        if indices.is_null() {
            return Err(null("indices"));
        }
        let weights = out_slice(weights, m, m, "weights")?;
        let result = sample(dist, m, seed)?;
        std::slice::from_raw_parts_mut(indices, m).copy_from_slice(&result.indices);
        weights.copy_from_slice(&result.weights);
        Ok(())
    })
}

/// Least-squares sphere through the cloud's coordinates.
///
/// # Safety
/// `cloud` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcr_fit_sphere(cloud: *const PcrCloud, out: *mut PcrSphere) -> PcrStatus {
    guard(|| {
        let cloud = &deref(cloud, "cloud")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let fit = fit_sphere(cloud)?;
        *out = PcrSphere {
            center: [fit.center.x, fit.center.y, fit.center.z],
            radius: fit.radius,
            rms_residual: fit.rms_residual,
        };
        Ok(())
    })
}
