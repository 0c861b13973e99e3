//! C interface to clustopt.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call
//! returns a [`ClustoptStatus`]; on failure, [`clustopt_last_error`] gives a
//! message for the calling thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use clustopt::algorithms::{self, AlgorithmConfig, AlgorithmId};
use clustopt::clustering::{ClusterModel, KSelection};
use clustopt::metrics;
use clustopt::problems::{FunctionId, ProblemInstance};
use clustopt::representation::{build_representation, TrajectoryRepresentation};
use clustopt::trajectory::{self, Trajectory};
use clustopt::{Error, ErrorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClustoptStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid argument or violated precondition.
    InvalidArgument = 2,
    /// Malformed or inconsistent input file.
    DataError = 3,
    IoError = 4,
    /// The objective returned a non-finite value.
    NumericError = 5,
    /// Internal error; the library state is still usable.
    Panic = 6,
}

/// Trajectories, as read from a file or produced by a run.
pub struct ClustoptTrajectories(Vec<Trajectory>);

/// A fitted scaler and centroid set.
pub struct ClustoptModel(ClusterModel);

/// Per-iteration cluster counts of one trajectory.
pub struct ClustoptRepresentation(TrajectoryRepresentation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
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

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> ClustoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClustoptStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("`{name}` must not be null"));
            ClustoptStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            match e.kind() {
                ErrorKind::Usage => ClustoptStatus::InvalidArgument,
                ErrorKind::Data => ClustoptStatus::DataError,
                ErrorKind::Io => ClustoptStatus::IoError,
                ErrorKind::Numeric => ClustoptStatus::NumericError,
            }
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            ClustoptStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, name: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::usage(format!("`{name}` is not valid UTF-8")).into())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &'static str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message describing the last failure on this thread, or null. The string
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn clustopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn clustopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Run one algorithm on one benchmark instance. `iterations = 0` uses the
/// default budget of `10 * dimension`. Writes a new one-element
/// trajectory set to `*out`.
///
/// # Safety
/// String arguments must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_run_algorithm(
    algorithm: *const c_char,
    function: *const c_char,
    dimension: usize,
    instance: u64,
    population: usize,
    iterations: usize,
    seed: u64,
    out: *mut *mut ClustoptTrajectories,
) -> ClustoptStatus {
    guard(|| {
        let alg: AlgorithmId = text(algorithm, "algorithm")?.parse()?;
        let f: FunctionId = text(function, "function")?.parse()?;
        let inst = ProblemInstance::new(f, dimension, instance)?;
        let mut cfg = AlgorithmConfig::new(alg);
        cfg.population_size = population;
        cfg.iterations = (iterations > 0).then_some(iterations);
        let record = algorithms::run(&cfg, &inst, seed)?;
        put(out, ClustoptTrajectories(vec![record.trajectory]))
    })
}

/// Read a trajectory CSV.
///
/// # Safety
/// `path` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_trajectories_read_csv(
    path: *const c_char,
    out: *mut *mut ClustoptTrajectories,
) -> ClustoptStatus {
    guard(|| {
        let ts = trajectory::read_trajectories(&PathBuf::from(text(path, "path")?))?;
        put(out, ClustoptTrajectories(ts))
    })
}

/// # Safety
/// `set` must be a live handle; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn clustopt_trajectories_write_csv(
    set: *const ClustoptTrajectories,
    path: *const c_char,
) -> ClustoptStatus {
    guard(|| {
        let set = borrow(set, "set")?;
        trajectory::write_trajectories(&set.0, &PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Append copies of every trajectory in `src` to `dst`.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn clustopt_trajectories_append(
    dst: *mut ClustoptTrajectories,
    src: *const ClustoptTrajectories,
) -> ClustoptStatus {
    guard(|| {
        let extra = borrow(src, "src")?.0.clone();
        borrow_mut(dst, "dst")?.0.extend(extra);
        Ok(())
    })
}

/// Number of trajectories in the set; 0 for null.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clustopt_trajectories_len(set: *const ClustoptTrajectories) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

fn nth(set: &ClustoptTrajectories, index: usize) -> FfiResult<&Trajectory> {
    set.0
        .get(index)
        .ok_or_else(|| Error::usage(format!("index {index} out of range for {} trajectories", set.0.len())).into())
}

/// Shape `(iterations, population, dimension)` of trajectory `index`.
///
/// # Safety
/// `set` must be live; the three out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_trajectory_shape(
    set: *const ClustoptTrajectories,
    index: usize,
    iterations: *mut usize,
    population: *mut usize,
    dimension: *mut usize,
) -> ClustoptStatus {
    guard(|| {
        let (b, s, d) = nth(borrow(set, "set")?, index)?.shape();
        *borrow_mut(iterations, "iterations")? = b;
        *borrow_mut(population, "population")? = s;
        *borrow_mut(dimension, "dimension")? = d;
        Ok(())
    })
}

/// Borrow the solutions of trajectory `index`, iteration-major then slot,
/// `iterations * population * dimension` values. The pointer is valid until
/// the set is modified or freed.
///
/// # Safety
/// `set` must be live; `data` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_trajectory_data(
    set: *const ClustoptTrajectories,
    index: usize,
    data: *mut *const f64,
    len: *mut usize,
) -> ClustoptStatus {
    guard(|| {
        let t = nth(borrow(set, "set")?, index)?;
        *borrow_mut(data, "data")? = t.data().as_ptr();
        *borrow_mut(len, "len")? = t.data().len();
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn clustopt_trajectories_free(set: *mut ClustoptTrajectories) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Fit a cluster model on every solution in `set` (one problem). `k = 0`
/// selects the cluster count with the elbow method over `[k_min, k_max]`.
///
/// # Safety
/// `set` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_fit(
    set: *const ClustoptTrajectories,
    k: usize,
    k_min: usize,
    k_max: usize,
    seed: u64,
    out: *mut *mut ClustoptModel,
) -> ClustoptStatus {
    guard(|| {
        let merged = trajectory::merge(&borrow(set, "set")?.0)?;
        let selection = if k == 0 {
            KSelection::Auto {
                k_min,
                k_max: k_max.min(merged.len()),
            }
        } else {
            KSelection::Fixed(k)
        };
        let mut model = ClusterModel::fit(&merged.points, merged.dimension, selection, seed)?;
        model.problem = Some(merged.problem);
        put(out, ClustoptModel(model))
    })
}

/// # Safety
/// `path` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_load(path: *const c_char, out: *mut *mut ClustoptModel) -> ClustoptStatus {
    guard(|| {
        let model = ClusterModel::load(&PathBuf::from(text(path, "path")?))?;
        put(out, ClustoptModel(model))
    })
}

/// # Safety
/// `model` must be live; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_save(model: *const ClustoptModel, path: *const c_char) -> ClustoptStatus {
    guard(|| {
        borrow(model, "model")?.0.save(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Number of clusters; 0 for null.
///
/// # Safety
/// `model` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_num_clusters(model: *const ClustoptModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_clusters())
}

/// Dimension of the solution space; 0 for null.
///
/// # Safety
/// `model` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_dimension(model: *const ClustoptModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dimension())
}

/// Copy the centroids in original (unscaled) coordinates into `out`, which
/// must hold `num_clusters * dimension` values.
///
/// # Safety
/// `model` must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_centroids(model: *const ClustoptModel, out: *mut f64, len: usize) -> ClustoptStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        let raw: Vec<f64> = m.raw_centroids().concat();
        if len != raw.len() {
            return Err(Error::usage(format!("centroid buffer holds {len} values, need {}", raw.len())).into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(&raw);
        Ok(())
    })
}

/// Nearest-centroid labels for `n_points` row-major points of dimension
/// `dim`, written to `labels`.
///
/// # Safety
/// `points` must hold `n_points * dim` doubles and `labels` `n_points`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_assign(
    model: *const ClustoptModel,
    points: *const f64,
    n_points: usize,
    dim: usize,
    labels: *mut usize,
) -> ClustoptStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        let count = n_points
            .checked_mul(dim)
            .ok_or_else(|| Error::usage("point buffer size overflows"))?;
        let pts = slice(points, count, "points")?;
        let out = slice_mut(labels, n_points, "labels")?;
        out.copy_from_slice(&m.assign(pts, dim)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn clustopt_model_free(model: *mut ClustoptModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Build the representation of trajectory `index` under `model`.
///
/// # Safety
/// `set` and `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_representation_build(
    set: *const ClustoptTrajectories,
    index: usize,
    model: *const ClustoptModel,
    out: *mut *mut ClustoptRepresentation,
) -> ClustoptStatus {
    guard(|| {
        let t = nth(borrow(set, "set")?, index)?;
        let rep = build_representation(t, &borrow(model, "model")?.0)?;
        put(out, ClustoptRepresentation(rep))
    })
}

/// # Safety
/// `rep` must be live; both out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_representation_shape(
    rep: *const ClustoptRepresentation,
    iterations: *mut usize,
    clusters: *mut usize,
) -> ClustoptStatus {
    guard(|| {
        let r = &borrow(rep, "rep")?.0;
        *borrow_mut(iterations, "iterations")? = r.iterations();
        *borrow_mut(clusters, "clusters")? = r.clusters();
        Ok(())
    })
}

/// Copy the flattened `iterations * clusters` counts into `out`.
///
/// # Safety
/// `rep` must be live; `out` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn clustopt_representation_counts(
    rep: *const ClustoptRepresentation,
    out: *mut u32,
    len: usize,
) -> ClustoptStatus {
    guard(|| {
        let flat = borrow(rep, "rep")?.0.flat();
        if len != flat.len() {
            return Err(Error::usage(format!("count buffer holds {len} values, need {}", flat.len())).into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(flat);
        Ok(())
    })
}

/// # Safety
/// `rep` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn clustopt_representation_free(rep: *mut ClustoptRepresentation) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// Cosine similarity of two vectors of length `len`.
///
/// # Safety
/// `u` and `v` must each hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_cosine(u: *const f64, v: *const f64, len: usize, out: *mut f64) -> ClustoptStatus {
    guard(|| {
        let value = metrics::cosine_similarity(slice(u, len, "u")?, slice(v, len, "v")?)?;
        *borrow_mut(out, "out")? = value;
        Ok(())
    })
}

/// Cosine similarity of two representations built against the same model.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_representation_similarity(
    a: *const ClustoptRepresentation,
    b: *const ClustoptRepresentation,
    out: *mut f64,
) -> ClustoptStatus {
    guard(|| {
        let value = metrics::representation_similarity(&borrow(a, "a")?.0, &borrow(b, "b")?.0)?;
        *borrow_mut(out, "out")? = value;
        Ok(())
    })
}

/// Stability of one algorithm on one problem: mean pairwise similarity of
/// `n >= 2` representations from distinct seeds.
///
/// # Safety
/// `reps` must hold `n` live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clustopt_stability(
    reps: *const *const ClustoptRepresentation,
    n: usize,
    out: *mut f64,
) -> ClustoptStatus {
    guard(|| {
        let handles = slice(reps, n, "reps")?;
        let inner = handles
            .iter()
            .map(|&h| borrow(h, "reps[i]").map(|r| &r.0))
            .collect::<FfiResult<Vec<_>>>()?;
        let report = metrics::stability(&inner)?;
        *borrow_mut(out, "out")? = report.score;
        Ok(())
    })
}
