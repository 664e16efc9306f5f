//! C ABI over the tpv-lab core: opaque handles for networks and datasets,
//! integer status codes, and a thread-local last-error message. The header
//! is generated into `include/tpv_ffi.h` by the build script.
//!
//! Conventions: every function that can fail returns [`TpvStatus`]; outputs
//! go through caller-provided pointers. Handles must be released with the
//! matching `*_free` function exactly once. All functions catch panics at
//! the boundary and report them as `TpvStatus::Panic`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tpv_lab::datagen::{add_label_noise, sample_dataset, Dataset, TeacherKind, TeacherSpec};
use tpv_lab::empirical::{empirical_tpv, taylor_validity};
use tpv_lab::linalg::Matrix;
use tpv_lab::nn::{init_network, MlpConfig, Network, ParamVector};
use tpv_lab::theory::{hessian_trace_proxy_gram, tpv_quantization, tpv_sgd_theoretical};
use tpv_lab::train::{train_mse, Schedule, TrainConfig};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericalError = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message describing the most recent error on this thread. The pointer is
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn tpv_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Crate version as a static C string.
#[no_mangle]
pub extern "C" fn tpv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque network handle.
pub struct TpvNetwork {
    inner: Network,
}

/// Opaque dataset handle.
pub struct TpvDataset {
    inner: Dataset,
}

fn guard<F: FnOnce() -> TpvStatus>(f: F) -> TpvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in tpv-ffi".to_string());
            set_error(&msg);
            TpvStatus::Panic
        }
    }
}

/// Create a ReLU MLP with He-uniform weights drawn from `seed`.
///
/// # Safety
/// `hidden` must point to `n_hidden` readable usize values (or be null with
/// `n_hidden == 0`); `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn tpv_network_create(
    seed: u64,
    input_dim: usize,
    hidden: *const usize,
    n_hidden: usize,
    output_dim: usize,
    out: *mut *mut TpvNetwork,
) -> TpvStatus {
    guard(|| {
        if out.is_null() || (hidden.is_null() && n_hidden > 0) {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        if input_dim == 0 || output_dim == 0 {
            set_error("dimensions must be at least 1");
            return TpvStatus::InvalidArgument;
        }
        let hidden_widths: Vec<usize> = if n_hidden == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(hidden, n_hidden).to_vec()
        };
        if hidden_widths.iter().any(|&w| w == 0) {
            set_error("hidden widths must be at least 1");
            return TpvStatus::InvalidArgument;
        }
        let cfg = MlpConfig::new(input_dim, hidden_widths, output_dim, seed);
        let network = Box::new(TpvNetwork {
            inner: init_network(&cfg),
        });
        *out = Box::into_raw(network);
        TpvStatus::Ok
    })
}

/// Release a network handle.
///
/// # Safety
/// `net` must be a pointer returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn tpv_network_free(net: *mut TpvNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of parameters p of the network.
///
/// # Safety
/// `net` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tpv_network_param_count(net: *const TpvNetwork) -> usize {
    if net.is_null() {
        return 0;
    }
    (*net).inner.param_count()
}

/// Copy the flat parameter vector into `out` (length `len` == p).
///
/// # Safety
/// `net` must be live; `out` must point to `len` writable f64 slots.
#[no_mangle]
pub unsafe extern "C" fn tpv_network_get_params(
    net: *const TpvNetwork,
    out: *mut f64,
    len: usize,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        let params = (*net).inner.params.as_slice();
        if params.len() != len {
            set_error("parameter length mismatch");
            return TpvStatus::DimensionMismatch;
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(params);
        TpvStatus::Ok
    })
}

/// Replace the network parameters from a flat vector of length p.
///
/// # Safety
/// `net` must be live; `params` must point to `len` readable f64 values.
#[no_mangle]
pub unsafe extern "C" fn tpv_network_set_params(
    net: *mut TpvNetwork,
    params: *const f64,
    len: usize,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || params.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        if (*net).inner.param_count() != len {
            set_error("parameter length mismatch");
            return TpvStatus::DimensionMismatch;
        }
        let values = std::slice::from_raw_parts(params, len);
        if values.iter().any(|v| !v.is_finite()) {
            set_error("parameters must be finite");
            return TpvStatus::InvalidArgument;
        }
        (*net).inner.params = ParamVector(values.to_vec());
        TpvStatus::Ok
    })
}

/// Forward pass on one input of length `input_dim`, writing `output_dim`
/// values to `out`.
///
/// # Safety
/// `net` must be live; `x` readable for `x_len`; `out` writable for
/// `out_len`.
#[no_mangle]
pub unsafe extern "C" fn tpv_network_forward(
    net: *const TpvNetwork,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || x.is_null() || out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        let network = &(*net).inner;
        if out_len != network.config.output_dim {
            set_error("output buffer length mismatch");
            return TpvStatus::DimensionMismatch;
        }
        let input = std::slice::from_raw_parts(x, x_len);
        match network.forward(input) {
            Ok(values) => {
                std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&values);
                TpvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TpvStatus::DimensionMismatch
            }
        }
    })
}

/// Sample a synthetic teacher dataset. `teacher_kind`: 0 linear Gaussian,
/// 1 single ReLU, 2 ten-unit multi-ReLU. `stream` separates splits drawn
/// from the same teacher (0 train, 1 test by convention).
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn tpv_dataset_sample(
    teacher_kind: u32,
    input_dim: usize,
    seed: u64,
    n: usize,
    stream: u64,
    out: *mut *mut TpvDataset,
) -> TpvStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        let kind = match teacher_kind {
            0 => TeacherKind::LinearGaussian,
            1 => TeacherKind::SingleReLU,
            2 => TeacherKind::MultiReLU10,
            _ => {
                set_error("teacher_kind must be 0, 1, or 2");
                return TpvStatus::InvalidArgument;
            }
        };
        if input_dim == 0 || n == 0 {
            set_error("input_dim and n must be at least 1");
            return TpvStatus::InvalidArgument;
        }
        let spec = TeacherSpec {
            kind,
            input_dim,
            seed,
        };
        let ds = Box::new(TpvDataset {
            inner: sample_dataset(&spec, n, stream),
        });
        *out = Box::into_raw(ds);
        TpvStatus::Ok
    })
}

/// Release a dataset handle.
///
/// # Safety
/// `ds` must be a pointer returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn tpv_dataset_free(ds: *mut TpvDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of samples in the dataset.
///
/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tpv_dataset_len(ds: *const TpvDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).inner.len()
}

/// New dataset with fresh additive Gaussian label noise of std `sigma`.
///
/// # Safety
/// `ds` must be live; `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn tpv_dataset_add_label_noise(
    ds: *const TpvDataset,
    sigma: f64,
    run_seed: u64,
    out: *mut *mut TpvDataset,
) -> TpvStatus {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        if !(sigma >= 0.0) {
            set_error("sigma must be nonnegative");
            return TpvStatus::InvalidArgument;
        }
        let noisy = Box::new(TpvDataset {
            inner: add_label_noise(&(*ds).inner, sigma, run_seed),
        });
        *out = Box::into_raw(noisy);
        TpvStatus::Ok
    })
}

/// Full-batch MSE training with heavy-ball momentum; `cosine_schedule`
/// nonzero enables cosine annealing; `proximity_gamma` > 0 anchors at the
/// current parameters. Writes the final full-dataset loss to `final_loss`.
///
/// # Safety
/// `net` and `ds` must be live handles; `final_loss` writable if non-null.
#[no_mangle]
pub unsafe extern "C" fn tpv_train_mse(
    net: *mut TpvNetwork,
    ds: *const TpvDataset,
    lr: f64,
    momentum: f64,
    epochs: usize,
    cosine_schedule: i32,
    proximity_gamma: f64,
    final_loss: *mut f64,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || ds.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        if !(lr > 0.0) || !(0.0..1.0).contains(&momentum) || proximity_gamma < 0.0 {
            set_error("invalid optimizer settings");
            return TpvStatus::InvalidArgument;
        }
        let network = &mut (*net).inner;
        let cfg = TrainConfig {
            lr,
            momentum,
            schedule: if cosine_schedule != 0 {
                Schedule::Cosine
            } else {
                Schedule::Constant
            },
            proximity_gamma,
            proximity_anchor: if proximity_gamma > 0.0 {
                Some(network.params.clone())
            } else {
                None
            },
            ..TrainConfig::full_batch(lr, epochs)
        };
        match train_mse(network, &(*ds).inner, &cfg) {
            Ok(trace) => {
                if trace.diverged {
                    set_error("training diverged");
                    return TpvStatus::NumericalError;
                }
                if !final_loss.is_null() {
                    *final_loss = *trace.loss_per_epoch.last().unwrap_or(&f64::NAN);
                }
                network.params = trace.final_params;
                TpvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TpvStatus::DimensionMismatch
            }
        }
    })
}

/// Empirical TPV of `n_runs` perturbed parameter vectors (row-major
/// `n_runs`×p in `perturbed`) against the reference network, evaluated on
/// the dataset inputs.
///
/// # Safety
/// Handles must be live; `perturbed` readable for `n_runs * p`; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tpv_empirical_tpv(
    net: *const TpvNetwork,
    perturbed: *const f64,
    n_runs: usize,
    p: usize,
    ds: *const TpvDataset,
    out: *mut f64,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || perturbed.is_null() || ds.is_null() || out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        let network = &(*net).inner;
        if p != network.param_count() || n_runs == 0 {
            set_error("perturbed parameter shape mismatch");
            return TpvStatus::DimensionMismatch;
        }
        let flat = std::slice::from_raw_parts(perturbed, n_runs * p);
        let params: Vec<ParamVector> = flat
            .chunks_exact(p)
            .map(|chunk| ParamVector(chunk.to_vec()))
            .collect();
        match empirical_tpv(network, &params, &(*ds).inner.xs) {
            Ok(v) => {
                *out = v;
                TpvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TpvStatus::NumericalError
            }
        }
    })
}

/// Relative finite-difference Taylor error of one perturbed parameter
/// vector over the dataset inputs (step `h`, threshold 1e-3 upstream).
///
/// # Safety
/// Handles must be live; `perturbed` readable for p values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpv_taylor_validity(
    net: *const TpvNetwork,
    perturbed: *const f64,
    p: usize,
    ds: *const TpvDataset,
    h: f64,
    out: *mut f64,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || perturbed.is_null() || ds.is_null() || out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        let network = &(*net).inner;
        if p != network.param_count() {
            set_error("perturbed parameter shape mismatch");
            return TpvStatus::DimensionMismatch;
        }
        if !(h > 0.0) {
            set_error("h must be positive");
            return TpvStatus::InvalidArgument;
        }
        let params = ParamVector(std::slice::from_raw_parts(perturbed, p).to_vec());
        match taylor_validity(network, &params, &(*ds).inner.xs, h) {
            Ok(v) => {
                *out = v;
                TpvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TpvStatus::NumericalError
            }
        }
    })
}

/// Gauss-Newton Hessian-trace proxy Tr((1/n)JᵀJ) on the dataset inputs
/// (scalar-output networks only).
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpv_hessian_trace_proxy(
    net: *const TpvNetwork,
    ds: *const TpvDataset,
    out: *mut f64,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || ds.is_null() || out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        let network = &(*net).inner;
        if network.config.output_dim != 1 {
            set_error("hessian trace proxy needs a scalar-output network");
            return TpvStatus::InvalidArgument;
        }
        match hessian_trace_proxy_gram(network, &(*ds).inner.xs) {
            Ok(v) => {
                *out = v;
                TpvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TpvStatus::NumericalError
            }
        }
    })
}

/// Closed-form SGD stationary TPV: η·σ²·trace/(2b).
#[no_mangle]
pub extern "C" fn tpv_sgd_tpv_formula(
    eta: f64,
    batch: usize,
    residual_variance: f64,
    hessian_trace: f64,
) -> f64 {
    tpv_sgd_theoretical(eta, batch.max(1), residual_variance, hessian_trace)
}

/// Closed-form quantization TPV: δ²·trace/12.
#[no_mangle]
pub extern "C" fn tpv_quantization_tpv_formula(delta: f64, hessian_trace: f64) -> f64 {
    tpv_quantization(delta.abs(), hessian_trace)
}

/// MSE loss of the network on a dataset.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpv_network_loss_mse(
    net: *const TpvNetwork,
    ds: *const TpvDataset,
    out: *mut f64,
) -> TpvStatus {
    guard(|| {
        if net.is_null() || ds.is_null() || out.is_null() {
            set_error("null pointer");
            return TpvStatus::NullPointer;
        }
        let dataset = &(*ds).inner;
        match (*net).inner.loss_mse(&dataset.xs, &dataset.ys) {
            Ok(v) => {
                *out = v;
                TpvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TpvStatus::DimensionMismatch
            }
        }
    })
}

// Keep Matrix in scope for doc references without a direct dependency in
// signatures (everything crosses the boundary as flat buffers).
#[allow(unused)]
fn _matrix_is_internal(_: &Matrix) {}
