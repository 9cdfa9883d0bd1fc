//! C ABI for `sos-core`: binary SoS energies (build, evaluate, minimize) and
//! trained models (load, inspect, predict).
//!
//! Every fallible function returns a [`SosStatus`]. On failure the message is
//! available from [`sos_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Labelings cross the
//! boundary as one byte per variable, 0 or 1.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sos_core::app::commands::{check_features, model_task, predict_one};
use sos_core::app::config::Task;
use sos_core::app::AppError;
use sos_core::energy::{parse_energy, Labeling, SoSEnergy};
use sos_core::flow::{self, FlowOptions};
use sos_core::learn::{read_model, Model};
use sos_core::pipelines::{ImageGrid, ScribbleMask, SCRIBBLE_BG, SCRIBBLE_FG, SCRIBBLE_NONE};
use sos_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SosStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Bad argument: index out of range, wrong length, non-finite value.
    InvalidInput = 2,
    /// Malformed energy or model text.
    Parse = 3,
    /// The energy has a clique that is not submodular.
    NotSubmodular = 4,
    /// Too many variables for exhaustive search.
    TooLarge = 5,
    /// File could not be read.
    Io = 6,
    /// Output buffer has the wrong size.
    Buffer = 7,
    /// The model cannot do what was asked, e.g. predict with a multi-label model.
    Unsupported = 8,
    Internal = 9,
    /// A Rust panic was caught at the boundary.
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SosTask {
    Denoise = 0,
    Segment = 1,
    MultilabelDemo = 2,
}

/// Opaque binary energy.
pub struct SosEnergy(SoSEnergy);

/// Opaque trained model.
pub struct SosModel {
    model: Model,
    task: Task,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SosStatus, String);

type FfiResult<T = ()> = Result<T, Failure>;

fn fail<T>(status: SosStatus, message: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, message.into()))
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } | Error::InvalidInput(_) | Error::Image(_) => SosStatus::InvalidInput,
            Error::Parse { .. } => SosStatus::Parse,
            Error::NotSubmodular { .. } => SosStatus::NotSubmodular,
            Error::TooLarge(..) => SosStatus::TooLarge,
            Error::Io { .. } => SosStatus::Io,
            _ => SosStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<AppError> for Failure {
    fn from(e: AppError) -> Self {
        let status = match &e {
            AppError::Usage(_) => SosStatus::Unsupported,
            AppError::Data(_) => SosStatus::InvalidInput,
            AppError::Internal(_) => SosStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> FfiResult) -> SosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SosStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {message}"));
            SosStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> FfiResult {
    if p.is_null() {
        fail(SosStatus::NullPointer, format!("{name} is null"))
    } else {
        Ok(())
    }
}

unsafe fn text_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(SosStatus::InvalidInput, format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn labeling_arg(labels: *const u8, n: usize, expected: usize) -> FfiResult<Labeling> {
    if n != expected {
        return fail(SosStatus::Buffer, format!("labeling has {n} entries; the energy has {expected} variables"));
    }
    let bytes = slice_arg(labels, n, "labels")?;
    bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => fail(SosStatus::InvalidInput, format!("label byte {other}; expected 0 or 1")),
        })
        .collect::<FfiResult<Vec<bool>>>()
        .map(Labeling::from_bits)
}

unsafe fn write_labeling(out: *mut u8, n: usize, labeling: &Labeling) -> FfiResult {
    if n != labeling.len() {
        return fail(SosStatus::Buffer, format!("output holds {n} labels; {} needed", labeling.len()));
    }
    if n > 0 {
        non_null(out, "out_labels")?;
        let dst = std::slice::from_raw_parts_mut(out, n);
        for (d, &b) in dst.iter_mut().zip(labeling.bits()) {
            *d = b as u8;
        }
    }
    Ok(())
}

unsafe fn energy_ref<'a>(e: *const SosEnergy) -> FfiResult<&'a SosEnergy> {
    non_null(e, "energy")?;
    Ok(&*e)
}

unsafe fn model_ref<'a>(m: *const SosModel) -> FfiResult<&'a SosModel> {
    non_null(m, "model")?;
    Ok(&*m)
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sos_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sos_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------------ energy

/// Creates an energy over `num_vars` variables with zero unaries.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_new(num_vars: usize, out: *mut *mut SosEnergy) -> SosStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = Box::into_raw(Box::new(SosEnergy(SoSEnergy::new(num_vars))));
        Ok(())
    })
}

/// Parses the text energy format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_parse(text: *const c_char, out: *mut *mut SosEnergy) -> SosStatus {
    guard(|| {
        non_null(out, "out")?;
        let e = parse_energy(text_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(SosEnergy(e)));
        Ok(())
    })
}

/// Releases an energy. Null is ignored.
///
/// # Safety
/// `energy` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_free(energy: *mut SosEnergy) {
    if !energy.is_null() {
        drop(Box::from_raw(energy));
    }
}

/// # Safety
/// `energy` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_num_vars(energy: *const SosEnergy, out: *mut usize) -> SosStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = energy_ref(energy)?.0.num_vars();
        Ok(())
    })
}

/// Sets the unary costs of `var` for labels 0 and 1.
///
/// # Safety
/// `energy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_set_unary(energy: *mut SosEnergy, var: usize, cost0: f64, cost1: f64) -> SosStatus {
    guard(|| {
        non_null(energy, "energy")?;
        (*energy).0.set_unary(var, cost0, cost1)?;
        Ok(())
    })
}

/// Adds a clique over `k` distinct `members` with a `2^k`-entry table. Bit
/// `i` of a table index is the label of `members[i]`. The clique index is
/// written to `out_id` unless it is null.
///
/// # Safety
/// `members` must hold `k` entries, `table` `table_len` entries.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_add_clique(
    energy: *mut SosEnergy,
    members: *const usize,
    k: usize,
    table: *const f64,
    table_len: usize,
    out_id: *mut usize,
) -> SosStatus {
    guard(|| {
        non_null(energy, "energy")?;
        let members = slice_arg(members, k, "members")?;
        let table = slice_arg(table, table_len, "table")?;
        let id = (*energy).0.add_clique(members, table.to_vec())?;
        if !out_id.is_null() {
            *out_id = id;
        }
        Ok(())
    })
}

/// Energy of a labeling of `n` variables.
///
/// # Safety
/// `labels` must hold `n` bytes and `out_value` be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_evaluate(
    energy: *const SosEnergy,
    labels: *const u8,
    n: usize,
    out_value: *mut f64,
) -> SosStatus {
    guard(|| {
        let e = energy_ref(energy)?;
        non_null(out_value, "out_value")?;
        let y = labeling_arg(labels, n, e.0.num_vars())?;
        *out_value = e.0.evaluate(&y)?;
        Ok(())
    })
}

/// Exact minimum by max-flow. Fails with `NotSubmodular` if any clique
/// table is not submodular.
///
/// # Safety
/// `out_labels` must hold `n` bytes, `n` equal to the number of variables.
#[no_mangle]
pub unsafe extern "C" fn sos_energy_minimize(
    energy: *const SosEnergy,
    out_value: *mut f64,
    out_labels: *mut u8,
    n: usize,
) -> SosStatus {
    guard(|| {
        let e = energy_ref(energy)?;
        non_null(out_value, "out_value")?;
        if n != e.0.num_vars() {
            return fail(SosStatus::Buffer, format!("output holds {n} labels; {} needed", e.0.num_vars()));
        }
        let r = flow::minimize_with(&e.0, &FlowOptions::default())?;
        write_labeling(out_labels, n, &r.minimizer)?;
        *out_value = r.min_value;
        Ok(())
    })
}

/// Minimum by enumeration, for small energies.
///
/// # Safety
/// As [`sos_energy_minimize`].
#[no_mangle]
pub unsafe extern "C" fn sos_energy_brute_force(
    energy: *const SosEnergy,
    out_value: *mut f64,
    out_labels: *mut u8,
    n: usize,
) -> SosStatus {
    guard(|| {
        let e = energy_ref(energy)?;
        non_null(out_value, "out_value")?;
        if n != e.0.num_vars() {
            return fail(SosStatus::Buffer, format!("output holds {n} labels; {} needed", e.0.num_vars()));
        }
        let (value, y) = e.0.brute_force_minimize()?;
        write_labeling(out_labels, n, &y)?;
        *out_value = value;
        Ok(())
    })
}

// ------------------------------------------------------------------- model

fn wrap_model(model: Model) -> FfiResult<Box<SosModel>> {
    let task = model_task(&model)?;
    if task != Task::MultilabelDemo {
        check_features(&model, task)?;
    }
    Ok(Box::new(SosModel { model, task }))
}

/// Loads a model file written by `sos train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sos_model_load(path: *const c_char, out: *mut *mut SosModel) -> SosStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = Path::new(text_arg(path, "path")?);
        let text = std::fs::read_to_string(path).map_err(|e| Failure(SosStatus::Io, format!("{}: {e}", path.display())))?;
        *out = Box::into_raw(wrap_model(read_model(&text)?)?);
        Ok(())
    })
}

/// Parses model text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sos_model_parse(text: *const c_char, out: *mut *mut SosModel) -> SosStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = Box::into_raw(wrap_model(read_model(text_arg(text, "text")?)?)?);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sos_model_free(model: *mut SosModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sos_model_task(model: *const SosModel, out: *mut SosTask) -> SosStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = match model_ref(model)?.task {
            Task::Denoise => SosTask::Denoise,
            Task::Segment => SosTask::Segment,
            Task::MultilabelDemo => SosTask::MultilabelDemo,
        };
        Ok(())
    })
}

/// Number of weights.
///
/// # Safety
/// `model` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sos_model_dim(model: *const SosModel, out: *mut usize) -> SosStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = model_ref(model)?.model.weights.len();
        Ok(())
    })
}

/// Copies the weights into `out`, which must hold exactly `len` =
/// [`sos_model_dim`] values.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn sos_model_weights(model: *const SosModel, out: *mut f64, len: usize) -> SosStatus {
    guard(|| {
        let w = &model_ref(model)?.model.weights;
        if len != w.len() {
            return fail(SosStatus::Buffer, format!("buffer holds {len} weights; the model has {}", w.len()));
        }
        if len > 0 {
            non_null(out, "out")?;
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(w);
        }
        Ok(())
    })
}

/// Writes the 64-digit hex schema hash and a NUL into `out` (65 bytes).
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn sos_model_schema_hash(model: *const SosModel, out: *mut c_char, len: usize) -> SosStatus {
    guard(|| {
        let hash = model_ref(model)?.model.schema.hash();
        if len < hash.len() + 1 {
            return fail(SosStatus::Buffer, format!("hash needs {} bytes", hash.len() + 1));
        }
        non_null(out, "out")?;
        let dst = std::slice::from_raw_parts_mut(out.cast::<u8>(), hash.len() + 1);
        dst[..hash.len()].copy_from_slice(hash.as_bytes());
        dst[hash.len()] = 0;
        Ok(())
    })
}

/// Predicts a binary mask for one image.
///
/// `pixels` is row-major with `channels` (1 or 3) interleaved values in
/// `[0, 1]`. `scribbles` holds one byte per pixel: 0 background, 1
/// foreground, 255 none; segmentation models require it, denoising models
/// ignore it and accept null. `out_mask` receives `width * height` bytes.
///
/// # Safety
/// Buffers must hold the sizes stated above.
#[no_mangle]
pub unsafe extern "C" fn sos_model_predict(
    model: *const SosModel,
    width: usize,
    height: usize,
    channels: usize,
    pixels: *const f64,
    scribbles: *const u8,
    out_mask: *mut u8,
) -> SosStatus {
    guard(|| {
        let m = model_ref(model)?;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure(SosStatus::InvalidInput, "image size overflows".into()))?;
        if n == 0 {
            return fail(SosStatus::InvalidInput, "image is empty");
        }
        let data = slice_arg(pixels, n.saturating_mul(channels), "pixels")?;
        let img = ImageGrid::new(width, height, channels, data.to_vec())?;
        let marks = if scribbles.is_null() {
            None
        } else {
            let labels = std::slice::from_raw_parts(scribbles, n)
                .iter()
                .map(|&b| match b {
                    SCRIBBLE_BG => Ok(Some(false)),
                    SCRIBBLE_FG => Ok(Some(true)),
                    SCRIBBLE_NONE => Ok(None),
                    other => fail(SosStatus::InvalidInput, format!("scribble byte {other}")),
                })
                .collect::<FfiResult<Vec<_>>>()?;
            Some(ScribbleMask { width, height, labels })
        };
        let mask = predict_one(&m.model, m.task, &img, marks.as_ref(), &FlowOptions::default())?;
        write_labeling(out_mask, n, &mask)
    })
}
