//! C ABI over the core library. Models are opaque handles; every fallible
//! call returns a [`StvaeStatus`] and leaves a message retrievable with
//! [`stvae_last_error_message`] on the calling thread.
//!
//! Buffers are caller-owned. Field values are decibels at the 52
//! informative locations in canonical mask order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use stvae::car::{leroux_precision, AdjacencyMatrix};
use stvae::data::Series;
use stvae::field::{denormalize, pad_and_normalize_clamped, N_LOCATIONS};
use stvae::forecast::two_stage_predict;
use stvae::vae::{load_model, LatentCode, VaeModel};
use stvae::Error;

/// Informative locations per field.
pub const STVAE_N_LOCATIONS: usize = 52;

const _: () = assert!(STVAE_N_LOCATIONS == N_LOCATIONS);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StvaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    NonFinite = 4,
    Numerical = 5,
    Format = 6,
    Io = 7,
    Training = 8,
    Panic = 9,
}

/// Opaque trained model.
pub struct StvaeModel {
    inner: VaeModel,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> StvaeStatus {
    match e {
        Error::Shape { .. } => StvaeStatus::Shape,
        Error::NonFinite(_) => StvaeStatus::NonFinite,
        Error::InvalidArgument(_) => StvaeStatus::InvalidArgument,
        Error::Numerical(_) => StvaeStatus::Numerical,
        Error::Training { .. } => StvaeStatus::Training,
        Error::Format { .. } => StvaeStatus::Format,
        Error::Io(_) => StvaeStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StvaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            StvaeStatus::Ok
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            StvaeStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            StvaeStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, name: &'static str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a>(m: *const StvaeModel) -> Result<&'a VaeModel, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or(Fail::Null("model"))
}

fn expect_len(op: &'static str, expected: usize, found: usize) -> Result<(), Fail> {
    if expected != found {
        return Err(Fail::Core(Error::Shape { op, expected: expected.to_string(), found: found.to_string() }));
    }
    Ok(())
}

/// Loads a model file. On success `*out` owns a handle to free with
/// [`stvae_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn stvae_model_load(path: *const c_char, out: *mut *mut StvaeModel) -> StvaeStatus {
    guard(|| {
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail::Core(Error::InvalidArgument("path is not valid UTF-8".into())))?;
        let inner = load_model(Path::new(path))?;
        *out = Box::into_raw(Box::new(StvaeModel { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must come from [`stvae_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn stvae_model_free(model: *mut StvaeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Latent dimension of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stvae_model_latent_dim(model: *const StvaeModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.latent_dim())
}

/// Encodes one field of `n_values` (= 52) decibel values into `code_out`
/// of length `code_len` (= latent dimension).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stvae_encode(
    model: *const StvaeModel,
    values: *const f64,
    n_values: usize,
    code_out: *mut f64,
    code_len: usize,
) -> StvaeStatus {
    guard(|| {
        let m = handle(model)?;
        expect_len("stvae_encode values", N_LOCATIONS, n_values)?;
        expect_len("stvae_encode code", m.latent_dim(), code_len)?;
        let v = slice(values, n_values, "values")?;
        let out = slice_mut(code_out, code_len, "code_out")?;
        let z = m.encode(&pad_and_normalize_clamped(v, &m.mask, &m.bounds)?)?;
        out.copy_from_slice(z.as_slice());
        Ok(())
    })
}

/// Decodes a latent code into 52 decibel values.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stvae_decode(
    model: *const StvaeModel,
    code: *const f64,
    code_len: usize,
    values_out: *mut f64,
    n_values: usize,
) -> StvaeStatus {
    guard(|| {
        let m = handle(model)?;
        expect_len("stvae_decode code", m.latent_dim(), code_len)?;
        expect_len("stvae_decode values", N_LOCATIONS, n_values)?;
        let z = slice(code, code_len, "code")?;
        let out = slice_mut(values_out, n_values, "values_out")?;
        let f = m.decode(&LatentCode::new(z.to_vec())?)?;
        out.copy_from_slice(&denormalize(&f, &m.bounds));
        Ok(())
    })
}

/// Two-stage forecast of one series. `values` holds `n_visits` rows of 52
/// decibel values; `out` receives `n_horizons` rows of 52 predictions at
/// the absolute times in `horizons`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stvae_two_stage_predict(
    model: *const StvaeModel,
    times: *const f64,
    values: *const f64,
    n_visits: usize,
    horizons: *const f64,
    n_horizons: usize,
    out: *mut f64,
) -> StvaeStatus {
    guard(|| {
        let m = handle(model)?;
        let t = slice(times, n_visits, "times")?;
        let v = slice(values, n_visits * N_LOCATIONS, "values")?;
        let h = slice(horizons, n_horizons, "horizons")?;
        let o = slice_mut(out, n_horizons * N_LOCATIONS, "out")?;
        let visits = v.chunks(N_LOCATIONS).map(<[f64]>::to_vec).collect();
        let series = Series::new("ffi", t.to_vec(), visits)?;
        let f = two_stage_predict(m, &series, h)?;
        for (row, p) in o.chunks_mut(N_LOCATIONS).zip(&f.predictions) {
            row.copy_from_slice(p);
        }
        Ok(())
    })
}

/// Leroux precision rho (D - W) + (1 - rho) I of a symmetric 0/1 adjacency
/// matrix, both `n` x `n` row-major.
///
/// # Safety
/// `adjacency` and `out` must each hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn stvae_leroux_precision(adjacency: *const f64, n: usize, rho: f64, out: *mut f64) -> StvaeStatus {
    guard(|| {
        if n == 0 {
            return Err(Fail::Core(Error::InvalidArgument("adjacency must be at least 1 x 1".into())));
        }
        let a = slice(adjacency, n * n, "adjacency")?;
        let o = slice_mut(out, n * n, "out")?;
        let w = AdjacencyMatrix::from_dense(stvae::car::DMatrix::from_row_slice(n, n, a))?;
        let q = leroux_precision(&w, rho)?;
        for i in 0..n {
            for j in 0..n {
                o[i * n + j] = q[(i, j)];
            }
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) into `buf` and returns the full message length.
/// Call with a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn stvae_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
