//! C interface to `tangencylab`.
//!
//! Models and cascade results are opaque handles owned by the caller and
//! released with the matching `_free` function. Every function returning
//! `TlStatus` leaves a message for `tl_last_error_message` on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tangencylab::cantor::{affine_cantor, thickness};
use tangencylab::cascade::{self, CascadeResult};
use tangencylab::model::{return_jacobian, return_map, ModelMap, Point, Word};
use tangencylab::orbits::{find_periodic, OrbitClass};
use tangencylab::quadratic;
use tangencylab::Error;

/// Opaque model handle.
pub struct TlModel(ModelMap);

/// Opaque cascade result handle.
pub struct TlCascade(CascadeResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    Domain = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TlPoint {
    pub x: f64,
    pub y: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlOrbitClass {
    Sink = 0,
    Saddle = 1,
    Source = 2,
    Nonhyperbolic = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TlQuadAnalysis {
    pub mu_hat: f64,
    /// Number of real fixed points (0, 1 or 2).
    pub fixed_point_count: u32,
    pub fixed_points: [f64; 2],
    /// Multiplier of the lower fixed point; NaN when there is none.
    pub sink_multiplier: f64,
    pub is_sink: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlOrbit {
    pub point: TlPoint,
    pub period: usize,
    /// Multipliers ordered by decreasing modulus.
    pub multiplier_re: [f64; 2],
    pub multiplier_im: [f64; 2],
    pub orbit_class: TlOrbitClass,
    pub residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TlWindow {
    pub index: usize,
    pub n: usize,
    pub period: usize,
    pub t_center: f64,
    pub nu_zero: f64,
    pub nu_minus: f64,
    pub nu_plus: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub width: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TlStatus {
    match e {
        Error::Validation(_) => TlStatus::InvalidArgument,
        Error::Precondition(_) => TlStatus::Precondition,
        Error::Escape { .. } | Error::FoldDomain { .. } => TlStatus::Domain,
        Error::Numerical(_) => TlStatus::Numerical,
        Error::Io { .. } => TlStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            TlStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            TlStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            TlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn word_arg(p: *const c_char) -> Result<Word, Failure> {
    Ok(str_arg(p, "word")?.parse::<Word>()?)
}

fn orbit_class(c: OrbitClass) -> TlOrbitClass {
    match c {
        OrbitClass::Sink => TlOrbitClass::Sink,
        OrbitClass::Saddle => TlOrbitClass::Saddle,
        OrbitClass::Source => TlOrbitClass::Source,
        OrbitClass::Nonhyperbolic => TlOrbitClass::Nonhyperbolic,
    }
}

fn window(w: &cascade::SinkWindow) -> TlWindow {
    TlWindow {
        index: w.index,
        n: w.n,
        period: w.period,
        t_center: w.t_center,
        nu_zero: w.nu_zero,
        nu_minus: w.nu_minus,
        nu_plus: w.nu_plus,
        t_minus: w.t_minus,
        t_plus: w.t_plus,
        width: w.width,
    }
}

/// Message of the last failure on the calling thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// The default model. Free with `tl_model_free`.
#[no_mangle]
pub extern "C" fn tl_model_default() -> *mut TlModel {
    Box::into_raw(Box::new(TlModel(ModelMap::default())))
}

/// Parses and validates a model configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_model_from_json(
    json: *const c_char,
    out: *mut *mut TlModel,
) -> TlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let m: ModelMap =
            serde_json::from_str(text).map_err(|e| Failure::Arg(format!("model JSON: {e}")))?;
        m.validate()?;
        *out = Box::into_raw(Box::new(TlModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_model_free(model: *mut TlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_model_set_t(model: *mut TlModel, t: f64) -> TlStatus {
    guard(|| {
        let m = out_ref(model, "model")?;
        if !t.is_finite() {
            return Err(Failure::Arg(format!("t must be finite, got {t}")));
        }
        m.0.t = t;
        Ok(())
    })
}

/// Image of `p` under the return map through the saddle itinerary `word`
/// (a string of '0' and '1').
///
/// # Safety
/// `model` must be a live handle, `word` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_return_map(
    model: *const TlModel,
    word: *const c_char,
    p: TlPoint,
    out: *mut TlPoint,
) -> TlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out = out_ref(out, "out")?;
        let q = return_map(&m.0, &word_arg(word)?, Point::new(p.x, p.y))?;
        *out = TlPoint { x: q.x, y: q.y };
        Ok(())
    })
}

/// Jacobian of the return map at `p`, row-major.
///
/// # Safety
/// `model` must be a live handle, `word` NUL-terminated, `out` room for 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_return_jacobian(
    model: *const TlModel,
    word: *const c_char,
    p: TlPoint,
    out: *mut f64,
) -> TlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let j = return_jacobian(&m.0, &word_arg(word)?, Point::new(p.x, p.y))?;
        let out = std::slice::from_raw_parts_mut(out, 4);
        out.copy_from_slice(&[j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]]);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_quad_analyze(mu_hat: f64, out: *mut TlQuadAnalysis) -> TlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let q = quadratic::analyze(mu_hat);
        let mut fixed_points = [f64::NAN; 2];
        for (slot, y) in fixed_points.iter_mut().zip(&q.fixed_points) {
            *slot = *y;
        }
        *out = TlQuadAnalysis {
            mu_hat,
            fixed_point_count: q.fixed_points.len() as u32,
            fixed_points,
            sink_multiplier: q.sink_multiplier.unwrap_or(f64::NAN),
            is_sink: q.is_sink(),
        };
        Ok(())
    })
}

/// Thickness of the symmetric self-similar set with ratio `r` at `depth`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_thickness_affine(r: f64, depth: usize, out: *mut f64) -> TlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = thickness(&affine_cantor(r, depth, (0.0, 1.0))?).tau;
        Ok(())
    })
}

/// Periodic orbit of the return through `word` by Newton's method from `seed`.
///
/// # Safety
/// `model` must be a live handle, `word` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_find_periodic(
    model: *const TlModel,
    word: *const c_char,
    seed: TlPoint,
    out: *mut TlOrbit,
) -> TlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out = out_ref(out, "out")?;
        let o = find_periodic(&m.0, &word_arg(word)?, Point::new(seed.x, seed.y))?;
        *out = TlOrbit {
            point: TlPoint {
                x: o.point.x,
                y: o.point.y,
            },
            period: o.period,
            multiplier_re: [o.multipliers[0].re, o.multipliers[1].re],
            multiplier_im: [o.multipliers[0].im, o.multipliers[1].im],
            orbit_class: orbit_class(o.class),
            residual: o.residual,
        };
        Ok(())
    })
}

/// Sink window of the tangency addressed by `word`. A nonpositive `rho`
/// disables the eigenvalue narrowing.
///
/// # Safety
/// `model` must be a live handle, `word` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_sink_window(
    model: *const TlModel,
    word: *const c_char,
    rho: f64,
    eps: f64,
    out: *mut TlWindow,
) -> TlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out = out_ref(out, "out")?;
        let rho = (rho > 0.0).then_some(rho);
        *out = window(&cascade::sink_window(&m.0, &word_arg(word)?, rho, eps)?);
        Ok(())
    })
}

/// Runs the cascade construction. `min_n` may be NULL when `min_n_len` is 0.
/// On failure `*out` is NULL.
///
/// # Safety
/// `model` must be a live handle, `min_n` valid for `min_n_len` reads, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_cascade_run(
    model: *const TlModel,
    sinks: usize,
    rho: f64,
    min_n: *const usize,
    min_n_len: usize,
    eps: f64,
    out: *mut *mut TlCascade,
) -> TlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let m = deref(model, "model")?;
        let min_n = match (min_n.is_null(), min_n_len) {
            (_, 0) => &[][..],
            (true, _) => return Err(Failure::Null("min_n")),
            (false, len) => std::slice::from_raw_parts(min_n, len),
        };
        let r = cascade::run_cascade(&m.0, sinks, rho, min_n, eps)?;
        *out = Box::into_raw(Box::new(TlCascade(r)));
        Ok(())
    })
}

/// # Safety
/// `cascade` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_cascade_free(cascade: *mut TlCascade) {
    if !cascade.is_null() {
        drop(Box::from_raw(cascade));
    }
}

/// Number of windows, or 0 for NULL.
///
/// # Safety
/// `cascade` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_cascade_window_count(cascade: *const TlCascade) -> usize {
    cascade.as_ref().map_or(0, |c| c.0.windows.len())
}

/// # Safety
/// `cascade` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_cascade_window(
    cascade: *const TlCascade,
    index: usize,
    out: *mut TlWindow,
) -> TlStatus {
    guard(|| {
        let c = deref(cascade, "cascade")?;
        let out = out_ref(out, "out")?;
        let w = c.0.windows.get(index).ok_or_else(|| {
            Failure::Arg(format!(
                "window index {index} out of range (count {})",
                c.0.windows.len()
            ))
        })?;
        *out = window(w);
        Ok(())
    })
}

/// # Safety
/// `cascade` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_cascade_t_infinity(
    cascade: *const TlCascade,
    out: *mut f64,
) -> TlStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(cascade, "cascade")?.0.t_infinity;
        Ok(())
    })
}

/// JSON form of the cascade result. Free the string with `tl_string_free`.
///
/// # Safety
/// `cascade` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tl_cascade_to_json(
    cascade: *const TlCascade,
    out: *mut *mut c_char,
) -> TlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let c = deref(cascade, "cascade")?;
        let s = serde_json::to_string_pretty(&c.0)
            .map_err(|e| Failure::Lib(Error::Numerical(e.to_string())))?;
        *out = CString::new(s).expect("JSON has no NUL bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
