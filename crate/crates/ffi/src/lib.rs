//! C interface to the pan-sharpening library.
//!
//! Every fallible function returns a [`UcganStatus`]; on failure a
//! human-readable message is kept per thread and can be read with
//! [`ucgan_last_error`]. Objects are handed out as opaque pointers and must
//! be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ucgan::baselines::{fuse_baseline, BaselineKind};
use ucgan::imaging::{load_raster, save_raster, RasterImage};
use ucgan::metrics::{ergas, qnr, sam, ssim, ERGAS_RATIO};
use ucgan::net::Generator;
use ucgan::train::{load_generator, pansharpen};
use ucgan::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UcganStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    Degenerate = 6,
    Validation = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Classical fusion methods.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UcganBaseline {
    Ihs = 0,
    Brovey = 1,
    Hpf = 2,
    Sfim = 3,
}

impl From<UcganBaseline> for BaselineKind {
    fn from(b: UcganBaseline) -> Self {
        match b {
            UcganBaseline::Ihs => BaselineKind::Ihs,
            UcganBaseline::Brovey => BaselineKind::Brovey,
            UcganBaseline::Hpf => BaselineKind::Hpf,
            UcganBaseline::Sfim => BaselineKind::Sfim,
        }
    }
}

/// No-reference quality of a fused image.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UcganQnr {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

/// Full-reference quality of a fused image.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UcganReferenceMetrics {
    /// Spectral angle in degrees.
    pub sam_deg: f64,
    pub ergas: f64,
    pub ssim: f64,
}

/// Opaque band-sequential 16-bit image.
pub struct UcganRaster(RasterImage);

/// Opaque trained generator.
pub struct UcganGenerator(Generator<f32>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> UcganStatus {
    match e {
        Error::Io(_) => UcganStatus::Io,
        Error::Format(_) | Error::Json(_) | Error::Png(_) => UcganStatus::Format,
        Error::Dimension { .. } => UcganStatus::Dimension,
        Error::Degenerate(_) => UcganStatus::Degenerate,
        Error::Validation(_) | Error::NonFinite { .. } => UcganStatus::Validation,
        Error::Contract(_) => UcganStatus::InvalidArgument,
    }
}

/// Failure inside the boundary, before or after calling into the library.
struct Fail(UcganStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(UcganStatus::NullPointer, format!("`{what}` is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> UcganStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            UcganStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {msg}"));
            UcganStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(UcganStatus::InvalidArgument, format!("`{what}` is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ucgan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ucgan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a raster from `len` band-sequential samples.
///
/// # Safety
/// `pixels` must point to `len` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_raster_new(
    width: usize,
    height: usize,
    bands: usize,
    bit_depth: u16,
    pixels: *const u16,
    len: usize,
    out: *mut *mut UcganRaster,
) -> UcganStatus {
    guard(|| {
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let data = std::slice::from_raw_parts(pixels, len).to_vec();
        out_arg(out, UcganRaster(RasterImage::new(width, height, bands, bit_depth, data)?))
    })
}

/// Read a raster container from disk.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_raster_load(path: *const c_char, out: *mut *mut UcganRaster) -> UcganStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        out_arg(out, UcganRaster(load_raster(path)?))
    })
}

/// Write a raster container to disk.
///
/// # Safety
/// `raster` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ucgan_raster_save(raster: *const UcganRaster, path: *const c_char) -> UcganStatus {
    guard(|| {
        let r = ref_arg(raster, "raster")?;
        save_raster(&r.0, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Width, height, band count and bit depth; any out pointer may be NULL.
///
/// # Safety
/// `raster` must come from this library; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_raster_dims(
    raster: *const UcganRaster,
    width: *mut usize,
    height: *mut usize,
    bands: *mut usize,
    bit_depth: *mut u16,
) -> UcganStatus {
    guard(|| {
        let r = &ref_arg(raster, "raster")?.0;
        if let Some(w) = width.as_mut() {
            *w = r.width();
        }
        if let Some(h) = height.as_mut() {
            *h = r.height();
        }
        if let Some(b) = bands.as_mut() {
            *b = r.bands();
        }
        if let Some(d) = bit_depth.as_mut() {
            *d = r.bit_depth();
        }
        Ok(())
    })
}

/// Borrow the band-sequential samples. The pointer lives as long as the raster.
///
/// # Safety
/// `raster` must come from this library; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ucgan_raster_pixels(raster: *const UcganRaster, len: *mut usize) -> *const u16 {
    match raster.as_ref() {
        None => ptr::null(),
        Some(r) => {
            if let Some(l) = len.as_mut() {
                *l = r.0.pixels().len();
            }
            r.0.pixels().as_ptr()
        }
    }
}

/// # Safety
/// `raster` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ucgan_raster_free(raster: *mut UcganRaster) {
    if !raster.is_null() {
        drop(Box::from_raw(raster));
    }
}

/// Load a generator checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_generator_load(path: *const c_char, out: *mut *mut UcganGenerator) -> UcganStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        out_arg(out, UcganGenerator(load_generator(&path)?))
    })
}

/// Fuse a 1-band PAN with a 4-band MS at a quarter of its resolution.
///
/// # Safety
/// All handles must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_generator_pansharpen(
    generator: *const UcganGenerator,
    pan: *const UcganRaster,
    ms: *const UcganRaster,
    out: *mut *mut UcganRaster,
) -> UcganStatus {
    guard(|| {
        let g = ref_arg(generator, "generator")?;
        let fused = pansharpen(&g.0, &ref_arg(pan, "pan")?.0, &ref_arg(ms, "ms")?.0)?;
        out_arg(out, UcganRaster(fused))
    })
}

/// # Safety
/// `generator` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ucgan_generator_free(generator: *mut UcganGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

/// Fuse with a classical method. `guarded_pixels` (may be NULL) receives the
/// number of pixels that fell back to the upsampled MS.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_baseline(
    method: UcganBaseline,
    pan: *const UcganRaster,
    ms: *const UcganRaster,
    out: *mut *mut UcganRaster,
    guarded_pixels: *mut usize,
) -> UcganStatus {
    guard(|| {
        let fused = fuse_baseline(method.into(), &ref_arg(pan, "pan")?.0, &ref_arg(ms, "ms")?.0)?;
        if let Some(g) = guarded_pixels.as_mut() {
            *g = fused.guarded_pixels;
        }
        out_arg(out, UcganRaster(fused.image))
    })
}

/// QNR of a fused image against its source pair.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_qnr(
    fused: *const UcganRaster,
    ms: *const UcganRaster,
    pan: *const UcganRaster,
    out: *mut UcganQnr,
) -> UcganStatus {
    guard(|| {
        let f = ref_arg(fused, "fused")?.0.to_tensor::<f64>();
        let m = ref_arg(ms, "ms")?.0.to_tensor::<f64>();
        let p = ref_arg(pan, "pan")?.0.to_tensor::<f64>();
        let q = qnr(&f, &m, &p, None)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = UcganQnr {
            d_lambda: q.d_lambda,
            d_s: q.d_s,
            qnr: q.qnr,
        };
        Ok(())
    })
}

/// SAM, ERGAS and SSIM of a fused image against a same-size reference.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ucgan_reference_metrics(
    reference: *const UcganRaster,
    fused: *const UcganRaster,
    out: *mut UcganReferenceMetrics,
) -> UcganStatus {
    guard(|| {
        let r = &ref_arg(reference, "reference")?.0;
        let rt = r.to_tensor::<f64>();
        let ft = ref_arg(fused, "fused")?.0.to_tensor::<f64>();
        let m = UcganReferenceMetrics {
            sam_deg: sam(&rt, &ft)?,
            ergas: ergas(&rt, &ft, ERGAS_RATIO)?,
            ssim: ssim(&rt, &ft, f64::from(r.max_value()))?,
        };
        *out.as_mut().ok_or_else(|| null("out"))? = m;
        Ok(())
    })
}
