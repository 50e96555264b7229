//! C ABI over `pta-core`.
//!
//! Images and masks are opaque handles created by `pta_*_new`/`pta_*_read` and
//! released with the matching `pta_*_free`. Every fallible call returns a
//! [`PtaStatus`]; on failure `pta_last_error_message` describes the error for the
//! calling thread until its next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pta_core::io::{read_binary_mask, read_gray_image, write_binary_mask};
use pta_core::losses::{dsc_loss, pt_for_mask};
use pta_core::metrics::{assd, dsc_metric, hausdorff, precision_recall};
use pta_core::refine::{refine, RefineConfig};
use pta_core::{BinaryMask, GrayImage, LossMode, PtaError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EmptyRegion = 3,
    DimensionMismatch = 4,
    InsufficientSample = 5,
    DegenerateBands = 6,
    OutOfBounds = 7,
    Malformed = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtaMode {
    TTest = 0,
    MeanDiff = 1,
}

/// Band-loss parameters; obtain defaults from `pta_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtaConfig {
    pub lambda: f64,
    pub sectors: usize,
    pub band_width: f64,
    pub threshold: f64,
    pub epsilon: f64,
    /// A `PtaMode` value.
    pub mode: u32,
}

impl TryFrom<PtaConfig> for pta_core::PtaConfig {
    type Error = PtaError;

    fn try_from(c: PtaConfig) -> Result<Self, PtaError> {
        let mode = match c.mode {
            m if m == PtaMode::TTest as u32 => LossMode::TTest,
            m if m == PtaMode::MeanDiff as u32 => LossMode::MeanDiff,
            other => return Err(PtaError::InvalidArgument(format!("unknown mode {other}"))),
        };
        let cfg = pta_core::PtaConfig {
            lambda: c.lambda,
            sectors: c.sectors,
            band_width: c.band_width,
            threshold: c.threshold,
            epsilon: c.epsilon,
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Opaque grayscale image.
pub struct PtaImage(GrayImage);

/// Opaque binary mask.
pub struct PtaMask(BinaryMask);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &PtaError) -> PtaStatus {
    match e {
        PtaError::InvalidArgument(_) => PtaStatus::InvalidArgument,
        PtaError::EmptyRegion(_) => PtaStatus::EmptyRegion,
        PtaError::DimensionMismatch { .. } => PtaStatus::DimensionMismatch,
        PtaError::InsufficientSample { .. } => PtaStatus::InsufficientSample,
        PtaError::DegenerateBands { .. } => PtaStatus::DegenerateBands,
        PtaError::OutOfBounds(_) => PtaStatus::OutOfBounds,
        PtaError::Malformed { .. } => PtaStatus::Malformed,
        PtaError::Io(_) => PtaStatus::Io,
    }
}

enum Fail {
    Core(PtaError),
    Status(PtaStatus, String),
}

impl From<PtaError> for Fail {
    fn from(e: PtaError) -> Self {
        Fail::Core(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(PtaStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PtaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtaStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PtaStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail::Status(PtaStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failing call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn pta_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn pta_config_default() -> PtaConfig {
    let d = pta_core::PtaConfig::default();
    PtaConfig {
        lambda: d.lambda,
        sectors: d.sectors,
        band_width: d.band_width,
        threshold: d.threshold,
        epsilon: d.epsilon,
        mode: PtaMode::TTest as u32,
    }
}

/// Copies `width * height` row-major intensities into a new image.
///
/// # Safety
/// `values` must point to `width * height` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pta_image_new(width: usize, height: usize, values: *const f64, out: *mut *mut PtaImage) -> PtaStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let n = width.checked_mul(height).ok_or_else(|| Fail::Status(PtaStatus::InvalidArgument, "size overflow".into()))?;
        let image = GrayImage::new(width, height, std::slice::from_raw_parts(values, n).to_vec())?;
        write_out(out, Box::into_raw(Box::new(PtaImage(image))), "out")
    })
}

/// Reads a PGM, PNG or PFM image.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pta_image_read(path: *const c_char, out: *mut *mut PtaImage) -> PtaStatus {
    guard(|| {
        let image = read_gray_image(path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(PtaImage(image))), "out")
    })
}

/// # Safety
/// `image` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pta_image_free(image: *mut PtaImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Builds a mask from `width * height` row-major bytes; non-zero is foreground.
///
/// # Safety
/// `bits` must point to `width * height` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pta_mask_new(width: usize, height: usize, bits: *const u8, out: *mut *mut PtaMask) -> PtaStatus {
    guard(|| {
        if bits.is_null() {
            return Err(null("bits"));
        }
        let n = width.checked_mul(height).ok_or_else(|| Fail::Status(PtaStatus::InvalidArgument, "size overflow".into()))?;
        let flags = std::slice::from_raw_parts(bits, n).iter().map(|&b| b != 0).collect();
        let mask = BinaryMask::new(width, height, flags)?;
        write_out(out, Box::into_raw(Box::new(PtaMask(mask))), "out")
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pta_mask_read(path: *const c_char, out: *mut *mut PtaMask) -> PtaStatus {
    guard(|| {
        let mask = read_binary_mask(path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(PtaMask(mask))), "out")
    })
}

/// Writes foreground as 255; the format follows the extension.
///
/// # Safety
/// `mask` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pta_mask_write(mask: *const PtaMask, path: *const c_char) -> PtaStatus {
    guard(|| {
        let mask = borrow(mask, "mask")?;
        Ok(write_binary_mask(path_arg(path)?, &mask.0)?)
    })
}

/// Copies the mask into `bits` (0 or 1 per pixel, row-major).
///
/// # Safety
/// `mask` must be a live handle; `bits` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pta_mask_bits(mask: *const PtaMask, bits: *mut u8, len: usize) -> PtaStatus {
    guard(|| {
        let mask = borrow(mask, "mask")?;
        let src = mask.0.bits();
        if bits.is_null() {
            return Err(null("bits"));
        }
        if len < src.len() {
            return Err(Fail::Status(PtaStatus::BufferTooSmall, format!("need {} bytes, got {len}", src.len())));
        }
        let dst = std::slice::from_raw_parts_mut(bits, src.len());
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = s as u8;
        }
        Ok(())
    })
}

/// # Safety
/// `mask` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pta_mask_dims(mask: *const PtaMask, width: *mut usize, height: *mut usize, count: *mut usize) -> PtaStatus {
    guard(|| {
        let mask = borrow(mask, "mask")?;
        write_out(width, mask.0.width(), "width")?;
        write_out(height, mask.0.height(), "height")?;
        write_out(count, mask.0.count(), "count")
    })
}

/// # Safety
/// `mask` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pta_mask_free(mask: *mut PtaMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Piecewise band loss of `mask` on `image`. When `sector_losses` is non-null it
/// receives `config.sectors` values, NaN for sectors without enough pixels.
///
/// # Safety
/// Handles must be live; `config` and `aggregate` valid; `sector_losses` null or `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pta_piecewise_loss(
    image: *const PtaImage,
    mask: *const PtaMask,
    config: *const PtaConfig,
    aggregate: *mut f64,
    sector_losses: *mut f64,
    len: usize,
) -> PtaStatus {
    guard(|| {
        let (image, mask, config) = (borrow(image, "image")?, borrow(mask, "mask")?, borrow(config, "config")?);
        let cfg = pta_core::PtaConfig::try_from(*config)?;
        if !sector_losses.is_null() && len < cfg.sectors {
            return Err(Fail::Status(PtaStatus::BufferTooSmall, format!("need {} values, got {len}", cfg.sectors)));
        }
        let report = pt_for_mask(&image.0, &mask.0, &cfg)?;
        write_out(aggregate, report.aggregate, "aggregate")?;
        if !sector_losses.is_null() {
            let dst = std::slice::from_raw_parts_mut(sector_losses, cfg.sectors);
            for (d, s) in dst.iter_mut().zip(&report.per_sector) {
                *d = s.loss.unwrap_or(f64::NAN);
            }
        }
        Ok(())
    })
}

unsafe fn pair_metric(
    gt: *const PtaMask,
    seg: *const PtaMask,
    out: *mut f64,
    f: fn(&BinaryMask, &BinaryMask) -> pta_core::Result<f64>,
) -> PtaStatus {
    guard(|| {
        let (gt, seg) = (borrow(gt, "gt")?, borrow(seg, "seg")?);
        let v = f(&gt.0, &seg.0)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pta_dsc(gt: *const PtaMask, seg: *const PtaMask, out: *mut f64) -> PtaStatus {
    pair_metric(gt, seg, out, dsc_metric)
}

/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pta_dsc_loss(gt: *const PtaMask, seg: *const PtaMask, out: *mut f64) -> PtaStatus {
    pair_metric(gt, seg, out, dsc_loss)
}

/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pta_hausdorff(gt: *const PtaMask, seg: *const PtaMask, out: *mut f64) -> PtaStatus {
    pair_metric(gt, seg, out, hausdorff)
}

/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pta_assd(gt: *const PtaMask, seg: *const PtaMask, out: *mut f64) -> PtaStatus {
    pair_metric(gt, seg, out, assd)
}

/// # Safety
/// Handles must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pta_precision_recall(
    gt: *const PtaMask,
    seg: *const PtaMask,
    precision: *mut f64,
    recall: *mut f64,
) -> PtaStatus {
    guard(|| {
        let (gt, seg) = (borrow(gt, "gt")?, borrow(seg, "seg")?);
        let (p, r) = precision_recall(&gt.0, &seg.0)?;
        write_out(precision, p, "precision")?;
        write_out(recall, r, "recall")
    })
}

/// Greedy refinement of `init`; the refined mask is returned as a new handle.
///
/// # Safety
/// Handles must be live; `config` valid; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pta_refine(
    image: *const PtaImage,
    init: *const PtaMask,
    config: *const PtaConfig,
    mu: f64,
    max_iters: usize,
    moves_per_iter: usize,
    seed: u64,
    out: *mut *mut PtaMask,
    final_objective: *mut f64,
) -> PtaStatus {
    guard(|| {
        let (image, init, config) = (borrow(image, "image")?, borrow(init, "init")?, borrow(config, "config")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let rc = RefineConfig {
            mu,
            max_iters,
            moves_per_iter,
            seed,
            pta: pta_core::PtaConfig::try_from(*config)?,
            ..RefineConfig::default()
        };
        let (mask, trace) = refine(&image.0, &init.0, &rc)?;
        let objective = trace.rows.last().map_or(trace.initial_objective, |r| r.objective);
        if !final_objective.is_null() {
            final_objective.write(objective);
        }
        write_out(out, Box::into_raw(Box::new(PtaMask(mask))), "out")
    })
}
