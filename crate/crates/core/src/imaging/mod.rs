//! Rasters at native bit depth and the fixed image-domain operators used
//! around the networks: band replication, bicubic resampling, high/low-pass
//! split and Wald-style degradation.

mod filter;
pub mod msr;
mod png_export;
mod raster;
mod resample;

pub use filter::{high_pass, low_pass, FilterKind, FilterSpec};
pub use msr::{load_raster, save_raster};
pub use png_export::{export_rgb_png, percentile_stretch, render_rgb, Stretch};
pub use raster::{max_value, quantize, RasterImage};
pub use resample::{bicubic_axis, bicubic_resize, bicubic_resize_raster, cubic_weight, Scale, BICUBIC_A};

use crate::error::{Error, Result};
use crate::tensor::ops::repeat_channels;
use crate::tensor::{Element, Tensor};

/// Spatial ratio between PAN and MS.
pub const RATIO: usize = 4;
/// Number of MS bands.
pub const MS_BANDS: usize = 4;

/// (N, 1, H, W) PAN → (N, 4, H, W) with four identical channels.
pub fn replicate_pan<T: Element>(pan: &Tensor<T>) -> Result<Tensor<T>> {
    repeat_channels(pan, MS_BANDS)
}

/// Gaussian blur followed by bicubic ×1/4 on float tensors, no rounding.
pub fn degrade<T: Element>(x: &Tensor<T>, spec: &FilterSpec) -> Result<Tensor<T>> {
    bicubic_resize(&low_pass(x, spec)?, Scale::DOWN4)
}

/// Degrade a raster: blur, decimate ×1/4, round and clamp.
pub fn degrade_raster(img: &RasterImage, spec: &FilterSpec) -> Result<RasterImage> {
    if img.width() % RATIO != 0 || img.height() % RATIO != 0 {
        return Err(Error::contract(format!(
            "{}x{} raster is not divisible by {RATIO}",
            img.width(),
            img.height()
        )));
    }
    let t = degrade(&img.to_tensor::<f64>(), spec)?;
    RasterImage::from_tensor(&t, img.bit_depth())
}

/// Reduced-resolution pair for evaluation with the original MS as reference.
pub fn wald_degrade(pan: &RasterImage, ms: &RasterImage, spec: &FilterSpec) -> Result<(RasterImage, RasterImage)> {
    if pan.bands() != 1 || ms.bands() != MS_BANDS {
        return Err(Error::contract(format!(
            "wald_degrade expects 1-band PAN and {MS_BANDS}-band MS, got {} and {}",
            pan.bands(),
            ms.bands()
        )));
    }
    if pan.width() % 16 != 0 || pan.height() % 16 != 0 {
        return Err(Error::contract(format!(
            "PAN {}x{} must be divisible by 16",
            pan.width(),
            pan.height()
        )));
    }
    if pan.width() != RATIO * ms.width() || pan.height() != RATIO * ms.height() {
        return Err(Error::contract(format!(
            "PAN {}x{} is not {RATIO}x the MS {}x{}",
            pan.width(),
            pan.height(),
            ms.width(),
            ms.height()
        )));
    }
    Ok((degrade_raster(pan, spec)?, degrade_raster(ms, spec)?))
}
