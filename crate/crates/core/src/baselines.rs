//! Classical component-substitution and multiresolution fusion methods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, high_pass, low_pass, FilterSpec, RasterImage, Scale, MS_BANDS, RATIO};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Ihs,
    Brovey,
    Hpf,
    Sfim,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [BaselineKind::Ihs, BaselineKind::Brovey, BaselineKind::Hpf, BaselineKind::Sfim];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Ihs => "ihs",
            BaselineKind::Brovey => "brovey",
            BaselineKind::Hpf => "hpf",
            BaselineKind::Sfim => "sfim",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::contract(format!("unknown baseline `{s}` (ihs|brovey|hpf|sfim)")))
    }
}

/// Divisors below this are not trusted; the pixel keeps the upsampled MS.
pub const MIN_DIVISOR: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOutput {
    pub image: RasterImage,
    /// Pixels where a ratio method fell back to the upsampled MS.
    pub guarded_pixels: usize,
}

/// Bicubic ×4 of the LR MS, the starting point of every method.
pub fn upsample_ms(lrms: &RasterImage) -> Result<Tensor<f64>> {
    bicubic_resize(&lrms.to_tensor::<f64>(), Scale::UP4)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Shift and scale `pan` to the mean and standard deviation of `target`.
fn match_moments(pan: &[f64], target: &[f64]) -> Vec<f64> {
    let (mp, sp) = mean_std(pan);
    let (mt, st) = mean_std(target);
    if sp == 0.0 {
        return vec![mt; pan.len()];
    }
    pan.iter().map(|p| (p - mp) * st / sp + mt).collect()
}

pub fn fuse_baseline(kind: BaselineKind, pan: &RasterImage, lrms: &RasterImage) -> Result<BaselineOutput> {
    if pan.bands() != 1 || lrms.bands() != MS_BANDS {
        return Err(Error::contract(format!(
            "baseline expects 1-band PAN and {MS_BANDS}-band MS, got {} and {}",
            pan.bands(),
            lrms.bands()
        )));
    }
    if pan.width() != RATIO * lrms.width() || pan.height() != RATIO * lrms.height() {
        return Err(Error::contract(format!(
            "PAN {}x{} is not {RATIO}x MS {}x{}",
            pan.width(),
            pan.height(),
            lrms.width(),
            lrms.height()
        )));
    }
    let up = upsample_ms(lrms)?;
    let plane = up.shape().plane();
    let u = up.data();
    let p_t = pan.to_tensor::<f64>();
    let p = p_t.data();
    let intensity: Vec<f64> = (0..plane)
        .map(|i| (0..MS_BANDS).map(|b| u[b * plane + i]).sum::<f64>() / MS_BANDS as f64)
        .collect();
    let filter = FilterSpec::averaging();
    let mut out = vec![0.0; MS_BANDS * plane];
    let mut guarded = 0;
    match kind {
        BaselineKind::Ihs => {
            let pm = match_moments(p, &intensity);
            for b in 0..MS_BANDS {
                for i in 0..plane {
                    out[b * plane + i] = u[b * plane + i] + (pm[i] - intensity[i]);
                }
            }
        }
        BaselineKind::Brovey => {
            let pm = match_moments(p, &intensity);
            for i in 0..plane {
                let ratio = if intensity[i] < MIN_DIVISOR {
                    guarded += 1;
                    1.0
                } else {
                    pm[i] / intensity[i]
                };
                for b in 0..MS_BANDS {
                    out[b * plane + i] = u[b * plane + i] * ratio;
                }
            }
        }
        BaselineKind::Hpf => {
            let detail = high_pass(&p_t, &filter)?;
            for b in 0..MS_BANDS {
                for i in 0..plane {
                    out[b * plane + i] = u[b * plane + i] + detail.data()[i];
                }
            }
        }
        BaselineKind::Sfim => {
            let smooth = low_pass(&p_t, &filter)?;
            for i in 0..plane {
                let s = smooth.data()[i];
                let ratio = if s < MIN_DIVISOR {
                    guarded += 1;
                    1.0
                } else {
                    p[i] / s
                };
                for b in 0..MS_BANDS {
                    out[b * plane + i] = u[b * plane + i] * ratio;
                }
            }
        }
    }
    let t = Tensor::from_vec(Shape::new(1, MS_BANDS, pan.height(), pan.width()), out)?;
    Ok(BaselineOutput {
        image: RasterImage::from_tensor(&t, lrms.bit_depth())?,
        guarded_pixels: guarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rounded_up(lrms: &RasterImage) -> RasterImage {
        RasterImage::from_tensor(&upsample_ms(lrms).unwrap(), lrms.bit_depth()).unwrap()
    }

    #[test]
    fn flat_pan_matching_intensity_injects_nothing() {
        // Bands sum to a constant 4·300 at every pixel, so I ≡ 300 everywhere.
        let (w, h) = (4, 4);
        let mut ms = Vec::new();
        for base in [200u16, 400, 250, 350] {
            for i in 0..(w * h) as u16 {
                ms.push(if base < 300 { base + 5 * i } else { base - 5 * i });
            }
        }
        let lrms = RasterImage::new(w, h, 4, 11, ms).unwrap();
        let up = upsample_ms(&lrms).unwrap();
        let plane = up.shape().plane();
        for i in 0..plane {
            let s: f64 = (0..4).map(|b| up.data()[b * plane + i]).sum();
            assert!((s - 1200.0).abs() < 1e-9);
        }
        let pan = RasterImage::filled(16, 16, 1, 11, 300).unwrap();
        for kind in BaselineKind::ALL {
            let out = fuse_baseline(kind, &pan, &lrms).unwrap();
            assert_eq!(out.image, rounded_up(&lrms), "{kind:?}");
            assert_eq!(out.guarded_pixels, 0);
        }
    }

    #[test]
    fn hpf_and_sfim_are_identity_on_any_flat_pan() {
        let ms: Vec<u16> = (0..4 * 16).map(|i| (i * 13 % 97 + 50) as u16).collect();
        let lrms = RasterImage::new(4, 4, 4, 11, ms).unwrap();
        let pan = RasterImage::filled(16, 16, 1, 11, 777).unwrap();
        for kind in [BaselineKind::Hpf, BaselineKind::Sfim] {
            assert_eq!(fuse_baseline(kind, &pan, &lrms).unwrap().image, rounded_up(&lrms));
        }
    }

    #[test]
    fn sfim_guards_dark_regions() {
        let lrms = RasterImage::filled(4, 4, 4, 11, 100).unwrap();
        let pan = RasterImage::filled(16, 16, 1, 11, 0).unwrap();
        let out = fuse_baseline(BaselineKind::Sfim, &pan, &lrms).unwrap();
        assert_eq!(out.guarded_pixels, 256);
        assert_eq!(out.image, rounded_up(&lrms));
    }

    #[test]
    fn outputs_respect_bit_depth_and_geometry() {
        let ms: Vec<u16> = (0..4 * 16).map(|i| if i % 3 == 0 { 2047 } else { 0 }).collect();
        let lrms = RasterImage::new(4, 4, 4, 11, ms).unwrap();
        let pan: Vec<u16> = (0..256).map(|i| if i % 2 == 0 { 2047 } else { 1 }).collect();
        let pan = RasterImage::new(16, 16, 1, 11, pan).unwrap();
        for kind in BaselineKind::ALL {
            let out = fuse_baseline(kind, &pan, &lrms).unwrap().image;
            assert_eq!((out.width(), out.height(), out.bands()), (16, 16, 4));
            assert!(out.pixels().iter().all(|&v| v <= 2047));
        }
        let bad = RasterImage::filled(8, 8, 1, 11, 0).unwrap();
        assert!(fuse_baseline(BaselineKind::Ihs, &bad, &lrms).is_err());
        assert!("gs".parse::<BaselineKind>().is_err());
    }
}
