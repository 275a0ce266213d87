//! Keys cubic convolution (a = -0.5) as a fixed separable linear operator.
//!
//! Output pixel `o` samples the input at `(o + 0.5) / scale - 0.5` with four
//! taps on the input grid; out-of-range taps are clamped to the border.

use std::sync::Arc;

use super::RasterImage;
use crate::error::{Error, Result};
use crate::tensor::ops::{separable, AxisMap};
use crate::tensor::{Element, Tensor};

/// Cubic convolution parameter.
pub const BICUBIC_A: f64 = -0.5;

/// Positive rational resampling factor `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scale {
    pub num: u32,
    pub den: u32,
}

impl Scale {
    pub const ONE: Scale = Scale { num: 1, den: 1 };
    pub const UP4: Scale = Scale { num: 4, den: 1 };
    pub const DOWN4: Scale = Scale { num: 1, den: 4 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::contract(format!("resampling scale {num}/{den} must be positive")));
        }
        Ok(Scale { num, den })
    }

    fn validate(&self) -> Result<()> {
        Scale::new(self.num, self.den).map(|_| ())
    }

    /// floor(len · num / den).
    pub fn apply(&self, len: usize) -> usize {
        len * self.num as usize / self.den as usize
    }

    fn inverse_ratio(&self) -> f64 {
        f64::from(self.den) / f64::from(self.num)
    }
}

/// Keys kernel.
pub fn cubic_weight(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Four-tap map from `in_len` samples to `out_len` samples at the given scale.
pub fn bicubic_axis(in_len: usize, out_len: usize, scale: Scale) -> AxisMap {
    let ratio = scale.inverse_ratio();
    let last = in_len as isize - 1;
    let taps = (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * ratio - 0.5;
            let base = center.floor();
            let t = center - base;
            let base = base as isize;
            let raw: Vec<(usize, f64)> = (-1..=2)
                .map(|d| {
                    let idx = (base + d).clamp(0, last) as usize;
                    (idx, cubic_weight(t - d as f64))
                })
                .collect();
            let total: f64 = raw.iter().map(|(_, w)| w).sum();
            raw.into_iter().filter(|(_, w)| *w != 0.0).map(|(i, w)| (i, w / total)).collect()
        })
        .collect();
    AxisMap::new(in_len, taps).expect("clamped indices")
}

/// Resize every plane of an N×C×H×W tensor. Differentiable.
pub fn bicubic_resize<T: Element>(x: &Tensor<T>, scale: Scale) -> Result<Tensor<T>> {
    scale.validate()?;
    let s = x.shape();
    let (ho, wo) = (scale.apply(s.h()), scale.apply(s.w()));
    if ho == 0 || wo == 0 {
        return Err(Error::contract(format!(
            "resampling {}x{} by {}/{} leaves no pixels",
            s.h(),
            s.w(),
            scale.num,
            scale.den
        )));
    }
    let rows = Arc::new(bicubic_axis(s.h(), ho, scale));
    let cols = Arc::new(bicubic_axis(s.w(), wo, scale));
    separable(x, &rows, &cols)
}

/// Integer-domain resize: float resample, then round and clamp.
pub fn bicubic_resize_raster(img: &RasterImage, scale: Scale) -> Result<RasterImage> {
    let t = bicubic_resize(&img.to_tensor::<f64>(), scale)?;
    RasterImage::from_tensor(&t, img.bit_depth())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn kernel_reference_points() {
        assert_eq!(cubic_weight(0.0), 1.0);
        assert_eq!(cubic_weight(1.0), 0.0);
        assert_eq!(cubic_weight(2.0), 0.0);
        assert!((cubic_weight(0.5) - 0.5625).abs() < 1e-15);
        assert!((cubic_weight(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn unit_scale_is_identity() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 2, 3, 5), (0..30).map(|i| (i * i) as f64).collect()).unwrap();
        assert_eq!(bicubic_resize(&x, Scale::ONE).unwrap().data(), x.data());
    }

    #[test]
    fn constant_is_preserved() {
        let x = Tensor::<f64>::full(Shape::new(1, 1, 8, 8), 321.0);
        for s in [Scale::UP4, Scale::DOWN4, Scale::new(3, 2).unwrap()] {
            let y = bicubic_resize(&x, s).unwrap();
            assert!(y.data().iter().all(|v| (v - 321.0).abs() < 1e-10));
        }
    }

    #[test]
    fn zero_scale_is_rejected() {
        assert!(Scale::new(0, 1).is_err());
        let x = Tensor::<f64>::full(Shape::new(1, 1, 2, 2), 1.0);
        assert!(bicubic_resize(&x, Scale { num: 1, den: 0 }).is_err());
        assert!(bicubic_resize(&x, Scale::new(1, 4).unwrap()).is_err());
    }
}
