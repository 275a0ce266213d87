use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ops::{separable, sub, AxisMap};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterKind {
    Box,
    Gaussian { sigma: f64 },
}

/// Normalised separable smoothing kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    #[serde(flatten)]
    pub kind: FilterKind,
    pub size: usize,
}

impl FilterSpec {
    pub fn boxed(size: usize) -> Result<Self> {
        let spec = FilterSpec { kind: FilterKind::Box, size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        let spec = FilterSpec {
            kind: FilterKind::Gaussian { sigma },
            size,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 5×5 box used by the high/low-pass split.
    pub fn averaging() -> Self {
        FilterSpec { kind: FilterKind::Box, size: 5 }
    }

    /// 7-tap, σ = 2 Gaussian used before ×1/4 decimation.
    pub fn wald_gaussian() -> Self {
        FilterSpec {
            kind: FilterKind::Gaussian { sigma: 2.0 },
            size: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 3 || self.size % 2 == 0 {
            return Err(Error::contract(format!("filter size must be odd and >= 3, got {}", self.size)));
        }
        if let FilterKind::Gaussian { sigma } = self.kind {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::contract(format!("gaussian sigma must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    /// 1-D weights summing to one.
    pub fn weights(&self) -> Vec<f64> {
        let r = (self.size / 2) as isize;
        let raw: Vec<f64> = match self.kind {
            FilterKind::Box => vec![1.0; self.size],
            FilterKind::Gaussian { sigma } => (-r..=r)
                .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
                .collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Same-size map with border samples repeated.
    pub fn axis(&self, len: usize) -> AxisMap {
        let weights = self.weights();
        let r = (self.size / 2) as isize;
        let last = len as isize - 1;
        let taps = (0..len as isize)
            .map(|i| {
                (-r..=r)
                    .zip(&weights)
                    .map(|(d, &w)| ((i + d).clamp(0, last) as usize, w))
                    .collect()
            })
            .collect();
        AxisMap::new(len, taps).expect("clamped indices")
    }
}

/// Smoothing with clamp-edge padding. Differentiable.
pub fn low_pass<T: Element>(x: &Tensor<T>, spec: &FilterSpec) -> Result<Tensor<T>> {
    spec.validate()?;
    let s = x.shape();
    let rows = Arc::new(spec.axis(s.h()));
    let cols = Arc::new(spec.axis(s.w()));
    separable(x, &rows, &cols)
}

/// `x - low_pass(x)`.
pub fn high_pass<T: Element>(x: &Tensor<T>, spec: &FilterSpec) -> Result<Tensor<T>> {
    sub(x, &low_pass(x, spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn impulse(n: usize) -> Tensor<f64> {
        let mut v = vec![0.0; n * n];
        v[(n / 2) * n + n / 2] = 1.0;
        Tensor::from_vec(Shape::new(1, 1, n, n), v).unwrap()
    }

    #[test]
    fn even_or_tiny_sizes_are_rejected() {
        assert!(FilterSpec::boxed(4).is_err());
        assert!(FilterSpec::boxed(1).is_err());
        assert!(FilterSpec::gaussian(5, 0.0).is_err());
        let bad = FilterSpec { kind: FilterKind::Box, size: 6 };
        assert!(low_pass(&impulse(7), &bad).is_err());
    }

    #[test]
    fn gaussian_weights_are_normalised_and_symmetric() {
        let w = FilterSpec::wald_gaussian().weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!(w[i], w[6 - i]);
        }
    }

    #[test]
    fn impulse_response_of_3x3_box() {
        let spec = FilterSpec::boxed(3).unwrap();
        let lp = low_pass(&impulse(7), &spec).unwrap();
        let hp = high_pass(&impulse(7), &spec).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                let near = (y as isize - 3).abs() <= 1 && (x as isize - 3).abs() <= 1;
                let l = lp.data()[y * 7 + x];
                let h = hp.data()[y * 7 + x];
                if near {
                    assert!((l - 1.0 / 9.0).abs() < 1e-15);
                    let expect_h = if y == 3 && x == 3 { 8.0 / 9.0 } else { -1.0 / 9.0 };
                    assert!((h - expect_h).abs() < 1e-15);
                } else {
                    assert_eq!(l, 0.0);
                    assert_eq!(h, 0.0);
                }
            }
        }
    }

    #[test]
    fn constant_image_has_no_high_frequency() {
        let x = Tensor::<f64>::full(Shape::new(1, 4, 9, 9), 700.0);
        let spec = FilterSpec::averaging();
        assert!(low_pass(&x, &spec).unwrap().data().iter().all(|v| (v - 700.0).abs() < 1e-12));
        assert!(high_pass(&x, &spec).unwrap().data().iter().all(|v| v.abs() < 1e-12));
    }
}
