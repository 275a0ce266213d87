use crate::error::{Error, Result};
use crate::tensor::{expect_same_shape, Tensor};

/// SSIM window side and Gaussian width.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

/// Mean spectral angle in degrees over every pixel of every sample.
///
/// The angle is evaluated as `2·atan2(‖r̂ − f̂‖, ‖r̂ + f̂‖)` on unit vectors,
/// which is well conditioned near zero and returns exactly 0 for parallel
/// vectors. Pixels where either vector is zero contribute 0.
pub fn sam(reference: &Tensor<f64>, fused: &Tensor<f64>) -> Result<f64> {
    let s = reference.shape();
    expect_same_shape("sam", s, fused.shape())?;
    let (plane, bands) = (s.plane(), s.c());
    let pixels = s.n() * plane;
    if pixels == 0 {
        return Err(Error::contract("sam of an empty image"));
    }
    let (r, f) = (reference.data(), fused.data());
    let mut total = 0.0;
    for n in 0..s.n() {
        let base = n * bands * plane;
        for p in 0..plane {
            let at = |v: &[f64], b: usize| v[base + b * plane + p];
            let nr = (0..bands).map(|b| at(r, b) * at(r, b)).sum::<f64>().sqrt();
            let nf = (0..bands).map(|b| at(f, b) * at(f, b)).sum::<f64>().sqrt();
            if nr == 0.0 || nf == 0.0 {
                continue;
            }
            let (mut diff, mut sum) = (0.0, 0.0);
            for b in 0..bands {
                let (u, v) = (at(r, b) / nr, at(f, b) / nf);
                diff += (u - v) * (u - v);
                sum += (u + v) * (u + v);
            }
            total += 2.0 * diff.sqrt().atan2(sum.sqrt());
        }
    }
    Ok((total / pixels as f64).to_degrees())
}

/// Dimensionless global error, `100·ratio·sqrt(mean_b (RMSE_b / μ_b)²)`,
/// with bands pooled across the batch and `μ_b` the reference band mean.
pub fn ergas(reference: &Tensor<f64>, fused: &Tensor<f64>, ratio: f64) -> Result<f64> {
    let s = reference.shape();
    expect_same_shape("ergas", s, fused.shape())?;
    let (plane, bands) = (s.plane(), s.c());
    let count = (s.n() * plane) as f64;
    let mut acc = 0.0;
    for b in 0..bands {
        let (mut se, mut sum) = (0.0, 0.0);
        for n in 0..s.n() {
            let off = (n * bands + b) * plane;
            for (r, f) in reference.data()[off..off + plane].iter().zip(&fused.data()[off..off + plane]) {
                se += (r - f) * (r - f);
                sum += r;
            }
        }
        let mean = sum / count;
        if mean == 0.0 {
            return Err(Error::Degenerate(format!("ergas: reference band {b} has zero mean")));
        }
        acc += se / count / (mean * mean);
    }
    Ok(100.0 * ratio * (acc / bands as f64).sqrt())
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Valid-mode separable filtering of one plane.
fn blur_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - k.len(), w + 1 - k.len());
    let mut rows = vec![0.0; oh * w];
    for y in 0..oh {
        for (i, &kw) in k.iter().enumerate() {
            for x in 0..w {
                rows[y * w + x] += kw * src[(y + i) * w + x];
            }
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(j, &kw)| kw * rows[y * w + x + j]).sum();
        }
    }
    out
}

/// Structural similarity with an 11×11 Gaussian window (σ = 1.5), averaged
/// over valid window positions and all planes.
pub fn ssim(reference: &Tensor<f64>, fused: &Tensor<f64>, dynamic_range: f64) -> Result<f64> {
    let s = reference.shape();
    expect_same_shape("ssim", s, fused.shape())?;
    if s.h() < SSIM_WINDOW || s.w() < SSIM_WINDOW {
        return Err(Error::contract(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {}x{}",
            s.h(),
            s.w()
        )));
    }
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    let k = gaussian_window();
    let (h, w) = (s.h(), s.w());
    let planes = s.n() * s.c();
    let mut total = 0.0;
    let mut count = 0usize;
    for p in 0..planes {
        let x = reference.plane(p / s.c(), p % s.c());
        let y = fused.plane(p / s.c(), p % s.c());
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
        let mx = blur_valid(x, h, w, &k);
        let my = blur_valid(y, h, w, &k);
        let exx = blur_valid(&xx, h, w, &k);
        let eyy = blur_valid(&yy, h, w, &k);
        let exy = blur_valid(&xy, h, w, &k);
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = exx[i] - ux * ux;
            let vy = eyy[i] - uy * uy;
            let cxy = exy[i] - ux * uy;
            let num = (2.0 * (ux * uy) + c1) * (2.0 * cxy + c2);
            let den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
            total += num / den;
        }
        count += mx.len();
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn t(shape: Shape, v: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, v).unwrap()
    }

    #[test]
    fn sam_reference_values() {
        let s = Shape::new(1, 4, 1, 1);
        let r = t(s, vec![1.0, 0.0, 0.0, 0.0]);
        let f = t(s, vec![1.0, 1.0, 0.0, 0.0]);
        assert!((sam(&r, &f).unwrap() - 45.0).abs() < 1e-12);
        assert_eq!(sam(&f, &f).unwrap(), 0.0);
        assert_eq!(sam(&f, &t(s, vec![2.0, 2.0, 0.0, 0.0])).unwrap(), 0.0);
        // A zero pixel counts as 0 but stays in the denominator.
        let s2 = Shape::new(1, 4, 1, 2);
        let r2 = t(s2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f2 = t(s2, vec![1.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((sam(&r2, &f2).unwrap() - 22.5).abs() < 1e-12);
    }

    #[test]
    fn ergas_reference_values() {
        let s = Shape::new(1, 1, 2, 2);
        let r = t(s, vec![10.0; 4]);
        assert!((ergas(&r, &t(s, vec![11.0; 4]), 0.25).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(ergas(&r, &r, 0.25).unwrap(), 0.0);
        assert!(matches!(ergas(&t(s, vec![0.0; 4]), &r, 0.25), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ssim_identity_and_offset() {
        let s = Shape::new(1, 2, 16, 13);
        let v: Vec<f64> = (0..s.numel()).map(|i| ((i * 37) % 101) as f64).collect();
        let x = t(s, v.clone());
        assert_eq!(ssim(&x, &x, 1023.0).unwrap(), 1.0);
        let y = t(s, v.iter().map(|a| a + 300.0).collect());
        assert!(ssim(&x, &y, 1023.0).unwrap() < 1.0);
        assert!(ssim(&t(Shape::new(1, 1, 10, 20), vec![1.0; 200]), &t(Shape::new(1, 1, 10, 20), vec![1.0; 200]), 1.0).is_err());
    }

    #[test]
    fn gaussian_window_is_normalised_and_symmetric() {
        let k = gaussian_window();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(k[i], k[SSIM_WINDOW - 1 - i]);
        }
    }
}
