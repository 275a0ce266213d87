use crate::error::{Error, Result};
use crate::imaging::{degrade, FilterSpec, MS_BANDS, RATIO};
use crate::tensor::ops::{abs, channel_mean, mul, q_index_mean, repeat_channels, rsub_scalar, select_channels, sub};
use crate::tensor::{Element, Tensor};

/// Nominal Q-index window side.
pub const Q_BLOCK: usize = 32;

/// Window side actually used on an `h`×`w` image: the nominal block, shrunk
/// to fit images smaller than it.
pub fn effective_block(h: usize, w: usize) -> usize {
    Q_BLOCK.min(h).min(w)
}

const PAIR_LEFT: [usize; 6] = [0, 0, 0, 1, 1, 2];
const PAIR_RIGHT: [usize; 6] = [1, 2, 3, 2, 3, 3];

/// Per-sample distortion indices, each shaped (N, 1, 1, 1).
#[derive(Clone, Debug)]
pub struct QnrTerms<T: Element> {
    pub d_lambda: Tensor<T>,
    pub d_s: Tensor<T>,
    pub qnr: Tensor<T>,
}

fn q_auto<T: Element>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    q_index_mean(x, y, effective_block(s.h(), s.w()))
}

/// Q of all six band pairs, (N, 6, 1, 1).
fn interband_q<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    q_auto(&select_channels(x, &PAIR_LEFT)?, &select_channels(x, &PAIR_RIGHT)?)
}

fn check_bands<T: Element>(op: &'static str, x: &Tensor<T>) -> Result<()> {
    if x.shape().c() != MS_BANDS {
        return Err(Error::dim(op, "channels", MS_BANDS, x.shape().c()));
    }
    Ok(())
}

/// Spectral distortion: mean |Q(f_i, f_j) − Q(m_i, m_j)| over band pairs.
pub fn d_lambda_tensor<T: Element>(fused: &Tensor<T>, lrms: &Tensor<T>) -> Result<Tensor<T>> {
    check_bands("d_lambda", fused)?;
    check_bands("d_lambda", lrms)?;
    Ok(channel_mean(&abs(&sub(&interband_q(fused)?, &interband_q(lrms)?)?)))
}

/// Spatial distortion: mean |Q(f_i, pan) − Q(m_i, pan_lr)| over bands.
pub fn d_s_tensor<T: Element>(
    fused: &Tensor<T>,
    lrms: &Tensor<T>,
    pan: &Tensor<T>,
    pan_lr: &Tensor<T>,
) -> Result<Tensor<T>> {
    check_bands("d_s", fused)?;
    check_bands("d_s", lrms)?;
    let hr = q_auto(fused, &repeat_channels(pan, MS_BANDS)?)?;
    let lr = q_auto(lrms, &repeat_channels(pan_lr, MS_BANDS)?)?;
    Ok(channel_mean(&abs(&sub(&hr, &lr)?)))
}

/// PAN at MS resolution, as used by Ds when no degraded PAN is supplied.
pub fn default_pan_lr<T: Element>(pan: &Tensor<T>) -> Result<Tensor<T>> {
    let s = pan.shape();
    if s.h() % RATIO != 0 || s.w() % RATIO != 0 {
        return Err(Error::contract(format!("PAN {}x{} is not divisible by {RATIO}", s.h(), s.w())));
    }
    degrade(&pan.detach(), &FilterSpec::wald_gaussian())
}

/// Differentiable Dλ, Ds and QNR = (1 − Dλ)(1 − Ds) per sample.
pub fn qnr_terms<T: Element>(
    fused: &Tensor<T>,
    lrms: &Tensor<T>,
    pan: &Tensor<T>,
    pan_lr: Option<&Tensor<T>>,
) -> Result<QnrTerms<T>> {
    let owned;
    let pan_lr = match pan_lr {
        Some(p) => p,
        None => {
            owned = default_pan_lr(pan)?;
            &owned
        }
    };
    let d_lambda = d_lambda_tensor(fused, lrms)?;
    let d_s = d_s_tensor(fused, lrms, pan, pan_lr)?;
    let qnr = mul(&rsub_scalar(T::one(), &d_lambda), &rsub_scalar(T::one(), &d_s))?;
    Ok(QnrTerms { d_lambda, d_s, qnr })
}

fn batch_mean<T: Element>(t: &Tensor<T>) -> f64 {
    t.data().iter().map(|v| v.as_f64()).sum::<f64>() / t.numel() as f64
}

/// Q-index of two single-plane images (any leading dims are averaged).
pub fn q_index(x: &Tensor<f64>, y: &Tensor<f64>, block: usize) -> Result<f64> {
    Ok(batch_mean(&q_index_mean(x, y, block)?))
}

pub fn d_lambda(fused: &Tensor<f64>, lrms: &Tensor<f64>) -> Result<f64> {
    Ok(batch_mean(&d_lambda_tensor(fused, lrms)?))
}

pub fn d_s(fused: &Tensor<f64>, lrms: &Tensor<f64>, pan: &Tensor<f64>, pan_lr: Option<&Tensor<f64>>) -> Result<f64> {
    let owned;
    let pan_lr = match pan_lr {
        Some(p) => p,
        None => {
            owned = default_pan_lr(pan)?;
            &owned
        }
    };
    Ok(batch_mean(&d_s_tensor(fused, lrms, pan, pan_lr)?))
}

/// Scalar summary of [`qnr_terms`], averaged over the batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Qnr {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

pub fn qnr(fused: &Tensor<f64>, lrms: &Tensor<f64>, pan: &Tensor<f64>, pan_lr: Option<&Tensor<f64>>) -> Result<Qnr> {
    let t = qnr_terms(fused, lrms, pan, pan_lr)?;
    Ok(Qnr {
        d_lambda: batch_mean(&t.d_lambda),
        d_s: batch_mean(&t.d_s),
        qnr: batch_mean(&t.qnr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{bicubic_resize, Scale};
    use crate::tensor::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_vec(shape, (0..shape.numel()).map(|_| rng.gen_range(1.0..100.0)).collect()).unwrap()
    }

    #[test]
    fn effective_block_shrinks_to_image() {
        assert_eq!(effective_block(64, 64), 32);
        assert_eq!(effective_block(16, 16), 16);
        assert_eq!(effective_block(400, 20), 20);
    }

    #[test]
    fn fused_sharing_lr_interband_structure_has_zero_d_lambda() {
        // A 2×2 tiling of the LR image has the same moments in its single
        // 32×32 window as the LR image has in its single 16×16 window.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lr = random(Shape::new(1, 4, 16, 16), &mut rng);
        let mut hr = vec![0.0; 4 * 32 * 32];
        for c in 0..4 {
            for y in 0..32 {
                for x in 0..32 {
                    hr[c * 1024 + y * 32 + x] = lr.data()[c * 256 + (y % 16) * 16 + x % 16];
                }
            }
        }
        let fused = Tensor::from_vec(Shape::new(1, 4, 32, 32), hr).unwrap();
        let q_l = interband_q(&lr).unwrap();
        let q_f = interband_q(&fused).unwrap();
        for (a, b) in q_l.data().iter().zip(q_f.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(d_lambda(&fused, &lr).unwrap() < 1e-12);
    }

    #[test]
    fn qnr_combines_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pan = random(Shape::new(2, 1, 64, 64), &mut rng);
        let lr = random(Shape::new(2, 4, 16, 16), &mut rng);
        let fused = bicubic_resize(&lr, Scale::UP4).unwrap();
        let t = qnr_terms(&fused, &lr, &pan, None).unwrap();
        assert_eq!(t.qnr.shape(), Shape::new(2, 1, 1, 1));
        for i in 0..2 {
            let (dl, ds) = (t.d_lambda.data()[i], t.d_s.data()[i]);
            assert!((0.0..=1.0).contains(&dl) && (0.0..=1.0).contains(&ds));
            assert_eq!(t.qnr.data()[i], (1.0 - dl) * (1.0 - ds));
        }
    }

    #[test]
    fn wrong_band_count_is_rejected() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 3, 32, 32));
        let m = Tensor::<f64>::zeros(Shape::new(1, 3, 8, 8));
        assert!(d_lambda(&x, &m).is_err());
    }
}
