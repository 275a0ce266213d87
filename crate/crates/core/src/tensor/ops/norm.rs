use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Backward, Element, Tensor};

/// Epsilon used by every instance-norm layer in the networks.
pub const INSTANCE_NORM_EPS: f64 = 1e-5;

struct InstanceNorm<T: Element> {
    input: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Element> Backward<T> for InstanceNorm<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, output: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let plane = self.input.shape().plane();
        let inv_n = T::one() / T::lit(plane as f64);
        let mut gx = vec![T::zero(); grad.len()];
        gx.par_chunks_mut(plane)
            .zip(grad.par_chunks(plane))
            .zip(output.data().par_chunks(plane))
            .zip(self.inv_std.par_iter())
            .for_each(|(((gx, dy), y), &inv)| {
                let mean_dy = dy.iter().copied().sum::<T>() * inv_n;
                let mean_dyy = dy.iter().zip(y).map(|(a, b)| *a * *b).sum::<T>() * inv_n;
                for ((g, d), yy) in gx.iter_mut().zip(dy).zip(y) {
                    *g = inv * (*d - mean_dy - *yy * mean_dyy);
                }
            });
        vec![Some(gx)]
    }
}

/// Per-(sample, channel) normalisation to zero mean and unit variance, no affine.
pub fn instance_norm<T: Element>(x: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
    let s = x.shape();
    let plane = s.plane();
    if plane < 2 {
        return Err(Error::contract(format!(
            "instance_norm needs at least 2 pixels per channel, got {}x{}",
            s.h(),
            s.w()
        )));
    }
    let inv_n = T::one() / T::lit(plane as f64);
    let mut out = vec![T::zero(); x.numel()];
    let inv_std: Vec<T> = out
        .par_chunks_mut(plane)
        .zip(x.data().par_chunks(plane))
        .map(|(o, v)| {
            let mean = v.iter().copied().sum::<T>() * inv_n;
            let var = v.iter().map(|a| (*a - mean) * (*a - mean)).sum::<T>() * inv_n;
            let inv = T::one() / (var + eps).sqrt();
            for (oo, a) in o.iter_mut().zip(v) {
                *oo = (*a - mean) * inv;
            }
            inv
        })
        .collect();
    Ok(Tensor::from_op(s, out, InstanceNorm { input: x.clone(), inv_std }))
}
