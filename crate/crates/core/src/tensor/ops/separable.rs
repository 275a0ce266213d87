use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Backward, Element, Tensor};

/// A sparse linear map along one image axis: `out[i] = Σ w · in[j]` over the
/// taps of row `i`. Resampling kernels and smoothing filters are both built
/// from these, with edge handling baked into the tap indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisMap {
    in_len: usize,
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisMap {
    pub fn new(in_len: usize, taps: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if let Some(bad) = taps.iter().flatten().find(|(j, _)| *j >= in_len) {
            return Err(Error::contract(format!(
                "axis map tap index {} outside input length {in_len}",
                bad.0
            )));
        }
        Ok(AxisMap { in_len, taps })
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.taps.len()
    }

    pub fn taps(&self, i: usize) -> &[(usize, f64)] {
        &self.taps[i]
    }

    /// Dense `out_len × in_len` matrix, mostly for tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.in_len]; self.taps.len()];
        for (i, row) in self.taps.iter().enumerate() {
            for &(j, w) in row {
                m[i][j] += w;
            }
        }
        m
    }
}

struct Separable<T: Element> {
    input: Tensor<T>,
    rows: Arc<AxisMap>,
    cols: Arc<AxisMap>,
}

fn forward_plane<T: Element>(rows: &AxisMap, cols: &AxisMap, src: &[T], dst: &mut [T]) {
    let (w_in, w_out) = (cols.in_len, cols.out_len());
    let mut tmp = vec![T::zero(); w_in];
    for (oy, out_row) in dst.chunks_mut(w_out).enumerate() {
        tmp.fill(T::zero());
        for &(iy, wy) in rows.taps(oy) {
            let wy = T::lit(wy);
            for (t, s) in tmp.iter_mut().zip(&src[iy * w_in..][..w_in]) {
                *t = *t + wy * *s;
            }
        }
        for (ox, o) in out_row.iter_mut().enumerate() {
            *o = cols.taps(ox).iter().fold(T::zero(), |acc, &(ix, wx)| acc + T::lit(wx) * tmp[ix]);
        }
    }
}

fn backward_plane<T: Element>(rows: &AxisMap, cols: &AxisMap, grad: &[T], dst: &mut [T]) {
    let (w_in, w_out) = (cols.in_len, cols.out_len());
    let mut tmp = vec![T::zero(); w_in];
    for (oy, g_row) in grad.chunks(w_out).enumerate() {
        tmp.fill(T::zero());
        for (ox, g) in g_row.iter().enumerate() {
            for &(ix, wx) in cols.taps(ox) {
                tmp[ix] = tmp[ix] + T::lit(wx) * *g;
            }
        }
        for &(iy, wy) in rows.taps(oy) {
            let wy = T::lit(wy);
            for (d, t) in dst[iy * w_in..][..w_in].iter_mut().zip(&tmp) {
                *d = *d + wy * *t;
            }
        }
    }
}

impl<T: Element> Backward<T> for Separable<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let in_plane = self.input.shape().plane();
        let out_plane = self.rows.out_len() * self.cols.out_len();
        let (rows, cols) = (&*self.rows, &*self.cols);
        let mut gx = vec![T::zero(); self.input.numel()];
        gx.par_chunks_mut(in_plane)
            .zip(grad.par_chunks(out_plane))
            .for_each(|(d, g)| backward_plane(rows, cols, g, d));
        vec![Some(gx)]
    }
}

/// Apply `rows` along height and `cols` along width of every plane.
pub fn separable<T: Element>(x: &Tensor<T>, rows: &Arc<AxisMap>, cols: &Arc<AxisMap>) -> Result<Tensor<T>> {
    let s = x.shape();
    if rows.in_len() != s.h() {
        return Err(Error::dim("separable", "height", rows.in_len(), s.h()));
    }
    if cols.in_len() != s.w() {
        return Err(Error::dim("separable", "width", cols.in_len(), s.w()));
    }
    let out_shape = s.with_hw(rows.out_len(), cols.out_len());
    let out_plane = out_shape.plane();
    let mut out = vec![T::zero(); out_shape.numel()];
    if out_plane > 0 {
        out.par_chunks_mut(out_plane)
            .zip(x.data().par_chunks(s.plane()))
            .for_each(|(d, src)| forward_plane(rows, cols, src, d));
    }
    Ok(Tensor::from_op(
        out_shape,
        out,
        Separable {
            input: x.clone(),
            rows: Arc::clone(rows),
            cols: Arc::clone(cols),
        },
    ))
}
