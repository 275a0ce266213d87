use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Backward, Element, Shape, Tensor};

#[derive(Clone, Copy, Debug)]
struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn cols(&self) -> usize {
        self.ho * self.wo
    }

    fn rows(&self) -> usize {
        self.cin * self.k * self.k
    }
}

/// Output columns `ox` whose input column `ox·stride + kx − pad` is inside
/// the row, as a half-open range.
fn valid_cols(g: &Geometry, kx: usize) -> (usize, usize) {
    let lo = g.pad.saturating_sub(kx).div_ceil(g.stride);
    let hi = (g.w + g.pad).saturating_sub(kx).div_ceil(g.stride).min(g.wo);
    (lo.min(hi), hi)
}

fn im2col<T: Element>(g: &Geometry, x: &[T], col: &mut [T]) {
    let p = g.cols();
    for c in 0..g.cin {
        let plane = &x[c * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = &mut col[((c * g.k + ky) * g.k + kx) * p..][..p];
                let (lo, hi) = valid_cols(g, kx);
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let dst = &mut row[oy * g.wo..][..g.wo];
                    if iy < 0 || iy >= g.h as isize || lo == hi {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..][..g.w];
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    let start = lo * g.stride + kx - g.pad;
                    if g.stride == 1 {
                        dst[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                    } else {
                        for (j, d) in dst[lo..hi].iter_mut().enumerate() {
                            *d = src[start + j * g.stride];
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Element>(g: &Geometry, col: &[T], x: &mut [T]) {
    let p = g.cols();
    for c in 0..g.cin {
        let plane = &mut x[c * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = &col[((c * g.k + ky) * g.k + kx) * p..][..p];
                let (lo, hi) = valid_cols(g, kx);
                if lo == hi {
                    continue;
                }
                let start = lo * g.stride + kx - g.pad;
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..][..g.w];
                    let src = &row[oy * g.wo + lo..oy * g.wo + hi];
                    if g.stride == 1 {
                        for (d, s) in dst[start..start + hi - lo].iter_mut().zip(src) {
                            *d = *d + *s;
                        }
                    } else {
                        for (j, s) in src.iter().enumerate() {
                            let d = &mut dst[start + j * g.stride];
                            *d = *d + *s;
                        }
                    }
                }
            }
        }
    }
}

struct Conv2d<T: Element> {
    input: Tensor<T>,
    weight: Tensor<T>,
    bias: Tensor<T>,
    geom: Geometry,
}

impl<T: Element> Backward<T> for Conv2d<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.input, &self.weight, &self.bias]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let g = self.geom;
        let cout = self.weight.shape().n();
        let (kk, p) = (g.rows(), g.cols());
        let in_len = g.cin * g.h * g.w;
        let n = self.input.shape().n();
        let need_x = self.input.requires_grad();
        let need_w = self.weight.requires_grad();
        let wdata = self.weight.data();
        let xdata = self.input.data();

        let per_sample: Vec<(Option<Vec<T>>, Option<Vec<T>>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let go = &grad[i * cout * p..][..cout * p];
                let dw = need_w.then(|| {
                    let mut col = vec![T::zero(); kk * p];
                    im2col(&g, &xdata[i * in_len..][..in_len], &mut col);
                    let mut dw = vec![T::zero(); cout * kk];
                    T::gemm(cout, p, kk, go, false, &col, true, &mut dw, false);
                    dw
                });
                let dx = need_x.then(|| {
                    let mut dcol = vec![T::zero(); kk * p];
                    T::gemm(kk, cout, p, wdata, true, go, false, &mut dcol, false);
                    let mut dx = vec![T::zero(); in_len];
                    col2im(&g, &dcol, &mut dx);
                    dx
                });
                (dw, dx)
            })
            .collect();

        let mut gw = need_w.then(|| vec![T::zero(); cout * kk]);
        let mut gx = need_x.then(|| Vec::with_capacity(n * in_len));
        for (dw, dx) in per_sample {
            if let (Some(acc), Some(dw)) = (gw.as_mut(), dw) {
                acc.iter_mut().zip(&dw).for_each(|(a, b)| *a = *a + *b);
            }
            if let (Some(acc), Some(dx)) = (gx.as_mut(), dx) {
                acc.extend_from_slice(&dx);
            }
        }
        let gb = self.bias.requires_grad().then(|| {
            let mut gb = vec![T::zero(); cout];
            for go in grad.chunks(cout * p) {
                for (o, b) in gb.iter_mut().enumerate() {
                    *b = *b + go[o * p..][..p].iter().copied().sum::<T>();
                }
            }
            gb
        });
        vec![gx, gw, gb]
    }
}

/// 2-D cross-correlation with square kernels and zero padding.
///
/// `weight` is (Cout, Cin, k, k) and `bias` holds Cout values in any shape.
pub fn conv2d<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let xs = input.shape();
    let ws = weight.shape();
    if ws.c() != xs.c() {
        return Err(Error::dim("conv2d", "channels", ws.c(), xs.c()));
    }
    if ws.h() != ws.w() {
        return Err(Error::dim("conv2d", "width", ws.h(), ws.w()));
    }
    if bias.numel() != ws.n() {
        return Err(Error::dim("conv2d", "channels", ws.n(), bias.numel()));
    }
    if stride == 0 {
        return Err(Error::contract("conv2d stride must be positive"));
    }
    let k = ws.h();
    if xs.h() + 2 * padding < k {
        return Err(Error::dim("conv2d", "height", k, xs.h() + 2 * padding));
    }
    if xs.w() + 2 * padding < k {
        return Err(Error::dim("conv2d", "width", k, xs.w() + 2 * padding));
    }
    let geom = Geometry {
        cin: xs.c(),
        h: xs.h(),
        w: xs.w(),
        k,
        stride,
        pad: padding,
        ho: (xs.h() + 2 * padding - k) / stride + 1,
        wo: (xs.w() + 2 * padding - k) / stride + 1,
    };
    let cout = ws.n();
    let (kk, p) = (geom.rows(), geom.cols());
    let in_len = geom.cin * geom.h * geom.w;
    let wdata = weight.data();
    let bdata = bias.data();

    let mut out = vec![T::zero(); xs.n() * cout * p];
    out.par_chunks_mut(cout * p)
        .zip(input.data().par_chunks(in_len))
        .for_each(|(o, x)| {
            let mut col = vec![T::zero(); kk * p];
            im2col(&geom, x, &mut col);
            for (c, row) in o.chunks_mut(p).enumerate() {
                row.fill(bdata[c]);
            }
            T::gemm(cout, kk, p, wdata, false, &col, false, o, true);
        });

    let shape = Shape::new(xs.n(), cout, geom.ho, geom.wo);
    Ok(Tensor::from_op(
        shape,
        out,
        Conv2d {
            input: input.clone(),
            weight: weight.clone(),
            bias: bias.clone(),
            geom,
        },
    ))
}
