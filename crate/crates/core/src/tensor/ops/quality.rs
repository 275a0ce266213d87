use crate::error::{Error, Result};
use crate::tensor::{expect_same_shape, Backward, Element, Tensor};

/// First and second moments of one window pair.
#[derive(Clone, Copy, Debug)]
struct WindowStats {
    mx: f64,
    my: f64,
    vx: f64,
    vy: f64,
    cxy: f64,
}

impl WindowStats {
    // Grouped so that identical inputs reproduce the denominator bit for bit.
    fn numerator(&self) -> f64 {
        (2.0 * self.cxy) * (2.0 * (self.mx * self.my))
    }

    fn denominator(&self) -> f64 {
        (self.vx + self.vy) * (self.mx * self.mx + self.my * self.my)
    }
}

fn window_stats<T: Element>(x: &[T], y: &[T], width: usize, oy: usize, ox: usize, block: usize) -> WindowStats {
    let n = (block * block) as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for r in 0..block {
        let row = (oy + r) * width + ox;
        for i in row..row + block {
            sx += x[i].as_f64();
            sy += y[i].as_f64();
        }
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for r in 0..block {
        let row = (oy + r) * width + ox;
        for i in row..row + block {
            let dx = x[i].as_f64() - mx;
            let dy = y[i].as_f64() - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
    }
    WindowStats {
        mx,
        my,
        vx: vx / n,
        vy: vy / n,
        cxy: cxy / n,
    }
}

struct QIndexMean<T: Element> {
    x: Tensor<T>,
    y: Tensor<T>,
    block: usize,
    /// Per plane: (window origin, stats) of every non-degenerate window.
    windows: Vec<Vec<((usize, usize), WindowStats)>>,
}

impl<T: Element> Backward<T> for QIndexMean<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.x, &self.y]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let s = self.x.shape();
        let (plane, width) = (s.plane(), s.w());
        let n = (self.block * self.block) as f64;
        let mut gx = vec![T::zero(); s.numel()];
        let mut gy = vec![T::zero(); s.numel()];
        for (p, windows) in self.windows.iter().enumerate() {
            let g = grad[p].as_f64() / windows.len() as f64;
            let xs = &self.x.data()[p * plane..][..plane];
            let ys = &self.y.data()[p * plane..][..plane];
            for &((oy, ox), st) in windows {
                let a = st.numerator();
                let b = st.denominator();
                let q = a / b;
                let msq = st.mx * st.mx + st.my * st.my;
                let vsum = st.vx + st.vy;
                for r in 0..self.block {
                    let row = (oy + r) * width + ox;
                    for i in row..row + self.block {
                        let dx = xs[i].as_f64() - st.mx;
                        let dy = ys[i].as_f64() - st.my;
                        let da_x = 4.0 * (dy * st.mx * st.my + st.cxy * st.my) / n;
                        let db_x = 2.0 * (dx * msq + vsum * st.mx) / n;
                        let da_y = 4.0 * (dx * st.mx * st.my + st.cxy * st.mx) / n;
                        let db_y = 2.0 * (dy * msq + vsum * st.my) / n;
                        let k = p * plane + i;
                        gx[k] = gx[k] + T::lit(g * (da_x - q * db_x) / b);
                        gy[k] = gy[k] + T::lit(g * (da_y - q * db_y) / b);
                    }
                }
            }
        }
        vec![self.x.requires_grad().then_some(gx), self.y.requires_grad().then_some(gy)]
    }
}

/// Universal image quality index of each (sample, channel) plane pair,
/// averaged over non-overlapping `block`×`block` windows. Windows whose
/// index denominator vanishes (both flat, or both zero-mean) are skipped.
///
/// Returns shape (N, C, 1, 1).
pub fn q_index_mean<T: Element>(x: &Tensor<T>, y: &Tensor<T>, block: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    expect_same_shape("q_index", s, y.shape())?;
    if block == 0 || s.h() < block || s.w() < block {
        return Err(Error::contract(format!(
            "q_index block {block} does not fit a {}x{} image",
            s.h(),
            s.w()
        )));
    }
    let plane = s.plane();
    let mut values = Vec::with_capacity(s.n() * s.c());
    let mut windows = Vec::with_capacity(s.n() * s.c());
    for p in 0..s.n() * s.c() {
        let xs = &x.data()[p * plane..][..plane];
        let ys = &y.data()[p * plane..][..plane];
        let mut valid = Vec::new();
        let mut total = 0.0;
        for by in 0..s.h() / block {
            for bx in 0..s.w() / block {
                let origin = (by * block, bx * block);
                let st = window_stats(xs, ys, s.w(), origin.0, origin.1, block);
                let d = st.denominator();
                if d == 0.0 {
                    continue;
                }
                total += st.numerator() / d;
                valid.push((origin, st));
            }
        }
        if valid.is_empty() {
            return Err(Error::Degenerate(format!(
                "every {block}x{block} window of plane {p} is flat or zero-mean"
            )));
        }
        values.push(T::lit(total / valid.len() as f64));
        windows.push(valid);
    }
    Ok(Tensor::from_op(
        s.with_hw(1, 1),
        values,
        QIndexMean {
            x: x.clone(),
            y: y.clone(),
            block,
            windows,
        },
    ))
}
