//! Scalar-loop reference implementations written directly from the metric
//! definitions, sharing no code with the library, plus input generators.
#![allow(dead_code)]

use rand::Rng;
use ucgan::tensor::{Shape, Tensor};

/// Plain nested-vector image: `img[band][y][x]`.
pub type Planes = Vec<Vec<Vec<f64>>>;

pub fn planes(t: &Tensor<f64>, sample: usize) -> Planes {
    let s = t.shape();
    (0..s.c())
        .map(|c| {
            (0..s.h())
                .map(|y| (0..s.w()).map(|x| t.data()[((sample * s.c() + c) * s.h() + y) * s.w() + x]).collect())
                .collect()
        })
        .collect()
}

pub fn tensor(p: &Planes) -> Tensor<f64> {
    let (c, h, w) = (p.len(), p[0].len(), p[0][0].len());
    let data = p.iter().flat_map(|b| b.iter().flat_map(|r| r.iter().copied())).collect();
    Tensor::from_vec(Shape::new(1, c, h, w), data).unwrap()
}

/// Smooth random field plus noise, strictly positive, values roughly in
/// `[lo, lo + span]`.
pub fn random_planes(bands: usize, h: usize, w: usize, lo: f64, span: f64, rng: &mut impl Rng) -> Planes {
    (0..bands)
        .map(|_| {
            let (fx, fy, ph) = (rng.gen_range(0.05..0.4), rng.gen_range(0.05..0.4), rng.gen_range(0.0..6.3));
            (0..h)
                .map(|y| {
                    (0..w)
                        .map(|x| {
                            let wave = 0.5 + 0.25 * ((x as f64 * fx + ph).sin() + (y as f64 * fy).cos());
                            lo + span * (0.7 * wave + 0.3 * rng.gen::<f64>())
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `a` plus uniform noise of amplitude `amp`.
pub fn perturb(a: &Planes, amp: f64, rng: &mut impl Rng) -> Planes {
    a.iter()
        .map(|b| b.iter().map(|r| r.iter().map(|v| v + amp * rng.gen_range(-1.0..1.0)).collect()).collect())
        .collect()
}

pub fn sam_deg(r: &Planes, f: &Planes) -> f64 {
    let (h, w) = (r[0].len(), r[0][0].len());
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (mut dot, mut nr, mut nf) = (0.0, 0.0, 0.0);
            for b in 0..r.len() {
                dot += r[b][y][x] * f[b][y][x];
                nr += r[b][y][x] * r[b][y][x];
                nf += f[b][y][x] * f[b][y][x];
            }
            if nr > 0.0 && nf > 0.0 {
                total += (dot / (nr.sqrt() * nf.sqrt())).clamp(-1.0, 1.0).acos();
            }
        }
    }
    (total / (h * w) as f64) * 180.0 / std::f64::consts::PI
}

pub fn ergas(r: &Planes, f: &Planes, ratio: f64) -> f64 {
    let n = (r[0].len() * r[0][0].len()) as f64;
    let mut acc = 0.0;
    for b in 0..r.len() {
        let mut mse = 0.0;
        let mut mean = 0.0;
        for (rr, fr) in r[b].iter().zip(&f[b]) {
            for (a, c) in rr.iter().zip(fr) {
                mse += (a - c).powi(2) / n;
                mean += a / n;
            }
        }
        acc += mse / (mean * mean);
    }
    100.0 * ratio * (acc / r.len() as f64).sqrt()
}

/// SSIM with a full 2-D Gaussian window evaluated at every valid position.
pub fn ssim(r: &Planes, f: &Planes, range: f64) -> f64 {
    const WIN: usize = 11;
    let sigma = 1.5;
    let mut k = [[0.0; WIN]; WIN];
    let mut ksum = 0.0;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            ksum += *v;
        }
    }
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let (h, w) = (r[0].len(), r[0][0].len());
    let mut total = 0.0;
    let mut count = 0;
    for b in 0..r.len() {
        for y in 0..=h - WIN {
            for x in 0..=w - WIN {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..WIN {
                    for j in 0..WIN {
                        let wt = k[i][j] / ksum;
                        mx += wt * r[b][y + i][x + j];
                        my += wt * f[b][y + i][x + j];
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for i in 0..WIN {
                    for j in 0..WIN {
                        let wt = k[i][j] / ksum;
                        let (dx, dy) = (r[b][y + i][x + j] - mx, f[b][y + i][x + j] - my);
                        vx += wt * dx * dx;
                        vy += wt * dy * dy;
                        cxy += wt * dx * dy;
                    }
                }
                total += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Universal quality index of two planes over non-overlapping `block` windows.
pub fn q_index(a: &[Vec<f64>], b: &[Vec<f64>], block: usize) -> f64 {
    let (h, w) = (a.len(), a[0].len());
    let n = (block * block) as f64;
    let mut total = 0.0;
    let mut windows = 0;
    for by in (0..=h - block).step_by(block) {
        for bx in (0..=w - block).step_by(block) {
            let cells = || (by..by + block).flat_map(move |y| (bx..bx + block).map(move |x| (y, x)));
            let ma = cells().map(|(y, x)| a[y][x]).sum::<f64>() / n;
            let mb = cells().map(|(y, x)| b[y][x]).sum::<f64>() / n;
            let va = cells().map(|(y, x)| (a[y][x] - ma).powi(2)).sum::<f64>() / n;
            let vb = cells().map(|(y, x)| (b[y][x] - mb).powi(2)).sum::<f64>() / n;
            let cov = cells().map(|(y, x)| (a[y][x] - ma) * (b[y][x] - mb)).sum::<f64>() / n;
            let den = (va + vb) * (ma * ma + mb * mb);
            if den != 0.0 {
                total += 4.0 * cov * ma * mb / den;
                windows += 1;
            }
        }
    }
    total / windows as f64
}

pub fn block_for(p: &Planes) -> usize {
    32.min(p[0].len()).min(p[0][0].len())
}

pub fn d_lambda(fused: &Planes, lrms: &Planes) -> f64 {
    let (bf, bm) = (block_for(fused), block_for(lrms));
    let mut acc = 0.0;
    let mut pairs = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            acc += (q_index(&fused[i], &fused[j], bf) - q_index(&lrms[i], &lrms[j], bm)).abs();
            pairs += 1;
        }
    }
    acc / pairs as f64
}

pub fn d_s(fused: &Planes, lrms: &Planes, pan: &Planes, pan_lr: &Planes) -> f64 {
    let (bf, bm) = (block_for(fused), block_for(lrms));
    (0..4)
        .map(|i| (q_index(&fused[i], &pan[0], bf) - q_index(&lrms[i], &pan_lr[0], bm)).abs())
        .sum::<f64>()
        / 4.0
}

pub fn qnr(fused: &Planes, lrms: &Planes, pan: &Planes, pan_lr: &Planes) -> f64 {
    (1.0 - d_lambda(fused, lrms)) * (1.0 - d_s(fused, lrms, pan, pan_lr))
}

/// Mean absolute difference of two equally sized slices.
pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}
