//! Central finite-difference checks of the analytic gradients, in f64.
//!
//! Non-scalar outputs are reduced with a fixed random projection, so one
//! scalar check covers every output direction at once.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, degrade, high_pass, low_pass, replicate_pan, FilterSpec, Scale};
use crate::losses::{
    adv_d_term, adv_g_term, cycle_term, nrf_loss, objective_from, spatial_loss, spectral_loss, CyclePass, Forward,
    LossWeights, Pooling,
};
use crate::metrics::qnr_terms;
use crate::net::{BlockKind, Discriminator, Generator, Module, Parameter};
use crate::tensor::ops::*;
use crate::tensor::{Shape, Tensor};

/// Step of the central difference for single primitives.
pub const STEP: f64 = 1e-3;
/// Step for checks through whole networks and losses. ReLU pre-activations
/// sit around 1e-3 there and the l1 / |ΔQ| terms compare nearly equal
/// images, so larger steps routinely straddle kinks; f64 round-off at this
/// step is still far below the tolerances.
pub const NETWORK_STEP: f64 = 1e-8;
/// Tolerance for single primitives.
pub const PRIMITIVE_TOL: f64 = 1e-4;
/// Tolerance for each loss term w.r.t. network parameters.
pub const TERM_TOL: f64 = 1e-4;
/// Tolerance for the weighted objective through the whole generator.
pub const COMPOSITE_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct GradCheck {
    pub name: String,
    pub rel_error: f64,
    pub tolerance: f64,
    /// Number of coordinates compared.
    pub coords: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.rel_error.is_finite() && self.rel_error < self.tolerance
    }
}

/// `max|a − n| / max(max|a|, max|n|)`; zero when both vectors vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// `Σ r·x` with `r` drawn from a fixed stream, identical on every call.
pub fn project(x: &Tensor<f64>, seed: u64) -> Result<Tensor<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = (0..x.numel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(sum(&mul(x, &Tensor::from_vec(x.shape(), r)?)?))
}

fn coords(len: usize, limit: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match limit {
        Some(k) if k < len => {
            let mut v = sample(rng, len, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..len).collect(),
    }
}

fn scalar(t: &Tensor<f64>) -> Result<f64> {
    if t.numel() != 1 {
        return Err(Error::contract(format!("gradient check needs a scalar, got {:?}", t.shape())));
    }
    Ok(t.item())
}

/// Check `f` w.r.t. each of its inputs. `limit` caps the coordinates probed
/// per input.
pub fn check_inputs(
    name: &str,
    inputs: &[Tensor<f64>],
    step: f64,
    tolerance: f64,
    limit: Option<usize>,
    rng: &mut ChaCha8Rng,
    f: impl Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
) -> Result<GradCheck> {
    let leaves: Vec<Tensor<f64>> = inputs.iter().map(|t| t.detach_as_parameter()).collect();
    f(&leaves)?.backward()?;
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (i, leaf) in leaves.iter().enumerate() {
        let grad = leaf.grad_vec().unwrap_or_else(|| vec![0.0; leaf.numel()]);
        for j in coords(leaf.numel(), limit, rng) {
            let eval = |delta: f64| -> Result<f64> {
                let mut moved = inputs.to_vec();
                let mut data = leaf.to_f64_vec();
                data[j] += delta;
                moved[i] = Tensor::from_vec(leaf.shape(), data)?;
                scalar(&f(&moved)?)
            };
            numeric.push((eval(step)? - eval(-step)?) / (2.0 * step));
            analytic.push(grad[j]);
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        rel_error: relative_error(&analytic, &numeric),
        tolerance,
        coords: analytic.len(),
    })
}

/// Check `f` w.r.t. the parameters of `module`, probing up to
/// `per_tensor` coordinates of every parameter tensor.
pub fn check_module<M: Module<f64> + Clone>(
    name: &str,
    module: &M,
    step: f64,
    tolerance: f64,
    per_tensor: usize,
    rng: &mut ChaCha8Rng,
    f: impl Fn(&M) -> Result<Tensor<f64>>,
) -> Result<GradCheck> {
    module.zero_grad();
    f(module)?.backward()?;
    let mut work = module.clone();
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (i, p) in module.parameters().into_iter().enumerate() {
        let grad = p.tensor.grad_vec().unwrap_or_else(|| vec![0.0; p.tensor.numel()]);
        let base = p.tensor.to_f64_vec();
        for j in coords(base.len(), Some(per_tensor), rng) {
            let mut eval = |delta: f64| -> Result<f64> {
                let mut data = base.clone();
                data[j] += delta;
                work.parameters_mut()[i].set(data)?;
                scalar(&f(&work)?)
            };
            numeric.push((eval(step)? - eval(-step)?) / (2.0 * step));
            analytic.push(grad[j]);
        }
        work.parameters_mut()[i].set(base)?;
    }
    module.zero_grad();
    Ok(GradCheck {
        name: name.to_string(),
        rel_error: relative_error(&analytic, &numeric),
        tolerance,
        coords: analytic.len(),
    })
}

fn uniform(shape: Shape, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_vec(shape, (0..shape.numel()).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape matches")
}

/// Random values at least `gap` away from zero, so that kinks at the
/// origin are never straddled by the difference step.
fn off_zero(shape: Shape, gap: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let data = (0..shape.numel())
        .map(|_| {
            let v = rng.gen_range(gap..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

/// Per pixel, a random permutation of well separated channel values.
fn distinct_channels(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let (c, plane) = (shape.c(), shape.plane());
    let mut data = vec![0.0; shape.numel()];
    for n in 0..shape.n() {
        for i in 0..plane {
            let mut levels: Vec<f64> = (0..c).map(|k| k as f64 * 0.1 + rng.gen_range(0.0..0.05)).collect();
            levels.shuffle(rng);
            for (k, v) in levels.into_iter().enumerate() {
                data[(n * c + k) * plane + i] = v;
            }
        }
    }
    Tensor::from_vec(shape, data).expect("shape matches")
}

/// Every differentiable primitive on small random inputs.
pub fn primitive_checks(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let tol = PRIMITIVE_TOL;
    let s4 = Shape::new(2, 3, 4, 4);
    let mut out = Vec::new();

    let x = uniform(Shape::new(1, 2, 5, 6), -1.0, 1.0, r);
    let w = uniform(Shape::new(3, 2, 3, 3), -1.0, 1.0, r);
    let b = uniform(Shape::new(3, 1, 1, 1), -1.0, 1.0, r);
    for (stride, pad) in [(1, 1), (2, 1), (2, 0)] {
        let name = format!("conv2d k3 s{stride} p{pad}");
        out.push(check_inputs(&name, &[x.clone(), w.clone(), b.clone()], STEP, tol, None, r, |t| {
            project(&conv2d(&t[0], &t[1], &t[2], stride, pad)?, 1)
        })?);
    }
    let x = uniform(Shape::new(1, 2, 8, 8), -1.0, 1.0, r);
    let w = uniform(Shape::new(2, 2, 4, 4), -1.0, 1.0, r);
    let b = uniform(Shape::new(2, 1, 1, 1), -1.0, 1.0, r);
    out.push(check_inputs("conv2d k4 s2 p1", &[x, w, b], STEP, tol, None, r, |t| {
        project(&conv2d(&t[0], &t[1], &t[2], 2, 1)?, 2)
    })?);

    out.push(check_inputs("instance_norm", &[uniform(s4, -1.0, 1.0, r)], STEP, tol, None, r, |t| {
        project(&instance_norm(&t[0], INSTANCE_NORM_EPS)?, 3)
    })?);
    let kinked = off_zero(s4, 0.05, r);
    out.push(check_inputs("relu", &[kinked.clone()], STEP, tol, None, r, |t| project(&relu(&t[0]), 4))?);
    out.push(check_inputs("leaky_relu", &[kinked.clone()], STEP, tol, None, r, |t| {
        project(&leaky_relu(&t[0], LEAKY_RELU_SLOPE), 5)
    })?);
    out.push(check_inputs("abs", &[kinked], STEP, tol, None, r, |t| project(&abs(&t[0]), 6))?);
    let x = uniform(s4, -3.0, 3.0, r);
    out.push(check_inputs("sigmoid", &[x.clone()], STEP, tol, None, r, |t| project(&sigmoid(&t[0]), 7))?);
    out.push(check_inputs("scale", &[x.clone()], STEP, tol, None, r, |t| project(&scale(&t[0], -1.7), 8))?);
    out.push(check_inputs("add_scalar", &[x.clone()], STEP, tol, None, r, |t| project(&add_scalar(&t[0], 0.3), 9))?);
    out.push(check_inputs("rsub_scalar", &[x], STEP, tol, None, r, |t| project(&rsub_scalar(2.0, &t[0]), 10))?);

    let (a, b) = (uniform(s4, -1.0, 1.0, r), uniform(s4, -1.0, 1.0, r));
    out.push(check_inputs("add", &[a.clone(), b.clone()], STEP, tol, None, r, |t| project(&add(&t[0], &t[1])?, 11))?);
    out.push(check_inputs("sub", &[a.clone(), b.clone()], STEP, tol, None, r, |t| project(&sub(&t[0], &t[1])?, 12))?);
    out.push(check_inputs("mul", &[a.clone(), b.clone()], STEP, tol, None, r, |t| project(&mul(&t[0], &t[1])?, 13))?);
    let s = uniform(Shape::new(2, 3, 1, 1), -1.0, 1.0, r);
    out.push(check_inputs("mul_channelwise", &[a.clone(), s], STEP, tol, None, r, |t| {
        project(&mul_channelwise(&t[0], &t[1])?, 14)
    })?);
    out.push(check_inputs("select_channels", &[a.clone()], STEP, tol, None, r, |t| {
        project(&select_channels(&t[0], &[0, 2, 0, 1])?, 15)
    })?);
    let single = uniform(Shape::new(2, 1, 4, 4), -1.0, 1.0, r);
    out.push(check_inputs("repeat_channels", &[single.clone()], STEP, tol, None, r, |t| {
        project(&repeat_channels(&t[0], 4)?, 16)
    })?);
    out.push(check_inputs("replicate_pan", &[single], STEP, tol, None, r, |t| project(&replicate_pan(&t[0])?, 17))?);
    let c = uniform(Shape::new(2, 2, 4, 4), -1.0, 1.0, r);
    out.push(check_inputs("concat_channels", &[a.clone(), c], STEP, tol, None, r, |t| {
        project(&concat_channels(&t[0], &t[1])?, 18)
    })?);

    out.push(check_inputs("sum", &[a.clone()], STEP, tol, None, r, |t| Ok(sum(&t[0])))?);
    out.push(check_inputs("mean", &[a.clone()], STEP, tol, None, r, |t| Ok(mean(&t[0])))?);
    out.push(check_inputs("sq_mean", &[a.clone()], STEP, tol, None, r, |t| Ok(sq_mean(&t[0], 0.7)))?);
    let shifted = add(&b, &off_zero(s4, 0.05, r))?;
    out.push(check_inputs("l1_mean", &[b.clone(), shifted], STEP, tol, None, r, |t| l1_mean(&t[0], &t[1]))?);
    out.push(check_inputs("global_avg_pool", &[a.clone()], STEP, tol, None, r, |t| {
        project(&global_avg_pool(&t[0]), 19)
    })?);
    out.push(check_inputs("sample_mean", &[a.clone()], STEP, tol, None, r, |t| project(&sample_mean(&t[0]), 20))?);
    out.push(check_inputs("channel_mean", &[a], STEP, tol, None, r, |t| project(&channel_mean(&t[0]), 21))?);
    let spread = distinct_channels(Shape::new(2, 4, 4, 4), r);
    out.push(check_inputs("channel_max", &[spread], STEP, tol, None, r, |t| project(&channel_max(&t[0]), 22))?);

    let (x, y) = (uniform(Shape::new(1, 2, 8, 8), 0.2, 1.0, r), uniform(Shape::new(1, 2, 8, 8), 0.2, 1.0, r));
    out.push(check_inputs("q_index_mean", &[x, y], STEP, tol, None, r, |t| {
        project(&q_index_mean(&t[0], &t[1], 4)?, 23)
    })?);

    let img = uniform(Shape::new(1, 2, 8, 8), 0.0, 1.0, r);
    out.push(check_inputs("bicubic up4", &[uniform(Shape::new(1, 2, 3, 3), 0.0, 1.0, r)], STEP, tol, None, r, |t| {
        project(&bicubic_resize(&t[0], Scale::UP4)?, 24)
    })?);
    out.push(check_inputs("bicubic down4", &[img.clone()], STEP, tol, None, r, |t| {
        project(&bicubic_resize(&t[0], Scale::DOWN4)?, 25)
    })?);
    let rows = Arc::new(FilterSpec::gaussian(3, 0.8)?.axis(8));
    let cols = Arc::new(FilterSpec::boxed(5)?.axis(8));
    out.push(check_inputs("separable", &[img.clone()], STEP, tol, None, r, |t| {
        project(&separable(&t[0], &rows, &cols)?, 26)
    })?);
    let avg = FilterSpec::averaging();
    out.push(check_inputs("low_pass", &[img.clone()], STEP, tol, None, r, |t| project(&low_pass(&t[0], &avg)?, 27))?);
    out.push(check_inputs("high_pass", &[img.clone()], STEP, tol, None, r, |t| project(&high_pass(&t[0], &avg)?, 28))?);
    let wald = FilterSpec::wald_gaussian();
    out.push(check_inputs("degrade", &[img], STEP, tol, None, r, |t| project(&degrade(&t[0], &wald)?, 29))?);
    Ok(out)
}

/// Toy networks and inputs for the loss-term checks.
pub struct LossFixture {
    pub g: Generator<f64>,
    pub d: Discriminator<f64>,
    pub pan: Tensor<f64>,
    pub lrms: Tensor<f64>,
}

impl LossFixture {
    /// `side`×`side` PAN. The generator's last conv is zero at
    /// initialisation, which would make every upstream gradient trivially
    /// zero; here it is re-drawn so the checks see real signal.
    pub fn new(block_kind: BlockKind, side: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Generator::new(block_kind, &mut rng);
        let last = &mut g.rst.conv.weight;
        let shape = last.tensor.shape();
        *last = Parameter::normal(last.name.clone(), shape, 0.05, &mut rng);
        let d = Discriminator::new(&mut rng);
        let pan = uniform(Shape::new(1, 1, side, side), 0.1, 0.9, &mut rng);
        let lrms = uniform(Shape::new(1, 4, side / 4, side / 4), 0.1, 0.9, &mut rng);
        LossFixture { g, d, pan, lrms }
    }
}

/// Probes per parameter tensor for the term checks.
const PER_TENSOR: usize = 3;

/// Every loss term w.r.t. the parameters it trains, plus the weighted
/// objective and the differentiable QNR path w.r.t. the fused image.
pub fn loss_checks(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let r = &mut rng;
    let small = LossFixture::new(BlockKind::Rca, 16, seed);
    let (pan, lrms) = (&small.pan, &small.lrms);
    let filter = small.g.filter;
    let mut out = Vec::new();

    out.push(check_module("cycle loss / G", &small.g, NETWORK_STEP, TERM_TOL, PER_TENSOR, r, |g| {
        cycle_term(&CyclePass::run(g, pan, lrms)?)
    })?);
    for pool in [Pooling::Max, Pooling::Avg] {
        let name = format!("spatial loss ({pool:?} pooling) / G").to_lowercase();
        out.push(check_module(&name, &small.g, NETWORK_STEP, TERM_TOL, PER_TENSOR, r, |g| {
            spatial_loss(pan, &g.forward(pan, lrms)?, &filter, pool)
        })?);
    }
    out.push(check_module("spectral loss / G", &small.g, NETWORK_STEP, TERM_TOL, PER_TENSOR, r, |g| {
        spectral_loss(lrms, &g.forward(pan, lrms)?, &filter)
    })?);
    out.push(check_module("no-reference loss / G", &small.g, NETWORK_STEP, TERM_TOL, PER_TENSOR, r, |g| {
        nrf_loss(pan, lrms, &g.forward(pan, lrms)?, None)
    })?);

    // The discriminator needs a 32×32 PAN.
    let big = LossFixture::new(BlockKind::Rca, 32, seed + 1);
    let (pan, lrms) = (&big.pan, &big.lrms);
    out.push(check_module("adversarial loss / G", &big.g, NETWORK_STEP, TERM_TOL, 2, r, |g| {
        adv_g_term(&big.d, pan, &CyclePass::run(g, pan, lrms)?)
    })?);
    let pass = CyclePass::run(&big.g, pan, lrms)?;
    out.push(check_module("discriminator loss / D", &big.d, NETWORK_STEP, TERM_TOL, 4, r, |d| {
        adv_d_term(d, pan, lrms, &pass, (0.9, 0.1))
    })?);
    let weights = LossWeights::default();
    out.push(check_module("weighted objective / G", &big.g, NETWORK_STEP, COMPOSITE_TOL, 2, r, |g| {
        let forward = Forward::run(g, pan, lrms, &weights)?;
        Ok(objective_from(&forward, &big.d, pan, lrms, None, &weights, &filter, Pooling::Max)?.total)
    })?);

    let fused = uniform(Shape::new(1, 4, 64, 64), 0.1, 0.9, r);
    let pan = uniform(Shape::new(1, 1, 64, 64), 0.1, 0.9, r);
    let lrms = uniform(Shape::new(1, 4, 16, 16), 0.1, 0.9, r);
    out.push(check_inputs("qnr / fused (64x64)", &[fused], STEP, COMPOSITE_TOL, Some(200), r, |t| {
        Ok(mean(&qnr_terms(&t[0], &lrms, &pan, None)?.qnr))
    })?);
    Ok(out)
}

/// Primitives followed by loss terms.
pub fn run_suite(seed: u64) -> Result<Vec<GradCheck>> {
    let mut all = primitive_checks(seed)?;
    all.extend(loss_checks(seed)?);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_is_scale_free() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        let e = relative_error(&[10.0, 0.0], &[10.0, 1e-3]);
        assert!((e - 1e-4).abs() < 1e-15);
        assert_eq!(relative_error(&[2e3, 0.0], &[2e3, 2e-1]), e);
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        // The square term is detached, so its gradient never reaches x.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = uniform(Shape::new(1, 1, 2, 2), 0.5, 1.0, &mut rng);
        let check = check_inputs("broken", &[x], STEP, PRIMITIVE_TOL, None, &mut rng, |t| {
            Ok(add(&sum(&t[0]), &sum(&mul(&t[0].detach(), &t[0].detach())?))?)
        })
        .unwrap();
        assert!(!check.passed(), "{check:?}");
    }

    #[test]
    fn primitives_pass() {
        for c in primitive_checks(1).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }
}
