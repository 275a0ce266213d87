use crate::error::{Error, Result};
use crate::tensor::{expect_same_shape, Backward, Element, Shape, Tensor};

/// Elementwise op whose derivative is precomputed during the forward pass.
struct LocalDerivative<T: Element> {
    input: Tensor<T>,
    deriv: Vec<T>,
}

impl<T: Element> Backward<T> for LocalDerivative<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        vec![Some(grad.iter().zip(&self.deriv).map(|(g, d)| *g * *d).collect())]
    }
}

fn map_with_derivative<T: Element>(x: &Tensor<T>, f: impl Fn(T) -> (T, T)) -> Tensor<T> {
    let (data, deriv): (Vec<T>, Vec<T>) = x.data().iter().map(|&v| f(v)).unzip();
    Tensor::from_op(x.shape(), data, LocalDerivative { input: x.clone(), deriv })
}

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    map_with_derivative(x, |v| if v > T::zero() { (v, T::one()) } else { (T::zero(), T::zero()) })
}

pub fn leaky_relu<T: Element>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    map_with_derivative(x, |v| if v > T::zero() { (v, T::one()) } else { (v * slope, slope) })
}

pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    map_with_derivative(x, |v| {
        let s = T::one() / (T::one() + (-v).exp());
        (s, s * (T::one() - s))
    })
}

/// |x| with subgradient 0 at 0.
pub fn abs<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    map_with_derivative(x, |v| (v.abs(), v.signum() * if v == T::zero() { T::zero() } else { T::one() }))
}

pub fn scale<T: Element>(x: &Tensor<T>, s: T) -> Tensor<T> {
    map_with_derivative(x, |v| (v * s, s))
}

pub fn add_scalar<T: Element>(x: &Tensor<T>, s: T) -> Tensor<T> {
    map_with_derivative(x, |v| (v + s, T::one()))
}

/// `s - x`
pub fn rsub_scalar<T: Element>(s: T, x: &Tensor<T>) -> Tensor<T> {
    map_with_derivative(x, |v| (s - v, -T::one()))
}

#[derive(Clone, Copy)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
}

struct Binary<T: Element> {
    a: Tensor<T>,
    b: Tensor<T>,
    kind: BinaryKind,
}

impl<T: Element> Backward<T> for Binary<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let ga = self.a.requires_grad();
        let gb = self.b.requires_grad();
        match self.kind {
            BinaryKind::Add => vec![ga.then(|| grad.to_vec()), gb.then(|| grad.to_vec())],
            BinaryKind::Sub => vec![ga.then(|| grad.to_vec()), gb.then(|| grad.iter().map(|g| -*g).collect())],
            BinaryKind::Mul => vec![
                ga.then(|| grad.iter().zip(self.b.data()).map(|(g, b)| *g * *b).collect()),
                gb.then(|| grad.iter().zip(self.a.data()).map(|(g, a)| *g * *a).collect()),
            ],
        }
    }
}

fn binary<T: Element>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>, kind: BinaryKind) -> Result<Tensor<T>> {
    expect_same_shape(op, a.shape(), b.shape())?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
        })
        .collect();
    Ok(Tensor::from_op(a.shape(), data, Binary { a: a.clone(), b: b.clone(), kind }))
}

pub fn add<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary("add", a, b, BinaryKind::Add)
}

pub fn sub<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary("sub", a, b, BinaryKind::Sub)
}

pub fn mul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary("mul", a, b, BinaryKind::Mul)
}

struct ChannelScale<T: Element> {
    x: Tensor<T>,
    s: Tensor<T>,
}

impl<T: Element> Backward<T> for ChannelScale<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.x, &self.s]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let plane = self.x.shape().plane();
        let gx = self.x.requires_grad().then(|| {
            grad.chunks(plane)
                .zip(self.s.data())
                .flat_map(|(g, &s)| g.iter().map(move |v| *v * s))
                .collect()
        });
        let gs = self.s.requires_grad().then(|| {
            grad.chunks(plane)
                .zip(self.x.data().chunks(plane))
                .map(|(g, x)| g.iter().zip(x).map(|(a, b)| *a * *b).sum())
                .collect()
        });
        vec![gx, gs]
    }
}

/// `x ⊙ s` with `s` of shape (N, C, 1, 1) broadcast over each plane.
pub fn mul_channelwise<T: Element>(x: &Tensor<T>, s: &Tensor<T>) -> Result<Tensor<T>> {
    let (xs, ss) = (x.shape(), s.shape());
    expect_same_shape("mul_channelwise", xs.with_hw(1, 1), ss)?;
    let plane = xs.plane();
    let data = x
        .data()
        .chunks(plane)
        .zip(s.data())
        .flat_map(|(p, &k)| p.iter().map(move |v| *v * k))
        .collect();
    Ok(Tensor::from_op(xs, data, ChannelScale { x: x.clone(), s: s.clone() }))
}

/// Channel gather. `index` may repeat channels.
struct SelectChannels<T: Element> {
    x: Tensor<T>,
    index: Vec<usize>,
}

impl<T: Element> Backward<T> for SelectChannels<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.x]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let xs = self.x.shape();
        let plane = xs.plane();
        let k = self.index.len();
        let mut gx = vec![T::zero(); xs.numel()];
        for n in 0..xs.n() {
            for (j, &c) in self.index.iter().enumerate() {
                let src = &grad[(n * k + j) * plane..][..plane];
                let dst = &mut gx[(n * xs.c() + c) * plane..][..plane];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d = *d + *s);
            }
        }
        vec![Some(gx)]
    }
}

pub fn select_channels<T: Element>(x: &Tensor<T>, index: &[usize]) -> Result<Tensor<T>> {
    let xs = x.shape();
    if let Some(&bad) = index.iter().find(|&&c| c >= xs.c()) {
        return Err(Error::dim("select_channels", "channels", xs.c(), bad));
    }
    let mut data = Vec::with_capacity(xs.n() * index.len() * xs.plane());
    for n in 0..xs.n() {
        for &c in index {
            data.extend_from_slice(x.plane(n, c));
        }
    }
    let shape = xs.with_c(index.len());
    Ok(Tensor::from_op(shape, data, SelectChannels { x: x.clone(), index: index.to_vec() }))
}

/// (N, 1, H, W) → (N, copies, H, W).
pub fn repeat_channels<T: Element>(x: &Tensor<T>, copies: usize) -> Result<Tensor<T>> {
    if x.shape().c() != 1 {
        return Err(Error::contract(format!(
            "repeat_channels expects a single-channel input, got {} channels",
            x.shape().c()
        )));
    }
    select_channels(x, &vec![0; copies])
}

struct Concat<T: Element> {
    a: Tensor<T>,
    b: Tensor<T>,
}

impl<T: Element> Backward<T> for Concat<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let la = self.a.shape().c() * self.a.shape().plane();
        let lb = self.b.shape().c() * self.b.shape().plane();
        let mut ga = Vec::with_capacity(self.a.numel());
        let mut gb = Vec::with_capacity(self.b.numel());
        for chunk in grad.chunks(la + lb) {
            ga.extend_from_slice(&chunk[..la]);
            gb.extend_from_slice(&chunk[la..]);
        }
        vec![self.a.requires_grad().then_some(ga), self.b.requires_grad().then_some(gb)]
    }
}

pub fn concat_channels<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    expect_same_shape("concat_channels", sa.with_c(1), sb.with_c(1))?;
    let la = sa.c() * sa.plane();
    let lb = sb.c() * sb.plane();
    let mut data = Vec::with_capacity(a.numel() + b.numel());
    for n in 0..sa.n() {
        data.extend_from_slice(&a.data()[n * la..][..la]);
        data.extend_from_slice(&b.data()[n * lb..][..lb]);
    }
    let shape = Shape::new(sa.n(), sa.c() + sb.c(), sa.h(), sa.w());
    Ok(Tensor::from_op(shape, data, Concat { a: a.clone(), b: b.clone() }))
}
