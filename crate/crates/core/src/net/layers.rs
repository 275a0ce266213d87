use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::tensor::ops::conv2d;
use crate::tensor::{Element, Shape, Tensor};

/// Standard deviation of the normal weight initialiser.
pub const INIT_STD: f64 = 0.02;

/// RNG for networks whose initial values are overwritten right away (casts,
/// checkpoint loading). A constant mock stream would stall the normal
/// sampler's rejection loop.
pub(crate) fn scratch_rng() -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(0)
}

/// A named trainable tensor.
#[derive(Clone, Debug)]
pub struct Parameter<T: Element> {
    pub name: String,
    pub tensor: Tensor<T>,
}

impl<T: Element> Parameter<T> {
    pub fn new(name: impl Into<String>, shape: Shape, data: Vec<T>) -> Result<Self> {
        Ok(Parameter {
            name: name.into(),
            tensor: Tensor::parameter(shape, data)?,
        })
    }

    pub fn zeros(name: impl Into<String>, shape: Shape) -> Self {
        Self::new(name, shape, vec![T::zero(); shape.numel()]).expect("shape matches")
    }

    pub fn normal(name: impl Into<String>, shape: Shape, std: f64, rng: &mut impl Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        let data = (0..shape.numel()).map(|_| T::lit(dist.sample(rng))).collect();
        Self::new(name, shape, data).expect("shape matches")
    }

    /// Replace the value, keeping the name. The new leaf starts without a gradient.
    pub fn set(&mut self, data: Vec<T>) -> Result<()> {
        self.tensor = Tensor::parameter(self.tensor.shape(), data)?;
        Ok(())
    }
}

/// Anything that owns parameters.
pub trait Module<T: Element> {
    fn parameters(&self) -> Vec<&Parameter<T>>;
    fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>>;

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.tensor.numel()).sum()
    }

    fn zero_grad(&self) {
        for p in self.parameters() {
            p.tensor.zero_grad();
        }
    }
}

/// Square-kernel convolution with bias.
#[derive(Clone, Debug)]
pub struct Conv<T: Element> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Element> Conv<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        zero_init: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let wshape = Shape::new(cout, cin, kernel, kernel);
        let weight = if zero_init {
            Parameter::zeros(format!("{name}.weight"), wshape)
        } else {
            Parameter::normal(format!("{name}.weight"), wshape, INIT_STD, rng)
        };
        Conv {
            weight,
            bias: Parameter::zeros(format!("{name}.bias"), Shape::new(cout, 1, 1, 1)),
            stride,
            padding,
        }
    }

    /// 3×3, stride 1, same-size output.
    pub fn same3(name: &str, cin: usize, cout: usize, rng: &mut impl Rng) -> Self {
        Self::new(name, cin, cout, 3, 1, 1, false, rng)
    }

    /// 1×1 on a 1×1 map, i.e. a fully connected layer over channels.
    pub fn dense(name: &str, cin: usize, cout: usize, rng: &mut impl Rng) -> Self {
        Self::new(name, cin, cout, 1, 1, 0, false, rng)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, &self.weight.tensor, &self.bias.tensor, self.stride, self.padding)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.tensor.shape().c()
    }

    pub fn out_channels(&self) -> usize {
        self.weight.tensor.shape().n()
    }
}

impl<T: Element> Module<T> for Conv<T> {
    fn parameters(&self) -> Vec<&Parameter<T>> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
