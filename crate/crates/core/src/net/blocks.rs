use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv, Module, Parameter};
use crate::error::{Error, Result};
use crate::tensor::ops::{add, global_avg_pool, instance_norm, mul_channelwise, relu, sigmoid, INSTANCE_NORM_EPS};
use crate::tensor::{Element, Tensor};

/// Feature width of every hidden generator layer.
pub const FEATURES: usize = 32;
/// Channel-attention bottleneck: 32 → 4 → 32.
pub const RCA_REDUCTION: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Residual block with channel attention.
    #[default]
    Rca,
    /// Plain two-convolution residual block.
    #[serde(alias = "res")]
    Residual,
}

impl std::str::FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rca" => Ok(BlockKind::Rca),
            "res" | "residual" => Ok(BlockKind::Residual),
            other => Err(Error::contract(format!("unknown block kind `{other}` (rca|res)"))),
        }
    }
}

/// Squeeze-and-excitation style channel gate.
#[derive(Clone, Debug)]
pub struct ChannelAttention<T: Element> {
    pub fc1: Conv<T>,
    pub fc2: Conv<T>,
}

impl<T: Element> ChannelAttention<T> {
    /// Per-channel scale in (0, 1), shape (N, C, 1, 1), from the channel
    /// means of `y`.
    pub fn scales(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        let squeezed = global_avg_pool(y);
        let hidden = relu(&self.fc1.forward(&squeezed)?);
        Ok(sigmoid(&self.fc2.forward(&hidden)?))
    }
}

/// `x + IN(conv2(relu(IN(conv1(x)))))`, optionally gated by channel attention.
///
/// The gate squeezes `conv2`'s output *before* its instance norm: after the
/// norm every channel mean is zero and the gate would be a constant.
#[derive(Clone, Debug)]
pub struct Block<T: Element> {
    pub conv1: Conv<T>,
    pub conv2: Conv<T>,
    pub attention: Option<ChannelAttention<T>>,
}

impl<T: Element> Block<T> {
    pub fn new(name: &str, kind: BlockKind, rng: &mut impl Rng) -> Self {
        let conv1 = Conv::same3(&format!("{name}.conv1"), FEATURES, FEATURES, rng);
        let conv2 = Conv::same3(&format!("{name}.conv2"), FEATURES, FEATURES, rng);
        let attention = match kind {
            BlockKind::Rca => Some(ChannelAttention {
                fc1: Conv::dense(&format!("{name}.fc1"), FEATURES, FEATURES / RCA_REDUCTION, rng),
                fc2: Conv::dense(&format!("{name}.fc2"), FEATURES / RCA_REDUCTION, FEATURES, rng),
            }),
            BlockKind::Residual => None,
        };
        Block { conv1, conv2, attention }
    }

    pub fn kind(&self) -> BlockKind {
        if self.attention.is_some() {
            BlockKind::Rca
        } else {
            BlockKind::Residual
        }
    }

    /// The residual branch before gating.
    pub fn branch(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.branch_parts(x)?.1)
    }

    /// `conv2` output and its instance-normalised version.
    fn branch_parts(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let eps = T::lit(INSTANCE_NORM_EPS);
        let h = relu(&instance_norm(&self.conv1.forward(x)?, eps)?);
        let raw = self.conv2.forward(&h)?;
        let y = instance_norm(&raw, eps)?;
        Ok((raw, y))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.shape().c() != FEATURES {
            return Err(Error::dim("block", "channels", FEATURES, x.shape().c()));
        }
        let (raw, y) = self.branch_parts(x)?;
        let y = match &self.attention {
            Some(att) => mul_channelwise(&y, &att.scales(&raw)?)?,
            None => y,
        };
        add(x, &y)
    }
}

impl<T: Element> Module<T> for Block<T> {
    fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut v = self.conv1.parameters();
        v.extend(self.conv2.parameters());
        if let Some(att) = &self.attention {
            v.extend(att.fc1.parameters());
            v.extend(att.fc2.parameters());
        }
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v = self.conv1.parameters_mut();
        v.extend(self.conv2.parameters_mut());
        if let Some(att) = &mut self.attention {
            v.extend(att.fc1.parameters_mut());
            v.extend(att.fc2.parameters_mut());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_all(block: &mut Block<f64>) {
        for p in block.parameters_mut() {
            let n = p.tensor.numel();
            p.set(vec![0.0; n]).unwrap();
        }
    }

    fn input(rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let s = Shape::new(2, FEATURES, 6, 5);
        Tensor::from_vec(s, (0..s.numel()).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn zero_weights_give_identity_for_both_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = input(&mut rng);
        for kind in [BlockKind::Rca, BlockKind::Residual] {
            let mut b = Block::<f64>::new("b", kind, &mut rng);
            zero_all(&mut b);
            let y = b.forward(&x).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert_eq!(y.data(), x.data());
        }
    }

    #[test]
    fn zero_attention_halves_the_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = input(&mut rng);
        let mut b = Block::<f64>::new("b", BlockKind::Rca, &mut rng);
        let att = b.attention.as_mut().unwrap();
        for p in att.fc1.parameters_mut().into_iter().chain(att.fc2.parameters_mut()) {
            let n = p.tensor.numel();
            p.set(vec![0.0; n]).unwrap();
        }
        let y = b.forward(&x).unwrap();
        let branch = b.branch(&x).unwrap();
        for ((o, i), r) in y.data().iter().zip(x.data()).zip(branch.data()) {
            assert!((o - (i + 0.5 * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_depends_on_the_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = Block::<f64>::new("b", BlockKind::Rca, &mut rng);
        let att = b.attention.as_ref().unwrap();
        let x = input(&mut rng);
        let raw = b.conv2.forward(&relu(&instance_norm(&b.conv1.forward(&x).unwrap(), 1e-5).unwrap())).unwrap();
        let s = att.scales(&raw).unwrap();
        let (s0, s1) = (&s.data()[..FEATURES], &s.data()[FEATURES..]);
        assert!(s0.iter().zip(s1).any(|(a, b)| (a - b).abs() > 1e-9), "gate ignores its input");
        let y = b.forward(&x).unwrap();
        let branch = b.branch(&x).unwrap();
        let plane = x.shape().plane();
        for (i, ((o, xi), r)) in y.data().iter().zip(x.data()).zip(branch.data()).enumerate() {
            let scale = s.data()[i / plane];
            assert!((o - (xi + scale * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn rca_has_more_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rca = Block::<f32>::new("b", BlockKind::Rca, &mut rng);
        let res = Block::<f32>::new("b", BlockKind::Residual, &mut rng);
        assert_eq!(rca.parameter_count() - res.parameter_count(), 32 * 4 + 4 + 4 * 32 + 32);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = Block::<f64>::new("b", BlockKind::Residual, &mut rng);
        assert!(b.forward(&Tensor::zeros(Shape::new(1, 16, 4, 4))).is_err());
    }

    #[test]
    fn block_kind_parses_cli_spellings() {
        assert_eq!("rca".parse::<BlockKind>().unwrap(), BlockKind::Rca);
        assert_eq!("res".parse::<BlockKind>().unwrap(), BlockKind::Residual);
        assert!("dense".parse::<BlockKind>().is_err());
    }
}
