use rand::Rng;

use super::generator::check_pair_geometry;
use super::layers::{Conv, Module, Parameter};
use crate::error::Result;
use crate::imaging::{bicubic_resize, Scale, MS_BANDS};
use crate::tensor::ops::{concat_channels, instance_norm, leaky_relu, INSTANCE_NORM_EPS, LEAKY_RELU_SLOPE};
use crate::tensor::{Element, Tensor};

/// PAN + upsampled MS + fused image.
pub const DISC_IN_CHANNELS: usize = 1 + 2 * MS_BANDS;

/// (out channels, stride, instance norm) of each 4×4 layer.
const LAYERS: [(usize, usize, bool); 5] = [
    (64, 2, false),
    (128, 2, true),
    (256, 2, true),
    (512, 1, true),
    (1, 1, false),
];

/// Smallest PAN side for which every layer still has a non-empty output.
pub const DISC_MIN_SIDE: usize = 32;

/// Conditional patch discriminator producing a raw (unsquashed) score map.
#[derive(Clone, Debug)]
pub struct Discriminator<T: Element> {
    pub layers: Vec<(Conv<T>, bool)>,
}

impl<T: Element> Discriminator<T> {
    pub fn new(rng: &mut impl Rng) -> Self {
        let mut cin = DISC_IN_CHANNELS;
        let layers = LAYERS
            .iter()
            .enumerate()
            .map(|(i, &(cout, stride, norm))| {
                let conv = Conv::new(&format!("D.layers.{i}"), cin, cout, 4, stride, 1, false, rng);
                cin = cout;
                (conv, norm)
            })
            .collect();
        Discriminator { layers }
    }

    /// Score map for the triple; 64×64 PAN gives a 6×6 map.
    pub fn forward(&self, pan: &Tensor<T>, lrms: &Tensor<T>, fused: &Tensor<T>) -> Result<Tensor<T>> {
        check_pair_geometry(pan, lrms, DISC_MIN_SIDE)?;
        let up = bicubic_resize(lrms, Scale::UP4)?;
        let mut h = concat_channels(&concat_channels(pan, &up)?, fused)?;
        let last = self.layers.len() - 1;
        for (i, (conv, norm)) in self.layers.iter().enumerate() {
            h = conv.forward(&h)?;
            if *norm {
                h = instance_norm(&h, T::lit(INSTANCE_NORM_EPS))?;
            }
            if i != last {
                h = leaky_relu(&h, T::lit(LEAKY_RELU_SLOPE));
            }
        }
        Ok(h)
    }

    pub fn cast<U: Element>(&self) -> Discriminator<U> {
        let mut out = Discriminator::<U>::new(&mut super::layers::scratch_rng());
        for (dst, src) in out.parameters_mut().into_iter().zip(self.parameters()) {
            dst.tensor = src.tensor.cast::<U>().detach_as_parameter();
        }
        out
    }
}

impl<T: Element> Module<T> for Discriminator<T> {
    fn parameters(&self) -> Vec<&Parameter<T>> {
        self.layers.iter().flat_map(|(c, _)| c.parameters()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        self.layers.iter_mut().flat_map(|(c, _)| c.parameters_mut()).collect()
    }
}
