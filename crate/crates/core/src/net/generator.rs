use rand::Rng;

use super::blocks::{Block, BlockKind, FEATURES};
use super::layers::{Conv, Module, Parameter};
use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, high_pass, replicate_pan, FilterSpec, Scale, MS_BANDS, RATIO};
use crate::tensor::ops::{add, concat_channels, relu};
use crate::tensor::{Element, Tensor};

/// One stream of the embedding network: entry conv, then one block.
#[derive(Clone, Debug)]
pub struct EmbNet<T: Element> {
    pub conv: Conv<T>,
    pub block: Block<T>,
}

impl<T: Element> EmbNet<T> {
    fn new(name: &str, kind: BlockKind, rng: &mut impl Rng) -> Self {
        EmbNet {
            conv: Conv::same3(&format!("{name}.conv"), MS_BANDS, FEATURES, rng),
            block: Block::new(&format!("{name}.block"), kind, rng),
        }
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.block.forward(&relu(&self.conv.forward(x)?))
    }
}

/// 64 → 32 entry conv followed by three blocks.
#[derive(Clone, Debug)]
pub struct FusionNet<T: Element> {
    pub conv: Conv<T>,
    pub blocks: Vec<Block<T>>,
}

impl<T: Element> FusionNet<T> {
    fn new(name: &str, kind: BlockKind, rng: &mut impl Rng) -> Self {
        FusionNet {
            conv: Conv::same3(&format!("{name}.conv"), 2 * FEATURES, FEATURES, rng),
            blocks: (0..3).map(|i| Block::new(&format!("{name}.blocks.{i}"), kind, rng)).collect(),
        }
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = relu(&self.conv.forward(x)?);
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        Ok(h)
    }
}

/// One block, then a 3×3 conv to the four MS bands (no normalisation).
#[derive(Clone, Debug)]
pub struct RstNet<T: Element> {
    pub block: Block<T>,
    pub conv: Conv<T>,
}

impl<T: Element> RstNet<T> {
    fn new(name: &str, kind: BlockKind, rng: &mut impl Rng) -> Self {
        RstNet {
            block: Block::new(&format!("{name}.block"), kind, rng),
            conv: Conv::new(&format!("{name}.conv"), FEATURES, MS_BANDS, 3, 1, 1, true, rng),
        }
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.conv.forward(&self.block.forward(x)?)
    }
}

/// Two-stream generator with a global bicubic skip connection.
#[derive(Clone, Debug)]
pub struct Generator<T: Element> {
    pub block_kind: BlockKind,
    pub filter: FilterSpec,
    pub emb_pan: EmbNet<T>,
    pub emb_ms: EmbNet<T>,
    pub fusion: FusionNet<T>,
    pub rst: RstNet<T>,
}

/// Smallest PAN side the generator accepts.
pub const MIN_PAN_SIDE: usize = 16;

pub(crate) fn check_pair_geometry<T: Element>(pan: &Tensor<T>, lrms: &Tensor<T>, min_side: usize) -> Result<()> {
    let (ps, ms) = (pan.shape(), lrms.shape());
    if ps.c() != 1 {
        return Err(Error::dim("pan", "channels", 1, ps.c()));
    }
    if ms.c() != MS_BANDS {
        return Err(Error::dim("lrms", "channels", MS_BANDS, ms.c()));
    }
    if ms.n() != ps.n() {
        return Err(Error::dim("lrms", "batch", ps.n(), ms.n()));
    }
    if ps.h() != RATIO * ms.h() {
        return Err(Error::dim("lrms", "height", ps.h() / RATIO, ms.h()));
    }
    if ps.w() != RATIO * ms.w() {
        return Err(Error::dim("lrms", "width", ps.w() / RATIO, ms.w()));
    }
    if ps.h() < min_side || ps.w() < min_side {
        return Err(Error::contract(format!(
            "PAN {}x{} is smaller than the {min_side}x{min_side} minimum",
            ps.h(),
            ps.w()
        )));
    }
    Ok(())
}

impl<T: Element> Generator<T> {
    pub fn new(block_kind: BlockKind, rng: &mut impl Rng) -> Self {
        Generator {
            block_kind,
            filter: FilterSpec::averaging(),
            emb_pan: EmbNet::new("G.emb_pan", block_kind, rng),
            emb_ms: EmbNet::new("G.emb_ms", block_kind, rng),
            fusion: FusionNet::new("G.fusion", block_kind, rng),
            rst: RstNet::new("G.rst", block_kind, rng),
        }
    }

    /// `(N,1,H,W)` PAN and `(N,4,H/4,W/4)` MS → `(N,4,H,W)` fused image.
    pub fn forward(&self, pan: &Tensor<T>, lrms: &Tensor<T>) -> Result<Tensor<T>> {
        let (up, residual) = self.forward_split(pan, lrms)?;
        add(&up, &residual)
    }

    /// The bicubic skip and the learned residual, before they are summed.
    pub fn forward_split(&self, pan: &Tensor<T>, lrms: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        check_pair_geometry(pan, lrms, MIN_PAN_SIDE)?;
        let up = bicubic_resize(lrms, Scale::UP4)?;
        let pan_detail = high_pass(&replicate_pan(pan)?, &self.filter)?;
        let ms_detail = high_pass(&up, &self.filter)?;
        let fused = concat_channels(&self.emb_pan.forward(&pan_detail)?, &self.emb_ms.forward(&ms_detail)?)?;
        let residual = self.rst.forward(&self.fusion.forward(&fused)?)?;
        Ok((up, residual))
    }

    /// Same network in another precision.
    pub fn cast<U: Element>(&self) -> Generator<U> {
        let mut out = Generator::<U>::new(self.block_kind, &mut super::layers::scratch_rng());
        out.filter = self.filter;
        for (dst, src) in out.parameters_mut().into_iter().zip(self.parameters()) {
            dst.tensor = src.tensor.cast::<U>().detach_as_parameter();
        }
        out
    }
}

impl<T: Element> Module<T> for Generator<T> {
    fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut v = self.emb_pan.conv.parameters();
        v.extend(self.emb_pan.block.parameters());
        v.extend(self.emb_ms.conv.parameters());
        v.extend(self.emb_ms.block.parameters());
        v.extend(self.fusion.conv.parameters());
        for b in &self.fusion.blocks {
            v.extend(b.parameters());
        }
        v.extend(self.rst.block.parameters());
        v.extend(self.rst.conv.parameters());
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v = self.emb_pan.conv.parameters_mut();
        v.extend(self.emb_pan.block.parameters_mut());
        v.extend(self.emb_ms.conv.parameters_mut());
        v.extend(self.emb_ms.block.parameters_mut());
        v.extend(self.fusion.conv.parameters_mut());
        for b in &mut self.fusion.blocks {
            v.extend(b.parameters_mut());
        }
        v.extend(self.rst.block.parameters_mut());
        v.extend(self.rst.conv.parameters_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Shape, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_vec(shape, (0..shape.numel()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn zero_final_conv_reproduces_bicubic_upsample() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = Generator::<f64>::new(BlockKind::Rca, &mut rng);
        let pan = random(Shape::new(1, 1, 64, 64), 0.0, 1023.0, &mut rng);
        let ms = random(Shape::new(1, 4, 16, 16), 0.0, 1023.0, &mut rng);
        let out = g.forward(&pan, &ms).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 4, 64, 64));
        assert_eq!(out.data(), bicubic_resize(&ms, Scale::UP4).unwrap().data());
    }

    #[test]
    fn names_are_unique_and_hierarchical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Generator::<f32>::new(BlockKind::Rca, &mut rng);
        let names: Vec<_> = g.parameters().iter().map(|p| p.name.clone()).collect();
        let set: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(set.len(), names.len());
        assert!(names.contains(&"G.emb_pan.conv.weight".to_string()));
        assert!(names.contains(&"G.fusion.blocks.2.fc2.bias".to_string()));
        assert!(names.iter().all(|n| n.starts_with("G.")));
    }

    #[test]
    fn rca_variant_is_larger() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rca = Generator::<f32>::new(BlockKind::Rca, &mut rng);
        let res = Generator::<f32>::new(BlockKind::Residual, &mut rng);
        assert!(rca.parameter_count() > res.parameter_count());
        // Six blocks, each with 32·4+4 + 4·32+32 attention weights.
        assert_eq!(rca.parameter_count() - res.parameter_count(), 6 * 292);
    }

    #[test]
    fn bad_geometry_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = Generator::<f64>::new(BlockKind::Residual, &mut rng);
        let pan = Tensor::<f64>::zeros(Shape::new(1, 1, 32, 32));
        assert!(g.forward(&pan, &Tensor::zeros(Shape::new(1, 4, 16, 16))).is_err());
        assert!(g.forward(&pan, &Tensor::zeros(Shape::new(1, 3, 8, 8))).is_err());
        let small = Tensor::<f64>::zeros(Shape::new(1, 1, 8, 8));
        assert!(g.forward(&small, &Tensor::zeros(Shape::new(1, 4, 2, 2))).is_err());
    }
}
