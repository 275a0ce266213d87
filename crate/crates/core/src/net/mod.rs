//! Generator, discriminator and their building blocks.

mod blocks;
pub mod checkpoint;
mod discriminator;
mod generator;
mod layers;

pub use blocks::{Block, BlockKind, ChannelAttention, FEATURES, RCA_REDUCTION};
pub use discriminator::{Discriminator, DISC_IN_CHANNELS, DISC_MIN_SIDE};
pub use generator::{EmbNet, FusionNet, Generator, RstNet, MIN_PAN_SIDE};
pub use layers::{Conv, Module, Parameter, INIT_STD};

use crate::error::Result;

/// Rebuild a generator from checkpoint tensors; the block kind is inferred
/// from whether attention weights are present.
pub fn generator_from_entries(entries: &[checkpoint::Entry]) -> Result<Generator<f32>> {
    let kind = if entries.iter().any(|e| e.name.contains(".fc1.")) {
        BlockKind::Rca
    } else {
        BlockKind::Residual
    };
    let mut g = Generator::new(kind, &mut layers::scratch_rng());
    checkpoint::apply(&mut g, entries)?;
    Ok(g)
}
