use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use crate::error::{Error, Result};
use crate::losses::{LossTerm, LossWeights, Pooling, SoftLabelConfig};
use crate::net::BlockKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub loss_weights: LossWeights,
    pub soft_labels: SoftLabelConfig,
    pub block_kind: BlockKind,
    pub pooling: Pooling,
    pub seed: u64,
    /// Write a checkpoint every this many iterations; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Stop after this many iterations regardless of `epochs`.
    pub iterations: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 8,
            learning_rate: adam.lr,
            epochs: 20,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            loss_weights: LossWeights::default(),
            soft_labels: SoftLabelConfig::default(),
            block_kind: BlockKind::Rca,
            pooling: Pooling::Max,
            seed: 0,
            checkpoint_every: 0,
            iterations: None,
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn disable(&mut self, term: LossTerm) {
        self.loss_weights.set_enabled(term, false);
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.iterations == Some(0) {
            return fail("iterations must be at least 1 when set".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return fail(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        let SoftLabelConfig { real, fake } = self.soft_labels;
        if real.0 > real.1 || fake.0 > fake.1 {
            return fail("soft label ranges must be ordered (low, high)".into());
        }
        self.loss_weights.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: TrainConfig =
            serde_json::from_str(r#"{"learning_rate": 0.001, "loss_weights": {"use_adv": false}, "block_kind": "residual"}"#)
                .unwrap();
        assert_eq!(cfg.learning_rate, 0.001);
        assert!(!cfg.loss_weights.use_adv && cfg.loss_weights.use_cyc);
        assert_eq!(cfg.loss_weights.rec, 5e-4);
        assert_eq!(cfg.block_kind, BlockKind::Residual);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr": 1}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for cfg in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { beta2: 1.0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
        let mut cfg = TrainConfig::default();
        for t in LossTerm::ALL {
            cfg.disable(t);
        }
        assert!(cfg.validate().is_err());
    }
}
