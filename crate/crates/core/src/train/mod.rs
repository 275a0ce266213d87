//! Optimisation, the alternating training loop, inference and evaluation.

mod ablation;
mod adam;
mod config;
mod infer;
mod trainer;

pub use ablation::{loss_ablations, weight_sensitivity, Variant, SENSITIVITY_FACTORS};
pub use adam::{Adam, AdamConfig};
pub use config::TrainConfig;
pub use infer::{evaluate, load_generator, mean_sam, pair_metrics, pansharpen, Method};
pub use trainer::{heldout_qnr, json_lines, Batch, EpochLog, IterationLog, LogRecord, TrainSummary, Trainer};
