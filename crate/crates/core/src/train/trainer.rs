use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::TrainConfig;
use crate::data::ScenePair;
use crate::error::{Error, Result};
use crate::imaging::RasterImage;
use crate::losses::{adv_d_term, objective_from, Forward};
use crate::metrics::{default_pan_lr, qnr};
use crate::net::{checkpoint, Discriminator, Generator, Module};
use crate::tensor::{Element, Shape, Tensor};

/// Inputs of one step, in raw DN at the rasters' native bit depth.
#[derive(Clone, Debug)]
pub struct Batch<T: Element> {
    pub pan: Tensor<T>,
    pub lrms: Tensor<T>,
    pub pan_lr: Tensor<T>,
}

fn stack<T: Element>(images: &[&RasterImage]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| Error::contract("empty batch"))?;
    let shape = Shape::new(images.len(), first.bands(), first.height(), first.width());
    let mut data = Vec::with_capacity(shape.numel());
    for img in images {
        if (img.bands(), img.height(), img.width()) != (first.bands(), first.height(), first.width()) {
            return Err(Error::contract("batch members differ in size"));
        }
        data.extend_from_slice(img.to_tensor::<T>().data());
    }
    Tensor::from_vec(shape, data)
}

impl<T: Element> Batch<T> {
    pub fn from_pairs(pairs: &[&ScenePair]) -> Result<Self> {
        let pan = stack(&pairs.iter().map(|p| &p.pan).collect::<Vec<_>>())?;
        let lrms = stack(&pairs.iter().map(|p| &p.lrms).collect::<Vec<_>>())?;
        let pan_lr = default_pan_lr(&pan)?;
        Ok(Batch { pan, lrms, pan_lr })
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Iteration(IterationLog),
    Epoch(EpochLog),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub epoch: usize,
    pub cyc: Option<f64>,
    pub adv: Option<f64>,
    pub spatial: Option<f64>,
    pub spectral: Option<f64>,
    pub rec: Option<f64>,
    pub nrf: Option<f64>,
    pub total_g: f64,
    pub d_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub iter: usize,
    pub heldout_qnr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub iterations: usize,
    pub initial_qnr: f64,
    pub final_qnr: f64,
}

fn finite<T: Element>(term: &str, t: &Tensor<T>, iteration: usize) -> Result<f64> {
    let v = t.item().as_f64();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            term: term.to_string(),
            iteration,
        })
    }
}

fn finite_opt<T: Element>(term: &str, t: &Option<Tensor<T>>, iteration: usize) -> Result<Option<f64>> {
    t.as_ref().map(|t| finite(term, t, iteration)).transpose()
}

/// RNG streams, so that e.g. disabling the adversarial term does not shift
/// the batch order.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_LABELS: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Owns both networks, their optimizers and the random streams.
pub struct Trainer {
    pub config: TrainConfig,
    pub g: Generator<f32>,
    pub d: Discriminator<f32>,
    opt_g: Adam<f32>,
    opt_d: Adam<f32>,
    shuffle_rng: ChaCha8Rng,
    label_rng: ChaCha8Rng,
    pub iteration: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut init = stream(config.seed, STREAM_INIT);
        let g = Generator::new(config.block_kind, &mut init);
        let d = Discriminator::new(&mut init);
        let opt_g = Adam::new(config.adam(), &g.parameters());
        let opt_d = Adam::new(config.adam(), &d.parameters());
        Ok(Trainer {
            shuffle_rng: stream(config.seed, STREAM_SHUFFLE),
            label_rng: stream(config.seed, STREAM_LABELS),
            config,
            g,
            d,
            opt_g,
            opt_d,
            iteration: 0,
        })
    }

    /// One discriminator update (when the adversarial term is on) followed by
    /// one generator update, both on the same generator forward pass.
    pub fn step(&mut self, batch: &Batch<f32>, epoch: usize) -> Result<IterationLog> {
        let it = self.iteration;
        let weights = self.config.loss_weights;
        let forward = Forward::run(&self.g, &batch.pan, &batch.lrms, &weights)?;

        let mut d_loss = None;
        if weights.use_adv {
            let pass = forward.pass.as_ref().expect("adversarial term runs the second pass");
            let targets = self.config.soft_labels.draw(&mut self.label_rng);
            let loss = adv_d_term(&self.d, &batch.pan, &batch.lrms, pass, targets)?;
            d_loss = Some(finite("d_loss", &loss, it)?);
            self.d.zero_grad();
            loss.backward()?;
            self.opt_d.step(self.d.parameters_mut())?;
        }

        let obj = objective_from(
            &forward,
            &self.d,
            &batch.pan,
            &batch.lrms,
            Some(&batch.pan_lr),
            &weights,
            &self.g.filter,
            self.config.pooling,
        )?;
        let c = &obj.components;
        let log = IterationLog {
            iter: it,
            epoch,
            cyc: finite_opt("cyc", &c.cyc, it)?,
            adv: finite_opt("adv", &c.adv, it)?,
            spatial: finite_opt("spatial", &c.spatial, it)?,
            spectral: finite_opt("spectral", &c.spectral, it)?,
            rec: match (&c.spatial, &c.spectral) {
                (Some(a), Some(b)) => Some(finite("rec", a, it)? + finite("rec", b, it)?),
                _ => None,
            },
            nrf: finite_opt("nrf", &c.nrf, it)?,
            total_g: finite("total_g", &obj.total, it)?,
            d_loss,
        };
        self.g.zero_grad();
        obj.total.backward()?;
        self.opt_g.step(self.g.parameters_mut())?;
        // Generator backward also reached the discriminator's leaves; that
        // gradient is not meant for the discriminator.
        self.d.zero_grad();
        self.iteration += 1;
        Ok(log)
    }

    /// Mean QNR of the current generator over `pairs`.
    pub fn heldout_qnr(&self, pairs: &[ScenePair]) -> Result<f64> {
        heldout_qnr(&self.g, pairs, self.config.batch_size)
    }

    pub fn save(&self, dir: &Path, tag: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("generator{tag}.ckpt"));
        checkpoint::save(&self.g, &path)?;
        checkpoint::save(&self.d, &dir.join(format!("discriminator{tag}.ckpt")))?;
        Ok(path)
    }

    /// Train on `train`, evaluating QNR on `heldout` before the first step and
    /// at every epoch end. Every log record is passed to `sink`.
    pub fn fit(
        &mut self,
        train: &[ScenePair],
        heldout: &[ScenePair],
        checkpoint_dir: Option<&Path>,
        sink: &mut dyn FnMut(&LogRecord) -> Result<()>,
    ) -> Result<TrainSummary> {
        if train.is_empty() {
            return Err(Error::contract("training set is empty"));
        }
        if let Some(p) = train.iter().find(|p| p.reference.is_some()) {
            return Err(Error::contract(format!("training pair `{}` carries a reference image", p.id)));
        }
        let per_epoch = train.len().div_ceil(self.config.batch_size);
        let total = self.config.iterations.unwrap_or(self.config.epochs * per_epoch);
        let initial_qnr = self.heldout_qnr(heldout)?;
        sink(&LogRecord::Epoch(EpochLog {
            epoch: 0,
            iter: 0,
            heldout_qnr: initial_qnr,
        }))?;
        let mut final_qnr = initial_qnr;
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut epoch = 0;
        while self.iteration < total {
            epoch += 1;
            order.shuffle(&mut self.shuffle_rng);
            for chunk in order.chunks(self.config.batch_size) {
                if self.iteration >= total {
                    break;
                }
                let members: Vec<&ScenePair> = chunk.iter().map(|&i| &train[i]).collect();
                let batch = Batch::from_pairs(&members)?;
                let log = self.step(&batch, epoch)?;
                sink(&LogRecord::Iteration(log))?;
                if let Some(dir) = checkpoint_dir {
                    let every = self.config.checkpoint_every;
                    if every > 0 && self.iteration % every == 0 && self.iteration < total {
                        self.save(dir, &format!("_iter{:06}", self.iteration))?;
                    }
                }
            }
            final_qnr = self.heldout_qnr(heldout)?;
            sink(&LogRecord::Epoch(EpochLog {
                epoch,
                iter: self.iteration,
                heldout_qnr: final_qnr,
            }))?;
        }
        if let Some(dir) = checkpoint_dir {
            self.save(dir, "")?;
        }
        Ok(TrainSummary {
            iterations: self.iteration,
            initial_qnr,
            final_qnr,
        })
    }
}

/// Mean QNR of `g` on `pairs`, evaluated in chunks of `chunk` pairs.
pub fn heldout_qnr(g: &Generator<f32>, pairs: &[ScenePair], chunk: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::contract("held-out set is empty"));
    }
    let mut total = 0.0;
    for group in pairs.chunks(chunk.max(1)) {
        let members: Vec<&ScenePair> = group.iter().collect();
        let batch = Batch::<f32>::from_pairs(&members)?;
        let fused = g.forward(&batch.pan, &batch.lrms)?.detach().cast::<f64>();
        let q = qnr(&fused, &batch.lrms.cast(), &batch.pan.cast(), Some(&batch.pan_lr.cast()))?;
        total += q.qnr * group.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Sink writing one JSON object per line.
pub fn json_lines<W: Write>(mut out: W) -> impl FnMut(&LogRecord) -> Result<()> {
    move |r| {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}
