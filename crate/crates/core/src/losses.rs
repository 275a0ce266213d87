//! Generator objective terms and the least-squares discriminator loss.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, high_pass, low_pass, FilterSpec, Scale};
use crate::metrics::qnr_terms;
use crate::net::{Discriminator, Generator};
use crate::tensor::ops::{add, channel_max, channel_mean, l1_mean, mean, rsub_scalar, scale, sq_mean};
use crate::tensor::{Element, Tensor};

/// The four switchable terms of the generator objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    Cyc,
    Adv,
    Rec,
    Nrf,
}

impl LossTerm {
    pub const ALL: [LossTerm; 4] = [LossTerm::Cyc, LossTerm::Adv, LossTerm::Rec, LossTerm::Nrf];

    pub fn as_str(self) -> &'static str {
        match self {
            LossTerm::Cyc => "cyc",
            LossTerm::Adv => "adv",
            LossTerm::Rec => "rec",
            LossTerm::Nrf => "nrf",
        }
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossTerm::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::contract(format!("unknown loss term `{s}` (cyc|adv|rec|nrf)")))
    }
}

/// Channel reduction applied to the fused high-pass before comparing with PAN.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Max,
    Avg,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Pooling::Max),
            "avg" => Ok(Pooling::Avg),
            other => Err(Error::contract(format!("unknown pooling `{other}` (max|avg)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub cyc: f64,
    pub adv: f64,
    pub rec: f64,
    pub nrf: f64,
    pub use_cyc: bool,
    pub use_adv: bool,
    pub use_rec: bool,
    pub use_nrf: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            cyc: 1e-3,
            adv: 1e-3,
            rec: 5e-4,
            nrf: 1.0,
            use_cyc: true,
            use_adv: true,
            use_rec: true,
            use_nrf: true,
        }
    }
}

impl LossWeights {
    pub fn weight(&self, term: LossTerm) -> f64 {
        match term {
            LossTerm::Cyc => self.cyc,
            LossTerm::Adv => self.adv,
            LossTerm::Rec => self.rec,
            LossTerm::Nrf => self.nrf,
        }
    }

    pub fn enabled(&self, term: LossTerm) -> bool {
        match term {
            LossTerm::Cyc => self.use_cyc,
            LossTerm::Adv => self.use_adv,
            LossTerm::Rec => self.use_rec,
            LossTerm::Nrf => self.use_nrf,
        }
    }

    pub fn set_enabled(&mut self, term: LossTerm, on: bool) {
        match term {
            LossTerm::Cyc => self.use_cyc = on,
            LossTerm::Adv => self.use_adv = on,
            LossTerm::Rec => self.use_rec = on,
            LossTerm::Nrf => self.use_nrf = on,
        }
    }

    /// Only `term` enabled, default weights.
    pub fn only(term: LossTerm) -> Self {
        let mut w = LossWeights::default();
        for t in LossTerm::ALL {
            w.set_enabled(t, t == term);
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        for t in LossTerm::ALL {
            let w = self.weight(t);
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!("loss weight for {t} must be finite and >= 0, got {w}")));
            }
        }
        if !LossTerm::ALL.iter().any(|&t| self.enabled(t)) {
            return Err(Error::contract("every loss term is disabled"));
        }
        Ok(())
    }

    /// Whether the second generator pass (on the degraded first output) is needed.
    pub fn needs_second_pass(&self) -> bool {
        self.use_cyc || self.use_adv
    }
}

/// Ranges of the randomised least-squares targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftLabelConfig {
    pub real: (f64, f64),
    pub fake: (f64, f64),
}

impl Default for SoftLabelConfig {
    fn default() -> Self {
        SoftLabelConfig {
            real: (0.7, 1.2),
            fake: (0.0, 0.3),
        }
    }
}

impl SoftLabelConfig {
    /// Draw `(real, fake)` targets.
    pub fn draw(&self, rng: &mut impl Rng) -> (f64, f64) {
        let pick = |rng: &mut _, (lo, hi): (f64, f64)| if hi > lo { Rng::gen_range(rng, lo..hi) } else { lo };
        let a = pick(rng, self.real);
        let b = pick(rng, self.fake);
        (a, b)
    }
}

/// Fixed ×1/4 bicubic used wherever a fused image is taken back to MS scale.
pub fn down4<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    bicubic_resize(x, Scale::DOWN4)
}

/// First and second generator outputs, graph attached.
#[derive(Clone, Debug)]
pub struct CyclePass<T: Element> {
    pub fused: Tensor<T>,
    pub degraded: Tensor<T>,
    pub refused: Tensor<T>,
}

impl<T: Element> CyclePass<T> {
    pub fn run(g: &Generator<T>, pan: &Tensor<T>, lrms: &Tensor<T>) -> Result<Self> {
        let fused = g.forward(pan, lrms)?;
        let degraded = down4(&fused)?;
        let refused = g.forward(pan, &degraded)?;
        Ok(CyclePass { fused, degraded, refused })
    }
}

/// `l1(F₁, F₂)`.
pub fn cycle_term<T: Element>(pass: &CyclePass<T>) -> Result<Tensor<T>> {
    l1_mean(&pass.fused, &pass.refused)
}

/// `mean((D(pan, ↓F₁, F₂) − 1)²)`.
pub fn adv_g_term<T: Element>(d: &Discriminator<T>, pan: &Tensor<T>, pass: &CyclePass<T>) -> Result<Tensor<T>> {
    Ok(sq_mean(&d.forward(pan, &pass.degraded, &pass.refused)?, T::one()))
}

/// Discriminator loss with explicit targets; generator outputs are detached.
pub fn adv_d_term<T: Element>(
    d: &Discriminator<T>,
    pan: &Tensor<T>,
    lrms: &Tensor<T>,
    pass: &CyclePass<T>,
    targets: (f64, f64),
) -> Result<Tensor<T>> {
    let real = d.forward(pan, lrms, &pass.fused.detach())?;
    let fake = d.forward(pan, &pass.degraded.detach(), &pass.refused.detach())?;
    add(&sq_mean(&real, T::lit(targets.0)), &sq_mean(&fake, T::lit(targets.1)))
}

pub fn cycle_loss<T: Element>(g: &Generator<T>, pan: &Tensor<T>, lrms: &Tensor<T>) -> Result<Tensor<T>> {
    cycle_term(&CyclePass::run(g, pan, lrms)?)
}

pub fn adv_loss_g<T: Element>(
    d: &Discriminator<T>,
    g: &Generator<T>,
    pan: &Tensor<T>,
    lrms: &Tensor<T>,
) -> Result<Tensor<T>> {
    adv_g_term(d, pan, &CyclePass::run(g, pan, lrms)?)
}

pub fn adv_loss_d<T: Element>(
    d: &Discriminator<T>,
    g: &Generator<T>,
    pan: &Tensor<T>,
    lrms: &Tensor<T>,
    labels: &SoftLabelConfig,
    rng: &mut impl Rng,
) -> Result<Tensor<T>> {
    let pass = CyclePass::run(g, pan, lrms)?;
    adv_d_term(d, pan, lrms, &pass, labels.draw(rng))
}

/// `l1(hp(pan), pool_c(hp(fused)))` with the single-band PAN on the left.
pub fn spatial_loss<T: Element>(pan: &Tensor<T>, fused: &Tensor<T>, filter: &FilterSpec, pool: Pooling) -> Result<Tensor<T>> {
    let detail = high_pass(fused, filter)?;
    let pooled = match pool {
        Pooling::Max => channel_max(&detail),
        Pooling::Avg => channel_mean(&detail),
    };
    l1_mean(&high_pass(pan, filter)?, &pooled)
}

/// `l1(lp(lrms), lp(↓fused))`.
pub fn spectral_loss<T: Element>(lrms: &Tensor<T>, fused: &Tensor<T>, filter: &FilterSpec) -> Result<Tensor<T>> {
    l1_mean(&low_pass(lrms, filter)?, &low_pass(&down4(fused)?, filter)?)
}

/// `1 − mean QNR` through the differentiable metric path.
pub fn nrf_loss<T: Element>(
    pan: &Tensor<T>,
    lrms: &Tensor<T>,
    fused: &Tensor<T>,
    pan_lr: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    Ok(rsub_scalar(T::one(), &mean(&qnr_terms(fused, lrms, pan, pan_lr)?.qnr)))
}

/// Unweighted generator terms; `None` where a term was not evaluated.
#[derive(Clone, Debug, Default)]
pub struct Components<T: Element> {
    pub cyc: Option<Tensor<T>>,
    pub adv: Option<Tensor<T>>,
    pub spatial: Option<Tensor<T>>,
    pub spectral: Option<Tensor<T>>,
    pub nrf: Option<Tensor<T>>,
}

impl<T: Element> Components<T> {
    /// Spatial + spectral.
    pub fn rec(&self) -> Result<Option<Tensor<T>>> {
        match (&self.spatial, &self.spectral) {
            (Some(a), Some(b)) => Ok(Some(add(a, b)?)),
            (None, None) => Ok(None),
            _ => Err(Error::contract("reconstruction needs both spatial and spectral parts")),
        }
    }

    pub fn term(&self, term: LossTerm) -> Result<Option<Tensor<T>>> {
        Ok(match term {
            LossTerm::Cyc => self.cyc.clone(),
            LossTerm::Adv => self.adv.clone(),
            LossTerm::Rec => self.rec()?,
            LossTerm::Nrf => self.nrf.clone(),
        })
    }
}

/// `Σ λ·term` over enabled terms. Disabled terms contribute nothing, not
/// even a zero-weighted graph edge.
pub fn total_g_loss<T: Element>(weights: &LossWeights, components: &Components<T>) -> Result<Tensor<T>> {
    weights.validate()?;
    let mut total: Option<Tensor<T>> = None;
    for t in LossTerm::ALL.into_iter().filter(|&t| weights.enabled(t)) {
        let value = components
            .term(t)?
            .ok_or_else(|| Error::contract(format!("loss term {t} is enabled but was not computed")))?;
        let weighted = scale(&value, T::lit(weights.weight(t)));
        total = Some(match total {
            Some(acc) => add(&acc, &weighted)?,
            None => weighted,
        });
    }
    Ok(total.expect("validate guarantees one enabled term"))
}

/// Generator outputs for one batch.
#[derive(Clone, Debug)]
pub struct Forward<T: Element> {
    pub fused: Tensor<T>,
    /// Present when the cycle or adversarial term needs the second pass.
    pub pass: Option<CyclePass<T>>,
}

impl<T: Element> Forward<T> {
    pub fn run(g: &Generator<T>, pan: &Tensor<T>, lrms: &Tensor<T>, weights: &LossWeights) -> Result<Self> {
        if weights.needs_second_pass() {
            let pass = CyclePass::run(g, pan, lrms)?;
            Ok(Forward {
                fused: pass.fused.clone(),
                pass: Some(pass),
            })
        } else {
            Ok(Forward {
                fused: g.forward(pan, lrms)?,
                pass: None,
            })
        }
    }
}

/// Weighted objective and its unweighted parts.
pub struct GeneratorObjective<T: Element> {
    pub components: Components<T>,
    pub total: Tensor<T>,
}

/// Evaluate the enabled terms on an existing forward pass.
#[allow(clippy::too_many_arguments)]
pub fn objective_from<T: Element>(
    forward: &Forward<T>,
    d: &Discriminator<T>,
    pan: &Tensor<T>,
    lrms: &Tensor<T>,
    pan_lr: Option<&Tensor<T>>,
    weights: &LossWeights,
    filter: &FilterSpec,
    pool: Pooling,
) -> Result<GeneratorObjective<T>> {
    weights.validate()?;
    let mut c = Components::default();
    if weights.needs_second_pass() {
        let pass = forward
            .pass
            .as_ref()
            .ok_or_else(|| Error::contract("cycle/adversarial terms need the second generator pass"))?;
        if weights.use_cyc {
            c.cyc = Some(cycle_term(pass)?);
        }
        if weights.use_adv {
            c.adv = Some(adv_g_term(d, pan, pass)?);
        }
    }
    if weights.use_rec {
        c.spatial = Some(spatial_loss(pan, &forward.fused, filter, pool)?);
        c.spectral = Some(spectral_loss(lrms, &forward.fused, filter)?);
    }
    if weights.use_nrf {
        c.nrf = Some(nrf_loss(pan, lrms, &forward.fused, pan_lr)?);
    }
    let total = total_g_loss(weights, &c)?;
    Ok(GeneratorObjective { components: c, total })
}

/// Forward pass plus objective in one call.
pub fn generator_objective<T: Element>(
    g: &Generator<T>,
    d: &Discriminator<T>,
    pan: &Tensor<T>,
    lrms: &Tensor<T>,
    pan_lr: Option<&Tensor<T>>,
    weights: &LossWeights,
    pool: Pooling,
) -> Result<(Forward<T>, GeneratorObjective<T>)> {
    weights.validate()?;
    let forward = Forward::run(g, pan, lrms, weights)?;
    let objective = objective_from(&forward, d, pan, lrms, pan_lr, weights, &g.filter, pool)?;
    Ok((forward, objective))
}
