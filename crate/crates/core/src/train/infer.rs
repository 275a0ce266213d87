use std::path::Path;

use rayon::prelude::*;

use crate::baselines::{fuse_baseline, upsample_ms, BaselineKind};
use crate::data::{DatasetMode, ScenePair};
use crate::error::{Error, Result};
use crate::imaging::{max_value, RasterImage};
use crate::metrics::{ergas, qnr, sam, ssim, MetricReport, PairMetrics, ERGAS_RATIO};
use crate::net::{checkpoint, generator_from_entries, Generator};
use crate::tensor::Tensor;

pub fn load_generator(path: &Path) -> Result<Generator<f32>> {
    generator_from_entries(&checkpoint::load_entries(path)?)
}

/// Fuse one pair. The network runs in f64 on raw DN and its residual is added
/// to the bicubic upsample of the MS, so a network with a zero residual
/// reproduces the rounded bicubic image exactly.
pub fn pansharpen(g: &Generator<f32>, pan: &RasterImage, lrms: &RasterImage) -> Result<RasterImage> {
    let g64 = g.cast::<f64>();
    let (_, residual) = g64.forward_split(&pan.to_tensor(), &lrms.to_tensor())?;
    let up = upsample_ms(lrms)?;
    let data = up.data().iter().zip(residual.data()).map(|(u, r)| u + r).collect();
    RasterImage::from_tensor(&Tensor::from_vec(up.shape(), data)?, lrms.bit_depth())
}

/// What produces the fused image under evaluation.
pub enum Method {
    Generator(Box<Generator<f32>>),
    Baseline(BaselineKind),
    /// Plain ×4 bicubic upsample of the MS.
    Bicubic,
    /// The reference itself (wald mode only); a sanity row for the metrics.
    Reference,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Generator(_) => "generator".into(),
            Method::Baseline(k) => k.as_str().into(),
            Method::Bicubic => "bicubic".into(),
            Method::Reference => "reference".into(),
        }
    }

    /// Fused raster and the number of guarded pixels (ratio baselines only).
    pub fn fuse(&self, pair: &ScenePair) -> Result<(RasterImage, usize)> {
        match self {
            Method::Generator(g) => Ok((pansharpen(g, &pair.pan, &pair.lrms)?, 0)),
            Method::Baseline(k) => {
                let out = fuse_baseline(*k, &pair.pan, &pair.lrms)?;
                Ok((out.image, out.guarded_pixels))
            }
            Method::Bicubic => Ok((RasterImage::from_tensor(&upsample_ms(&pair.lrms)?, pair.lrms.bit_depth())?, 0)),
            Method::Reference => pair
                .reference
                .clone()
                .map(|r| (r, 0))
                .ok_or_else(|| Error::contract(format!("pair `{}` has no reference", pair.id))),
        }
    }
}

fn as_f64(img: &RasterImage) -> Tensor<f64> {
    img.to_tensor::<f64>()
}

/// All applicable metrics of one fused image.
pub fn pair_metrics(pair: &ScenePair, fused: &RasterImage, mode: DatasetMode) -> Result<PairMetrics> {
    let f = as_f64(fused);
    let q = qnr(&f, &as_f64(&pair.lrms), &as_f64(&pair.pan), None)?;
    let mut m = PairMetrics {
        id: pair.id.clone(),
        d_lambda: q.d_lambda,
        d_s: q.d_s,
        qnr: q.qnr,
        sam_deg: None,
        ergas: None,
        ssim: None,
    };
    if mode == DatasetMode::Wald {
        let r = pair
            .reference
            .as_ref()
            .ok_or_else(|| Error::contract(format!("wald evaluation needs a reference for `{}`", pair.id)))?;
        let rt = as_f64(r);
        m.sam_deg = Some(sam(&rt, &f)?);
        m.ergas = Some(ergas(&rt, &f, ERGAS_RATIO)?);
        m.ssim = Some(ssim(&rt, &f, f64::from(max_value(r.bit_depth())))?);
    }
    Ok(m)
}

pub fn evaluate(method: &Method, pairs: &[ScenePair], mode: DatasetMode) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::contract("nothing to evaluate"));
    }
    let fused: Vec<(RasterImage, usize)> = pairs.iter().map(|p| method.fuse(p)).collect::<Result<_>>()?;
    let rows: Vec<PairMetrics> = pairs
        .par_iter()
        .zip(&fused)
        .map(|(p, (img, _))| pair_metrics(p, img, mode))
        .collect::<Result<_>>()?;
    let mode_name = match mode {
        DatasetMode::FullScale => "full_scale",
        DatasetMode::Wald => "wald",
    };
    let mut report = MetricReport::new(method.name(), mode_name, rows);
    let guarded: usize = fused.iter().map(|(_, g)| g).sum();
    if guarded > 0 {
        report
            .notes
            .push(format!("{guarded} pixels fell back to the upsampled MS (divisor below 1)"));
    }
    Ok(report)
}

/// Hidden-reference SAM of a method over pairs that carry references.
pub fn mean_sam(method: &Method, pairs: &[ScenePair]) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        let r = p
            .reference
            .as_ref()
            .ok_or_else(|| Error::contract(format!("pair `{}` has no reference", p.id)))?;
        total += sam(&as_f64(r), &as_f64(&method.fuse(p)?.0))?;
    }
    Ok(total / pairs.len() as f64)
}
