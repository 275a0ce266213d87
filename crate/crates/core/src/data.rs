//! Scene loading, patch sampling and tiling, and the procedural scene generator.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    degrade_raster, load_raster, save_raster, wald_degrade, FilterSpec, RasterImage, MS_BANDS, RATIO,
};

/// One PAN / LR MS pair, optionally with an HR MS reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePair {
    pub id: String,
    pub pan: RasterImage,
    pub lrms: RasterImage,
    pub reference: Option<RasterImage>,
}

impl ScenePair {
    pub fn new(id: impl Into<String>, pan: RasterImage, lrms: RasterImage, reference: Option<RasterImage>) -> Result<Self> {
        let id = id.into();
        if pan.bands() != 1 || lrms.bands() != MS_BANDS {
            return Err(Error::contract(format!(
                "pair `{id}`: expected 1-band PAN and {MS_BANDS}-band MS, got {} and {}",
                pan.bands(),
                lrms.bands()
            )));
        }
        if pan.width() != RATIO * lrms.width() || pan.height() != RATIO * lrms.height() {
            return Err(Error::contract(format!(
                "pair `{id}`: PAN {}x{} is not {RATIO}x MS {}x{}",
                pan.width(),
                pan.height(),
                lrms.width(),
                lrms.height()
            )));
        }
        if let Some(r) = &reference {
            if r.bands() != MS_BANDS || r.width() != pan.width() || r.height() != pan.height() {
                return Err(Error::contract(format!(
                    "pair `{id}`: reference {}x{}x{} does not match PAN {}x{} with {MS_BANDS} bands",
                    r.width(),
                    r.height(),
                    r.bands(),
                    pan.width(),
                    pan.height()
                )));
            }
        }
        Ok(ScenePair { id, pan, lrms, reference })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMode {
    /// Original-resolution inputs, no ground truth.
    #[default]
    FullScale,
    /// Inputs degraded ×4, original MS kept as reference.
    Wald,
}

impl std::str::FromStr for DatasetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_scale" | "full" => Ok(DatasetMode::FullScale),
            "wald" => Ok(DatasetMode::Wald),
            other => Err(Error::contract(format!("unknown mode `{other}` (full_scale|wald)"))),
        }
    }
}

/// PAN-side patch size; the MS side is a quarter of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSize {
    pub pan: usize,
    pub ms: usize,
}

impl PatchSize {
    pub const TRAIN: PatchSize = PatchSize { pan: 256, ms: 64 };
    pub const TEST: PatchSize = PatchSize { pan: 400, ms: 100 };

    pub fn validate(&self) -> Result<()> {
        if self.ms == 0 || self.pan != RATIO * self.ms {
            return Err(Error::Validation(format!(
                "patch size pan {} / ms {} must satisfy pan = {RATIO}·ms > 0",
                self.pan, self.ms
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Directory holding `manifest.json`.
    pub source_dir: PathBuf,
    #[serde(default)]
    pub mode: DatasetMode,
    pub train_patch: PatchSize,
    pub test_patch: PatchSize,
    pub count: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(source_dir: impl Into<PathBuf>, mode: DatasetMode, count: usize, seed: u64) -> Self {
        DatasetSpec {
            source_dir: source_dir.into(),
            mode,
            train_patch: PatchSize::TRAIN,
            test_patch: PatchSize::TEST,
            count,
            seed,
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// File-level description of a dataset; paths are relative to the manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pairs: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub pan: PathBuf,
    pub ms: PathBuf,
    /// HR MS ground truth (synthetic data only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<PathBuf>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// A source scene as read from disk, before any patching.
#[derive(Clone, Debug)]
pub struct Source {
    pub id: String,
    pub pan: RasterImage,
    pub ms: RasterImage,
}

/// Read every PAN/MS pair listed in `dir/manifest.json`. Reference files are
/// never opened here.
pub fn load_sources(dir: &Path) -> Result<Vec<Source>> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    manifest
        .pairs
        .iter()
        .map(|e| {
            let p = ScenePair::new(e.id.clone(), load_raster(dir.join(&e.pan))?, load_raster(dir.join(&e.ms))?, None)?;
            Ok(Source {
                id: p.id,
                pan: p.pan,
                ms: p.lrms,
            })
        })
        .collect()
}

/// Read the listed pairs as-is, attaching references when `with_reference`.
pub fn load_pairs(dir: &Path, with_reference: bool) -> Result<Vec<ScenePair>> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    manifest
        .pairs
        .iter()
        .map(|e| {
            let reference = match (&e.reference, with_reference) {
                (Some(r), true) => Some(load_raster(dir.join(r))?),
                (None, true) => {
                    return Err(Error::contract(format!("pair `{}` has no reference in the manifest", e.id)))
                }
                (_, false) => None,
            };
            ScenePair::new(e.id.clone(), load_raster(dir.join(&e.pan))?, load_raster(dir.join(&e.ms))?, reference)
        })
        .collect()
}

fn make_pair(id: String, pan: RasterImage, ms: RasterImage, mode: DatasetMode) -> Result<ScenePair> {
    match mode {
        DatasetMode::FullScale => ScenePair::new(id, pan, ms, None),
        DatasetMode::Wald => {
            let (pan_lr, ms_lr) = wald_degrade(&pan, &ms, &FilterSpec::wald_gaussian())?;
            ScenePair::new(id, pan_lr, ms_lr, Some(ms))
        }
    }
}

fn check_fits(src: &Source, size: PatchSize) -> Result<()> {
    size.validate()?;
    if src.ms.width() < size.ms || src.ms.height() < size.ms {
        return Err(Error::contract(format!(
            "source `{}` MS {}x{} is smaller than the {}x{} patch",
            src.id,
            src.ms.width(),
            src.ms.height(),
            size.ms,
            size.ms
        )));
    }
    Ok(())
}

/// Draw `count` random patches (uniform source, uniform MS-aligned position).
pub fn sample_patches(
    sources: &[Source],
    size: PatchSize,
    count: usize,
    mode: DatasetMode,
    seed: u64,
) -> Result<Vec<ScenePair>> {
    if sources.is_empty() {
        return Err(Error::contract("no source scenes to sample from"));
    }
    for s in sources {
        check_fits(s, size)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let src = &sources[rng.gen_range(0..sources.len())];
            let mx = rng.gen_range(0..=src.ms.width() - size.ms);
            let my = rng.gen_range(0..=src.ms.height() - size.ms);
            let ms = src.ms.crop(mx, my, size.ms, size.ms)?;
            let pan = src.pan.crop(RATIO * mx, RATIO * my, size.pan, size.pan)?;
            make_pair(format!("{}_p{i:05}_{mx}_{my}", src.id), pan, ms, mode)
        })
        .collect()
}

/// Non-overlapping row-major tiles of every source; margins are dropped.
pub fn tile_patches(sources: &[Source], size: PatchSize, mode: DatasetMode) -> Result<Vec<ScenePair>> {
    let mut out = Vec::new();
    for src in sources {
        check_fits(src, size)?;
        let (rows, cols) = (src.ms.height() / size.ms, src.ms.width() / size.ms);
        for r in 0..rows {
            for c in 0..cols {
                let (mx, my) = (c * size.ms, r * size.ms);
                let ms = src.ms.crop(mx, my, size.ms, size.ms)?;
                let pan = src.pan.crop(RATIO * mx, RATIO * my, size.pan, size.pan)?;
                out.push(make_pair(format!("{}_t{r}_{c}", src.id), pan, ms, mode)?);
            }
        }
    }
    Ok(out)
}

pub fn sample_training_patches(spec: &DatasetSpec) -> Result<Vec<ScenePair>> {
    sample_patches(&load_sources(&spec.source_dir)?, spec.train_patch, spec.count, spec.mode, spec.seed)
}

pub fn tile_test_patches(spec: &DatasetSpec) -> Result<Vec<ScenePair>> {
    tile_patches(&load_sources(&spec.source_dir)?, spec.test_patch, spec.mode)
}

/// A generated scene; `hr_ms` is the ground truth the LR MS was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub pan: RasterImage,
    pub lrms: RasterImage,
    pub hr_ms: RasterImage,
}

/// Per-band PAN weights of the synthetic sensor.
pub const PAN_WEIGHTS: [f64; MS_BANDS] = [0.25; MS_BANDS];

const MATERIALS: usize = 3;

fn material_map(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut m = vec![0.0; w * h];
    let side = w.min(h) as f64;
    let blob = |m: &mut Vec<f64>, cx: f64, cy: f64, r: f64, amp: f64| {
        // Contributions beyond 4σ are below 4e-4 of the amplitude.
        let span = |c: f64, len: usize| ((c - 4.0 * r).floor().max(0.0) as usize, ((c + 4.0 * r).ceil().max(0.0) as usize).min(len));
        let ((x0, x1), (y0, y1)) = (span(cx, w), span(cy, h));
        for y in y0..y1 {
            for x in x0..x1 {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                m[y * w + x] += amp * (-d2 / (2.0 * r * r)).exp();
            }
        }
    };
    // Large smooth blobs.
    for _ in 0..4 {
        let (cx, cy) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        blob(&mut m, cx, cy, rng.gen_range(side / 12.0..side / 4.0), rng.gen_range(0.3..1.0));
    }
    // Small features below the MS sampling interval.
    for _ in 0..(w * h / 256).max(4) {
        let (cx, cy) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        blob(&mut m, cx, cy, rng.gen_range(0.8..2.5), rng.gen_range(0.2..0.6));
    }
    // One sharp-edged rectangle and one straight edge.
    let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
    let (rw, rh) = (rng.gen_range(w / 8..=w / 2), rng.gen_range(h / 8..=h / 2));
    let amp = rng.gen_range(0.2..0.6);
    for y in y0..(y0 + rh).min(h) {
        for x in x0..(x0 + rw).min(w) {
            m[y * w + x] += amp;
        }
    }
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let offset = rng.gen_range(-0.3..0.3) * side;
    let amp = rng.gen_range(0.1..0.4);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    for y in 0..h {
        for x in 0..w {
            if (x as f64 - cx) * angle.cos() + (y as f64 - cy) * angle.sin() > offset {
                m[y * w + x] += amp;
            }
        }
    }
    m
}

/// Deterministic procedural scene: correlated bands built from a few
/// "materials" with distinct spectra, plus per-band gradients.
pub fn synth_scene(width: usize, height: usize, seed: u64, bit_depth: u16) -> Result<SynthScene> {
    if width == 0 || height == 0 || width % RATIO != 0 || height % RATIO != 0 {
        return Err(Error::contract(format!("synthetic scene {width}x{height} must be non-empty and divisible by {RATIO}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let maps: Vec<Vec<f64>> = (0..MATERIALS).map(|_| material_map(width, height, &mut rng)).collect();
    let spectra: Vec<[f64; MS_BANDS]> = (0..MATERIALS)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.2..1.0)))
        .collect();
    let slopes: Vec<(f64, f64)> = (0..MS_BANDS)
        .map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)))
        .collect();
    let plane = width * height;
    let mut hr = vec![0.0; MS_BANDS * plane];
    for b in 0..MS_BANDS {
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                let mut v = 0.5 + slopes[b].0 * x as f64 / width as f64 + slopes[b].1 * y as f64 / height as f64;
                for (map, spec) in maps.iter().zip(&spectra) {
                    v += map[i] * spec[b];
                }
                hr[b * plane + i] = v;
            }
        }
    }
    let (lo, hi) = hr.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let max = f64::from(crate::imaging::max_value(bit_depth));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let hr_ms = RasterImage::from_values(
        width,
        height,
        MS_BANDS,
        bit_depth,
        hr.iter().map(|v| max * (0.05 + 0.9 * (v - lo) / span)),
    )?;
    let pan = RasterImage::from_values(
        width,
        height,
        1,
        bit_depth,
        (0..plane).map(|i| (0..MS_BANDS).map(|b| PAN_WEIGHTS[b] * f64::from(hr_ms.pixels()[b * plane + i])).sum()),
    )?;
    let lrms = degrade_raster(&hr_ms, &FilterSpec::wald_gaussian())?;
    Ok(SynthScene { pan, lrms, hr_ms })
}

/// Write `count` synthetic scenes plus a manifest into `dir`.
pub fn write_synthetic_dataset(
    dir: &Path,
    count: usize,
    size: usize,
    seed: u64,
    bit_depth: u16,
) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest::default();
    for i in 0..count {
        let id = format!("scene_{i:04}");
        let scene = synth_scene(size, size, seed.wrapping_add(i as u64), bit_depth)?;
        let entry = ManifestEntry {
            pan: PathBuf::from(format!("{id}_pan.msr")),
            ms: PathBuf::from(format!("{id}_ms.msr")),
            reference: Some(PathBuf::from(format!("{id}_hr.msr"))),
            id,
        };
        save_raster(&scene.pan, dir.join(&entry.pan))?;
        save_raster(&scene.lrms, dir.join(&entry.ms))?;
        save_raster(&scene.hr_ms, dir.join(entry.reference.as_ref().unwrap()))?;
        manifest.pairs.push(entry);
    }
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Wald-degrade every pair of `src` into `dst`, keeping the input MS as reference.
pub fn write_wald_dataset(src: &Path, dst: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dst)?;
    let mut manifest = Manifest::default();
    for s in load_sources(src)? {
        let pair = make_pair(s.id.clone(), s.pan, s.ms, DatasetMode::Wald)?;
        let entry = ManifestEntry {
            pan: PathBuf::from(format!("{}_pan.msr", s.id)),
            ms: PathBuf::from(format!("{}_ms.msr", s.id)),
            reference: Some(PathBuf::from(format!("{}_ref.msr", s.id))),
            id: s.id,
        };
        save_raster(&pair.pan, dst.join(&entry.pan))?;
        save_raster(&pair.lrms, dst.join(&entry.ms))?;
        save_raster(pair.reference.as_ref().unwrap(), dst.join(entry.reference.as_ref().unwrap()))?;
        manifest.pairs.push(entry);
    }
    manifest.save(&dst.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled_source(ms_w: usize, ms_h: usize) -> Source {
        // Every MS pixel stores its own column and row; PAN stores the MS cell index.
        let plane = ms_w * ms_h;
        let ms: Vec<u16> = (0..MS_BANDS * plane)
            .map(|i| {
                let p = i % plane;
                if (i / plane) % 2 == 0 {
                    (p % ms_w) as u16
                } else {
                    (p / ms_w) as u16
                }
            })
            .collect();
        let (pw, ph) = (RATIO * ms_w, RATIO * ms_h);
        let pan: Vec<u16> = (0..pw * ph).map(|i| ((i / pw / RATIO) * ms_w + (i % pw) / RATIO) as u16).collect();
        Source {
            id: "grid".into(),
            pan: RasterImage::new(pw, ph, 1, 16, pan).unwrap(),
            ms: RasterImage::new(ms_w, ms_h, MS_BANDS, 16, ms).unwrap(),
        }
    }

    #[test]
    fn tiles_are_row_major_and_drop_margins() {
        let src = labeled_source(9, 5);
        let size = PatchSize { pan: 8, ms: 2 };
        let tiles = tile_patches(&[src], size, DatasetMode::FullScale).unwrap();
        assert_eq!(tiles.len(), (5 / 2) * (9 / 2));
        for (k, t) in tiles.iter().enumerate() {
            let (r, c) = (k / 4, k % 4);
            assert_eq!(t.lrms.get(0, 0, 0) as usize, 2 * c);
            assert_eq!(t.lrms.get(1, 0, 0) as usize, 2 * r);
            assert_eq!(t.pan.get(0, 0, 0) as usize, (2 * r) * 9 + 2 * c);
            assert!(t.reference.is_none());
        }
    }

    #[test]
    fn sampled_pan_window_is_aligned_with_ms_window() {
        let src = labeled_source(12, 12);
        let size = PatchSize { pan: 16, ms: 4 };
        let a = sample_patches(&[src.clone()], size, 20, DatasetMode::FullScale, 5).unwrap();
        let b = sample_patches(&[src], size, 20, DatasetMode::FullScale, 5).unwrap();
        assert_eq!(a, b);
        for p in &a {
            let (mx, my) = (p.lrms.get(0, 0, 0) as usize, p.lrms.get(1, 0, 0) as usize);
            assert_eq!(p.pan.get(0, 0, 0) as usize, my * 12 + mx);
        }
    }

    #[test]
    fn wald_mode_geometry() {
        let scene = synth_scene(512, 512, 3, 11).unwrap();
        let src = Source {
            id: "s".into(),
            pan: scene.pan,
            ms: scene.lrms,
        };
        let p = sample_patches(&[src], PatchSize::TRAIN, 1, DatasetMode::Wald, 1).unwrap();
        let p = &p[0];
        assert_eq!((p.pan.width(), p.lrms.width()), (64, 16));
        assert_eq!(p.reference.as_ref().unwrap().width(), 64);
    }

    #[test]
    fn oversize_patch_is_rejected() {
        let src = labeled_source(3, 3);
        assert!(sample_patches(&[src.clone()], PatchSize { pan: 16, ms: 4 }, 1, DatasetMode::FullScale, 0).is_err());
        assert!(tile_patches(&[src], PatchSize { pan: 8, ms: 3 }, DatasetMode::FullScale).is_err());
    }

    #[test]
    fn synthetic_scene_is_deterministic_and_consistent() {
        let a = synth_scene(64, 32, 7, 11).unwrap();
        assert_eq!(a, synth_scene(64, 32, 7, 11).unwrap());
        assert_ne!(a.hr_ms, synth_scene(64, 32, 8, 11).unwrap().hr_ms);
        assert_eq!((a.lrms.width(), a.lrms.height()), (16, 8));
        let plane = 64 * 32;
        for i in 0..plane {
            let want: f64 = (0..4).map(|b| 0.25 * f64::from(a.hr_ms.pixels()[b * plane + i])).sum();
            assert_eq!(a.pan.pixels()[i], want.round() as u16);
        }
        assert!(synth_scene(30, 32, 0, 11).is_err());
    }

    #[test]
    fn pair_geometry_is_enforced() {
        let pan = RasterImage::filled(16, 16, 1, 11, 0).unwrap();
        let ms = RasterImage::filled(3, 4, 4, 11, 0).unwrap();
        assert!(ScenePair::new("x", pan, ms, None).is_err());
    }
}
