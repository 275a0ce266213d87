use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use ucgan::baselines::{fuse_baseline, BaselineKind};
use ucgan::data::{
    load_pairs, load_sources, sample_patches, write_synthetic_dataset, write_wald_dataset, DatasetMode, PatchSize,
    ScenePair,
};
use ucgan::imaging::{export_rgb_png, load_raster, save_raster, RasterImage, Stretch};
use ucgan::losses::{LossTerm, Pooling};
use ucgan::net::BlockKind;
use ucgan::train::{
    evaluate, json_lines, load_generator, loss_ablations, pansharpen, weight_sensitivity, Method, TrainConfig, Trainer,
};
use ucgan::{gradcheck, Error, Result};

#[derive(Parser)]
#[command(name = "ucgan", version, about = "Unsupervised GAN pan-sharpening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with hidden high-resolution references.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
        /// PAN side in pixels (multiple of 4).
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 11)]
        bit_depth: u16,
    },
    /// Degrade a dataset ×4, keeping the input MS as the reference.
    Wald {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Train(TrainArgs),
    /// Write the loss ablations and the weight sensitivity grid as configs for `train --config`.
    Configs {
        #[arg(long)]
        out: PathBuf,
        /// Base config the variants start from.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Fuse one PAN/MS pair with a trained generator.
    Pansharpen {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        pan: PathBuf,
        #[arg(long)]
        ms: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a percentile-stretched RGB preview.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Fuse one PAN/MS pair with a classical method.
    Baseline {
        #[arg(long, value_parser = parse_with::<BaselineKind>)]
        method: BaselineKind,
        #[arg(long)]
        pan: PathBuf,
        #[arg(long)]
        ms: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Score a method on every pair of a dataset and print a JSON report.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "full_scale", value_parser = parse_with::<DatasetMode>)]
        mode: DatasetMode,
        /// generator | bicubic | reference | ihs | brovey | hpf | sfim
        #[arg(long, default_value = "generator")]
        method: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every primitive and loss term.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the results as JSON.
        #[arg(long)]
        json: bool,
    },
}

/// Train on a full-scale dataset directory.
#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (manifest.json); references are never read.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoints, the log and the resolved config.
    #[arg(long)]
    out: PathBuf,
    /// JSON config mirroring the training options; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Held-out dataset; by default the last `--heldout-count` scenes are held out.
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    heldout_count: usize,
    /// Train on this many random patches of `--patch-size` instead of whole scenes.
    #[arg(long)]
    patches: Option<usize>,
    /// PAN-side patch size used with `--patches`.
    #[arg(long, default_value_t = PatchSize::TRAIN.pan)]
    patch_size: usize,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// May be repeated.
    #[arg(long, value_parser = parse_with::<LossTerm>)]
    disable_loss: Vec<LossTerm>,
    #[arg(long, value_parser = parse_with::<BlockKind>)]
    block: Option<BlockKind>,
    #[arg(long, value_parser = parse_with::<Pooling>)]
    pool: Option<Pooling>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl TrainArgs {
    fn resolve_config(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = Some(v);
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        for &t in &self.disable_loss {
            cfg.disable(t);
        }
        if let Some(v) = self.block {
            cfg.block_kind = v;
        }
        if let Some(v) = self.pool {
            cfg.pooling = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.checkpoint_every {
            cfg.checkpoint_every = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn datasets(&self, seed: u64) -> Result<(Vec<ScenePair>, Vec<ScenePair>)> {
        let (train, heldout) = match &self.heldout {
            Some(dir) => (load_pairs(&self.data, false)?, load_pairs(dir, false)?),
            None => {
                let mut all = load_pairs(&self.data, false)?;
                if all.len() <= self.heldout_count {
                    return Err(Error::Contract(format!(
                        "{} scenes cannot spare {} for held-out evaluation",
                        all.len(),
                        self.heldout_count
                    )));
                }
                let heldout = all.split_off(all.len() - self.heldout_count);
                (all, heldout)
            }
        };
        let train = match self.patches {
            None => train,
            Some(count) => {
                let ids: std::collections::HashSet<_> = train.iter().map(|p| p.id.clone()).collect();
                let sources: Vec<_> = load_sources(&self.data)?.into_iter().filter(|s| ids.contains(&s.id)).collect();
                let size = PatchSize {
                    pan: self.patch_size,
                    ms: self.patch_size / 4,
                };
                sample_patches(&sources, size, count, DatasetMode::FullScale, seed)?
            }
        };
        Ok((train, heldout))
    }
}

fn write_fused(img: &RasterImage, out: &Path, png: Option<&Path>) -> Result<()> {
    save_raster(img, out)?;
    if let Some(p) = png {
        export_rgb_png(img, p, Stretch::default())?;
    }
    Ok(())
}

fn method_named(name: &str, checkpoint: Option<&Path>) -> Result<Method> {
    Ok(match name {
        "generator" => {
            let path = checkpoint.ok_or_else(|| Error::Contract("--checkpoint is required for the generator".into()))?;
            Method::Generator(Box::new(load_generator(path)?))
        }
        "bicubic" => Method::Bicubic,
        "reference" => Method::Reference,
        other => Method::Baseline(other.parse()?),
    })
}

fn train(args: &TrainArgs) -> Result<()> {
    let cfg = args.resolve_config()?;
    let (train, heldout) = args.datasets(cfg.seed)?;
    std::fs::create_dir_all(&args.out)?;
    serde_json::to_writer_pretty(File::create(args.out.join("config.json"))?, &cfg)?;
    info!("training on {} pairs, {} held out", train.len(), heldout.len());
    let mut trainer = Trainer::new(cfg)?;
    let mut sink = json_lines(BufWriter::new(File::create(args.out.join("train_log.jsonl"))?));
    let summary = trainer.fit(&train, &heldout, Some(&args.out), &mut |r| {
        if let ucgan::train::LogRecord::Epoch(e) = r {
            info!("epoch {} (iteration {}): held-out QNR {:.5}", e.epoch, e.iter, e.heldout_qnr);
        }
        sink(r)
    })?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            count,
            size,
            seed,
            bit_depth,
        } => {
            let m = write_synthetic_dataset(&out, count, size, seed, bit_depth)?;
            info!("wrote {} scenes to {}", m.pairs.len(), out.display());
        }
        Command::Wald { input, out } => {
            let m = write_wald_dataset(&input, &out)?;
            info!("wrote {} degraded pairs to {}", m.pairs.len(), out.display());
        }
        Command::Train(args) => train(&args)?,
        Command::Configs { out, base } => {
            let base = match base {
                Some(p) => TrainConfig::load(&p)?,
                None => TrainConfig::default(),
            };
            std::fs::create_dir_all(&out)?;
            let variants = loss_ablations(&base).into_iter().chain(weight_sensitivity(&base));
            for v in variants {
                let path = out.join(format!("{}.json", v.name));
                serde_json::to_writer_pretty(File::create(&path)?, &v.config)?;
                println!("{}", path.display());
            }
        }
        Command::Pansharpen {
            checkpoint,
            pan,
            ms,
            out,
            png,
        } => {
            let g = load_generator(&checkpoint)?;
            let fused = pansharpen(&g, &load_raster(&pan)?, &load_raster(&ms)?)?;
            write_fused(&fused, &out, png.as_deref())?;
        }
        Command::Baseline {
            method,
            pan,
            ms,
            out,
            png,
        } => {
            let fused = fuse_baseline(method, &load_raster(&pan)?, &load_raster(&ms)?)?;
            if fused.guarded_pixels > 0 {
                info!("{} pixels fell back to the upsampled MS", fused.guarded_pixels);
            }
            write_fused(&fused.image, &out, png.as_deref())?;
        }
        Command::Eval {
            data,
            mode,
            method,
            checkpoint,
            out,
        } => {
            let method = method_named(&method, checkpoint.as_deref())?;
            let pairs = load_pairs(&data, mode == DatasetMode::Wald)?;
            let report = evaluate(&method, &pairs, mode)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
        }
        Command::Gradcheck { seed, json } => {
            let checks = gradcheck::run_suite(seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&checks)?);
            } else {
                for c in &checks {
                    let verdict = if c.passed() { "PASS" } else { "FAIL" };
                    println!("{verdict} {:<34} rel {:.2e} (tol {:.0e}, {} coords)", c.name, c.rel_error, c.tolerance, c.coords);
                }
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            if failed > 0 {
                return Err(Error::Validation(format!("{failed} gradient checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
