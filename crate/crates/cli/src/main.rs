//! `smp`: command-line front end for the split-merge pooling engine.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use smp_core::analysis::{count_flops, receptive_field};
use smp_core::net::{forward_eval, forward_parallel, LayerKind, Network};
use smp_core::nn::zero_pad_to_divisible;
use smp_core::smp::Window;
use smp_core::tensor::Shape4;
use smp_core::train::{argmax_labels, train_toy, TrainConfig};
use smp_core::verify::{oracle_equiv, run_suite};
use smp_core::zoo::{build_analysis_net, ArchVariant};
use smp_core::{checkpoint, imgio, metrics, nn};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "smp", about = "Split-merge pooling engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count conv FLOPs for one of the runtime-analysis architectures.
    Flops {
        /// Architecture: maxpool, dilated or split.
        #[arg(long)]
        arch: String,
        /// Input shape as NxCxHxW, e.g. 1x3x256x256.
        #[arg(long)]
        input: String,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Report the layer-by-layer receptive field of a configured net.
    Rf {
        /// Architecture config file (key = value lines).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run randomized verification suites; nonzero exit on any failure.
    Verify {
        /// Suite: roundtrip, gradcheck, oracle, parallel or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full-split oracle equivalence: max abs diff over all locations.
    Equiv {
        /// Number of nested split sites.
        #[arg(long)]
        splits: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Train a toy net; writes metrics.jsonl and model.ckpt to --out.
    Train {
        /// Run config file (architecture + training keys).
        #[arg(long)]
        config: PathBuf,
        /// Step budget, overriding the config.
        #[arg(long)]
        steps: usize,
        /// Run seed, overriding the config.
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a PPM image with a trained checkpoint; writes a PGM
    /// label map.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for split-batch parallel inference.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Compare predicted and truth PGM label maps by per-class IoU.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

fn parse_shape(text: &str) -> Result<Shape4> {
    let parts: Vec<usize> = text
        .split('x')
        .map(|p| p.trim().parse().with_context(|| format!("bad extent '{p}' in '{text}'")))
        .collect::<Result<_>>()?;
    if parts.len() != 4 {
        bail!("input shape must be NxCxHxW, got '{text}'");
    }
    Ok(Shape4::new(parts[0], parts[1], parts[2], parts[3])?)
}

fn variant_name(v: ArchVariant) -> &'static str {
    match v {
        ArchVariant::MaxPoolNet => "maxpool",
        ArchVariant::DilatedNet => "dilated",
        ArchVariant::SplitNet => "split",
        ArchVariant::ToySmp => "toy_smp",
        ArchVariant::ToyBaseline => "toy_baseline",
    }
}

/// Spatial divisor the net needs: 2 per max pool, the window extent per
/// split/shrink site.
fn required_divisor(net: &Network<f32>) -> Window {
    let mut div = Window { w: 1, h: 1 };
    for l in &net.layers {
        match l {
            LayerKind::MaxPool => {
                div.w *= 2;
                div.h *= 2;
            }
            LayerKind::Split(w) | LayerKind::Shrink(w) => {
                div.w *= w.w;
                div.h *= w.h;
            }
            _ => {}
        }
    }
    div
}

fn cmd_flops(arch: &str, input: &str, json: bool) -> Result<()> {
    let variant: ArchVariant = arch.parse()?;
    if !matches!(
        variant,
        ArchVariant::MaxPoolNet | ArchVariant::DilatedNet | ArchVariant::SplitNet
    ) {
        bail!("flops expects one of: maxpool, dilated, split");
    }
    let shape = parse_shape(input)?;
    let net = build_analysis_net(variant, 0);
    let report = count_flops(&net, shape, variant_name(variant))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(())
}

fn cmd_rf(config: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("reading {}", config.display()))?;
    let cfg = TrainConfig::parse(&text)?;
    let net = cfg.arch.build()?;
    let report = receptive_field(&net, variant_name(cfg.arch.variant))?;
    println!("{report}");
    Ok(())
}

fn cmd_verify(suite: &str, seed: u64) -> Result<()> {
    let results = run_suite(suite, seed)?;
    let mut failed = false;
    for r in &results {
        println!("{r}");
        failed |= !r.pass;
    }
    if failed {
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_train(config: &Path, steps: usize, seed: u64, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = TrainConfig::parse(&text)?;
    cfg.steps = steps;
    cfg.arch.seed = seed;
    std::fs::create_dir_all(out)?;
    let outcome = train_toy(&cfg)?;
    std::fs::write(out.join("metrics.jsonl"), outcome.metrics_jsonl())?;
    checkpoint::save(&outcome.net, out.join("model.ckpt"))?;
    println!("{}", outcome.final_report);
    Ok(())
}

fn cmd_infer(model: &Path, image: &Path, out: &Path, workers: usize) -> Result<()> {
    let net = checkpoint::load(model)?;
    let (w, h, rgb) = imgio::read_ppm(image)?;
    let x = imgio::rgb_to_tensor(w, h, &rgb)?;
    let div = required_divisor(&net);
    let (x, _) = zero_pad_to_divisible(&x, div);
    let has_split = net
        .layers
        .iter()
        .any(|l| matches!(l, LayerKind::Split(_)));
    let logits = if workers > 1 && has_split {
        forward_parallel(&net, &x, workers)?
    } else {
        forward_eval(&net, &x)?
    };
    let logits = nn::crop_spatial(&logits, h, w)?;
    let label = argmax_labels(&logits);
    imgio::write_pgm(out, label.w, label.h, &label.data)?;
    Ok(())
}

fn cmd_eval(pred_dir: &Path, truth_dir: &Path) -> Result<()> {
    let mut names: Vec<String> = std::fs::read_dir(pred_dir)
        .with_context(|| format!("reading {}", pred_dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".pgm"))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no .pgm files in {}", pred_dir.display());
    }
    let mut pairs = Vec::new();
    let mut classes = 0usize;
    for name in &names {
        let (pw, ph, pdata) = imgio::read_pgm(&pred_dir.join(name))?;
        let (tw, th, tdata) = imgio::read_pgm(&truth_dir.join(name))
            .with_context(|| format!("truth for {name}"))?;
        for v in pdata.iter().chain(&tdata) {
            if *v != smp_core::data::IGNORE {
                classes = classes.max(*v as usize + 1);
            }
        }
        pairs.push((
            imgio::bytes_to_label(pw, ph, &pdata)?,
            imgio::bytes_to_label(tw, th, &tdata)?,
        ));
    }
    let mut acc = metrics::IouAccumulator::new(classes);
    for (pred, truth) in &pairs {
        acc.add(pred, truth)?;
    }
    println!("{}", acc.report());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Flops { arch, input, json } => cmd_flops(&arch, &input, json),
        Command::Rf { config } => cmd_rf(&config),
        Command::Verify { suite, seed } => cmd_verify(&suite, seed),
        Command::Equiv { splits, seed } => {
            let diff = oracle_equiv(splits, seed)?;
            println!("splits {splits}: oracle max abs diff {diff:.3e}");
            Ok(())
        }
        Command::Train { config, steps, seed, out } => cmd_train(&config, steps, seed, &out),
        Command::Infer { model, image, out, workers } => cmd_infer(&model, &image, &out, workers),
        Command::Eval { pred, truth } => cmd_eval(&pred, &truth),
    }
}
