//! Desk-scale training harness for the toy segmentation nets on the
//! synthetic dataset. Every run is a pure function of its seed: data,
//! augmentation, sample locations and initialization all derive from it.

use crate::data::{augment, gen_synthetic, LabelMap, SynthConfig, IGNORE};
use crate::error::{Result, SmpError};
use crate::metrics::{IouAccumulator, MetricReport};
use crate::net::{
    adam_step, backward, forward_eval, forward_train, AdamConfig, AdamState, LocSource, Network,
};
use crate::nn::{softmax_xent_bwd, softmax_xent_fwd};
use crate::smp::{sample_location, SampleLoc};
use crate::tensor::Tensor;
use crate::zoo::ArchConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Full run configuration: architecture plus optimizer, data and
/// schedule settings, readable from the same `key = value` file format.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    pub lr: f32,
    pub weight_decay: f32,
    pub steps: usize,
    pub crop: usize,
    pub image_size: usize,
    pub train_images: usize,
    pub val_images: usize,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: ArchConfig {
                widths: [12, 24, 32],
                ..ArchConfig::default()
            },
            lr: 1e-3,
            weight_decay: 5e-4,
            steps: 300,
            crop: 48,
            image_size: 80,
            train_images: 200,
            val_images: 6,
            eval_every: 100,
        }
    }
}

impl TrainConfig {
    /// Parse a `key = value` run config. Training keys are handled here;
    /// anything else is forwarded to the architecture parser.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut arch_lines = String::new();
        let mut widths_given = false;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let key = line.split('=').next().unwrap_or("").trim();
            widths_given |= key == "widths";
            let value = line.split_once('=').map(|(_, v)| v.trim()).unwrap_or("");
            let parse_num = |what: &str| -> Result<usize> {
                value
                    .parse()
                    .map_err(|_| SmpError::Config(format!("invalid value '{value}' for {what}")))
            };
            match key {
                "lr" => {
                    cfg.lr = value
                        .parse()
                        .map_err(|_| SmpError::Config(format!("invalid value '{value}' for lr")))?
                }
                "weight_decay" => {
                    cfg.weight_decay = value.parse().map_err(|_| {
                        SmpError::Config(format!("invalid value '{value}' for weight_decay"))
                    })?
                }
                "steps" => cfg.steps = parse_num("steps")?,
                "crop" => cfg.crop = parse_num("crop")?,
                "image_size" => cfg.image_size = parse_num("image_size")?,
                "train_images" => cfg.train_images = parse_num("train_images")?,
                "val_images" => cfg.val_images = parse_num("val_images")?,
                "eval_every" => cfg.eval_every = parse_num("eval_every")?,
                _ => {
                    arch_lines.push_str(raw);
                    arch_lines.push('\n');
                }
            }
        }
        cfg.arch = ArchConfig::parse(&arch_lines)?;
        // the training default widths are narrower than the bare
        // architecture default
        if !widths_given {
            cfg.arch.widths = TrainConfig::default().arch.widths;
        }
        if cfg.steps == 0 {
            return Err(SmpError::Config("steps must be >= 1".into()));
        }
        if cfg.eval_every == 0 {
            return Err(SmpError::Config("eval_every must be >= 1".into()));
        }
        Ok(cfg)
    }

    fn synth(&self) -> SynthConfig {
        SynthConfig {
            height: self.image_size,
            width: self.image_size,
            seed: self.arch.seed ^ 0x5EED_DA7A,
            ..SynthConfig::default()
        }
    }
}

/// One metrics log entry; `mean_iou` is present on evaluation steps.
#[derive(Clone, Debug, Serialize)]
pub struct StepMetric {
    pub step: usize,
    pub loss: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_iou: Option<f64>,
}

pub struct TrainOutcome {
    pub metrics: Vec<StepMetric>,
    pub final_report: MetricReport,
    pub net: Network<f32>,
}

impl TrainOutcome {
    /// Metrics as JSON lines, one object per step.
    pub fn metrics_jsonl(&self) -> String {
        self.metrics
            .iter()
            .map(|m| serde_json::to_string(m).expect("serializable metric"))
            .map(|l| l + "\n")
            .collect()
    }
}

/// Composite sampled lattice of nested shrink sites: a final-output
/// pixel (r, c) carries signal iff c % w_total == k_eff and
/// r % h_total == l_eff.
fn sampled_lattice(net: &Network<f32>, locs: &[SampleLoc]) -> (usize, usize, usize, usize) {
    let (mut k_eff, mut l_eff) = (0usize, 0usize);
    let (mut w_total, mut h_total) = (1usize, 1usize);
    for (loc, win) in locs.iter().zip(net.pool_sites()) {
        k_eff += w_total * loc.k;
        l_eff += h_total * loc.l;
        w_total *= win.w;
        h_total *= win.h;
    }
    (k_eff, l_eff, w_total, h_total)
}

/// Class predictions by per-pixel argmax over logits.
pub fn argmax_labels(logits: &Tensor<f32>) -> LabelMap {
    let s = logits.shape();
    let mut out = LabelMap::filled(s.h, s.w, 0);
    for r in 0..s.h {
        for c in 0..s.w {
            let mut best = 0usize;
            let mut best_v = logits.get(0, 0, r, c);
            for ch in 1..s.c {
                let v = logits.get(0, ch, r, c);
                if v > best_v {
                    best_v = v;
                    best = ch;
                }
            }
            out.set(r, c, best as u8);
        }
    }
    out
}

/// Validation pass over the held-out indices with an inference-mode
/// clone of the network (literal split/merge, running BN statistics).
pub fn evaluate(net: &Network<f32>, cfg: &TrainConfig) -> Result<MetricReport> {
    let mut eval_net = net.clone();
    eval_net.training = false;
    let synth = cfg.synth();
    let mut acc = IouAccumulator::new(cfg.arch.classes);
    for i in 0..cfg.val_images {
        let (image, truth) = gen_synthetic(&synth, cfg.train_images + i)?;
        let logits = forward_eval(&eval_net, &image)?;
        acc.add(&argmax_labels(&logits), &truth)?;
    }
    Ok(acc.report())
}

/// Train a toy net from `cfg`. Subsampled (shrink-mode) outputs are
/// supervised only at the sampled lattice; other truth pixels are set
/// to the ignore label for that step.
pub fn train_toy(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut net = cfg.arch.build()?;
    net.training = true;
    let sites = net.pool_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.arch.seed ^ 0x7EA1_0000);
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, &net);
    let synth = cfg.synth();
    let mut metrics = Vec::new();

    for step in 1..=cfg.steps {
        let index = rng.gen_range(0..cfg.train_images);
        let (image, label) = gen_synthetic(&synth, index)?;
        let (image, label) = augment(&image, &label, &mut rng, cfg.crop, cfg.crop)?;

        let locs: Vec<SampleLoc> = sites.iter().map(|w| sample_location(&mut rng, *w)).collect();
        let (logits, tape) = forward_train(&mut net, &image, LocSource::Fixed(&locs))?;

        let mut labels = label.data.clone();
        if !sites.is_empty() {
            let (k_eff, l_eff, w_total, h_total) = sampled_lattice(&net, &locs);
            for r in 0..label.h {
                for c in 0..label.w {
                    if c % w_total != k_eff || r % h_total != l_eff {
                        labels[r * label.w + c] = IGNORE;
                    }
                }
            }
        }

        let (loss, probs) = softmax_xent_fwd(&logits, &labels)?;
        let grad = softmax_xent_bwd(&probs, &labels)?;
        let (grads, _) = backward(&net, &tape, &grad)?;
        adam_step(&mut net, &grads, &mut adam)?;

        let mean_iou = if step % cfg.eval_every == 0 || step == cfg.steps {
            Some(evaluate(&net, cfg)?.mean_iou)
        } else {
            None
        };
        metrics.push(StepMetric { step, loss, mean_iou });
    }

    let final_report = evaluate(&net, cfg)?;
    net.training = false;
    Ok(TrainOutcome { metrics, final_report, net })
}
