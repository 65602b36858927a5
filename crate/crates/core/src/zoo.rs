//! Declarative architecture builders: the three runtime-analysis nets
//! (max-pool, dilated, split), a toy split-pooling ResNet, and the
//! matched max-pool baseline with bilinear upsampling.
//!
//! The split variant and the baseline are built from identical conv/BN
//! shapes; only the subsampling mechanism differs, so trainable
//! parameter counts are equal by construction.

use crate::error::{Result, SmpError};
use crate::net::{LayerKind, Network};
use crate::nn::{BatchNorm, Conv2d};
use crate::smp::Window;
use crate::tensor::{fill_uniform, Shape4, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ArchVariant {
    MaxPoolNet,
    DilatedNet,
    SplitNet,
    ToySmp,
    ToyBaseline,
}

impl std::str::FromStr for ArchVariant {
    type Err = SmpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxpool" => Ok(ArchVariant::MaxPoolNet),
            "dilated" => Ok(ArchVariant::DilatedNet),
            "split" => Ok(ArchVariant::SplitNet),
            "toy_smp" => Ok(ArchVariant::ToySmp),
            "toy_baseline" => Ok(ArchVariant::ToyBaseline),
            other => Err(SmpError::Config(format!("unknown variant '{other}'"))),
        }
    }
}

/// Architecture configuration, readable from a plain key-value file.
#[derive(Clone, Debug)]
pub struct ArchConfig {
    pub variant: ArchVariant,
    pub classes: usize,
    pub widths: [usize; 3],
    pub blocks: usize,
    pub window: Window,
    pub seed: u64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            variant: ArchVariant::ToySmp,
            classes: 4,
            widths: [16, 32, 64],
            blocks: 1,
            window: Window { w: 2, h: 2 },
            seed: 0,
        }
    }
}

impl ArchConfig {
    /// Parse a `key = value` config. Keys: variant, classes, widths
    /// (comma-separated), blocks, window (WxH), seed. Unknown keys are
    /// an error; '#' starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ArchConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SmpError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "variant" => cfg.variant = value.parse()?,
                "classes" => cfg.classes = parse_num(key, value)?,
                "blocks" => cfg.blocks = parse_num(key, value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "widths" => {
                    let parts: Vec<usize> = value
                        .split(',')
                        .map(|p| parse_num("widths", p.trim()))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(SmpError::Config("widths needs exactly 3 entries".into()));
                    }
                    cfg.widths = [parts[0], parts[1], parts[2]];
                }
                "window" => {
                    let (w, h) = value
                        .split_once('x')
                        .ok_or_else(|| SmpError::Config("window format is WxH".into()))?;
                    cfg.window = Window::new(parse_num("window", w)?, parse_num("window", h)?)?;
                }
                other => return Err(SmpError::Config(format!("unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Network<f32>> {
        match self.variant {
            ArchVariant::MaxPoolNet | ArchVariant::DilatedNet | ArchVariant::SplitNet => {
                Ok(build_analysis_net(self.variant, self.seed))
            }
            ArchVariant::ToySmp => build_toy_smp(self),
            ArchVariant::ToyBaseline => build_toy_baseline(self),
        }
    }
}

fn parse_num<N: std::str::FromStr>(key: &str, value: &str) -> Result<N> {
    value
        .parse()
        .map_err(|_| SmpError::Config(format!("invalid value '{value}' for {key}")))
}

fn he_uniform(rng: &mut ChaCha8Rng, out_ch: usize, in_ch: usize, kh: usize, kw: usize) -> Tensor<f32> {
    let fan_in = (in_ch * kh * kw) as f64;
    let bound = (2.0 / fan_in).sqrt();
    fill_uniform(
        Shape4::new(out_ch, in_ch, kh, kw).expect("valid weight shape"),
        rng,
        -bound,
        bound,
    )
    .expect("valid range")
}

#[allow(clippy::too_many_arguments)]
fn conv(
    rng: &mut ChaCha8Rng,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    stride: usize,
    dilation: usize,
    padding: usize,
    bias: bool,
) -> LayerKind<f32> {
    let weight = he_uniform(rng, out_ch, in_ch, k, k);
    let bias = bias.then(|| vec![0.0f32; out_ch]);
    LayerKind::Conv(
        Conv2d::new(
            in_ch,
            out_ch,
            (k, k),
            (stride, stride),
            (dilation, dilation),
            (padding, padding),
            weight,
            bias,
        )
        .expect("consistent conv config"),
    )
}

/// The three runtime-analysis nets: conv1 is 3->64 3x3 everywhere and
/// conv2 is 64->128 3x3; (a) pools, (b) dilates with padding 2 at full
/// resolution, (c) splits. conv2 weights are shareable across variants.
pub fn build_analysis_net(variant: ArchVariant, seed: u64) -> Network<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv1 = conv(&mut rng, 3, 64, 3, 1, 1, 1, false);
    let mut layers = vec![conv1];
    match variant {
        ArchVariant::MaxPoolNet => {
            layers.push(LayerKind::MaxPool);
            layers.push(conv(&mut rng, 64, 128, 3, 1, 1, 1, false));
        }
        ArchVariant::DilatedNet => {
            layers.push(conv(&mut rng, 64, 128, 3, 1, 2, 2, false));
        }
        ArchVariant::SplitNet => {
            layers.push(LayerKind::Split(Window { w: 2, h: 2 }));
            layers.push(conv(&mut rng, 64, 128, 3, 1, 1, 1, false));
        }
        _ => unreachable!("runtime-analysis variants only"),
    }
    Network {
        layers,
        classes: 128,
        training: false,
    }
}

fn push_resblock(layers: &mut Vec<LayerKind<f32>>, rng: &mut ChaCha8Rng, ch: usize) {
    let skip = layers.len() - 1;
    layers.push(conv(rng, ch, ch, 3, 1, 1, 1, false));
    layers.push(LayerKind::BatchNorm(BatchNorm::new(ch)));
    layers.push(LayerKind::Relu);
    layers.push(conv(rng, ch, ch, 3, 1, 1, 1, false));
    layers.push(LayerKind::BatchNorm(BatchNorm::new(ch)));
    layers.push(LayerKind::AddFrom(skip));
    layers.push(LayerKind::Relu);
}

fn toy_layers(cfg: &ArchConfig, smp: bool) -> Result<Vec<LayerKind<f32>>> {
    if cfg.classes == 0 {
        return Err(SmpError::Config("classes must be >= 1".into()));
    }
    if cfg.widths.iter().any(|w| *w == 0) {
        return Err(SmpError::Config("widths must be >= 1".into()));
    }
    if !smp && cfg.window != (Window { w: 2, h: 2 }) {
        return Err(SmpError::Config("baseline subsampling requires a 2x2 window".into()));
    }
    let [w0, w1, w2] = cfg.widths;
    let win = cfg.window;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers = Vec::new();

    // stem, then subsampling site 1 (former max pool)
    layers.push(conv(&mut rng, 3, w0, 3, 1, 1, 1, false));
    layers.push(LayerKind::BatchNorm(BatchNorm::new(w0)));
    layers.push(LayerKind::Relu);
    layers.push(if smp {
        LayerKind::Split(win)
    } else {
        LayerKind::MaxPool
    });
    for _ in 0..cfg.blocks {
        push_resblock(&mut layers, &mut rng, w0);
    }

    // transition conv block, subsampling site 2 (former stride-2 conv);
    // the split sits after the batch norm and the stride drops to 1x1
    layers.push(conv(&mut rng, w0, w1, 3, if smp { 1 } else { 2 }, 1, 1, false));
    layers.push(LayerKind::BatchNorm(BatchNorm::new(w1)));
    if smp {
        layers.push(LayerKind::Split(win));
    }
    layers.push(LayerKind::Relu);
    for _ in 0..cfg.blocks {
        push_resblock(&mut layers, &mut rng, w1);
    }

    // width-only transition, no subsampling
    layers.push(conv(&mut rng, w1, w2, 3, 1, 1, 1, false));
    layers.push(LayerKind::BatchNorm(BatchNorm::new(w2)));
    layers.push(LayerKind::Relu);
    for _ in 0..cfg.blocks {
        push_resblock(&mut layers, &mut rng, w2);
    }

    // 1x1 prediction head
    layers.push(conv(&mut rng, w2, cfg.classes, 1, 1, 1, 0, true));

    if smp {
        layers.push(LayerKind::Merge);
        layers.push(LayerKind::Merge);
    } else {
        layers.push(LayerKind::Upsample(4));
    }
    Ok(layers)
}

/// Toy split-pooling net: full-resolution output with two split sites,
/// merged back at the end (inference) or run as shrink/expand (training).
pub fn build_toy_smp(cfg: &ArchConfig) -> Result<Network<f32>> {
    Ok(Network {
        layers: toy_layers(cfg, true)?,
        classes: cfg.classes,
        training: false,
    })
}

/// Matched baseline: max pool + stride-2 conv, 1x1 head, bilinear
/// upsample back to full resolution. Same parameter count as the toy
/// split net for equal configs.
pub fn build_toy_baseline(cfg: &ArchConfig) -> Result<Network<f32>> {
    Ok(Network {
        layers: toy_layers(cfg, false)?,
        classes: cfg.classes,
        training: false,
    })
}
