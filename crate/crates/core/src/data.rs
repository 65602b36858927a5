//! Synthetic thin-structure segmentation data: images of noisy blobs,
//! thin lines and small dots on a background, with per-pixel labels.
//! Everything is a pure function of the configured seed.

use crate::error::{Result, SmpError};
use crate::tensor::{Shape4, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Per-pixel class indices, extents matching the image. 255 is ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

pub const IGNORE: u8 = 255;

impl LabelMap {
    pub fn filled(h: usize, w: usize, value: u8) -> Self {
        LabelMap {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.w + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.w + c] = v;
    }

    pub fn class_histogram(&self, classes: usize) -> Vec<usize> {
        let mut hist = vec![0usize; classes];
        for v in &self.data {
            if (*v as usize) < classes {
                hist[*v as usize] += 1;
            }
        }
        hist
    }
}

/// Classes: 0 background, 1 blob, 2 thin line, 3 small dot.
pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_BLOB: u8 = 1;
pub const CLASS_LINE: u8 = 2;
pub const CLASS_DOT: u8 = 3;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub blobs: usize,
    pub lines: usize,
    pub dots: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            height: 80,
            width: 80,
            classes: 4,
            blobs: 2,
            lines: 2,
            dots: 3,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

const CLASS_COLORS: [[f64; 3]; 4] = [
    [0.20, 0.20, 0.25], // background
    [0.80, 0.35, 0.30], // blob
    [0.25, 0.85, 0.30], // thin line
    [0.90, 0.85, 0.25], // small dot
];

fn draw_disc(label: &mut LabelMap, cy: i64, cx: i64, radius: i64, class: u8) {
    for r in (cy - radius).max(0)..=(cy + radius).min(label.h as i64 - 1) {
        for c in (cx - radius).max(0)..=(cx + radius).min(label.w as i64 - 1) {
            let dy = r - cy;
            let dx = c - cx;
            if dy * dy + dx * dx <= radius * radius {
                label.set(r as usize, c as usize, class);
            }
        }
    }
}

/// Deterministic image/label pair for (cfg.seed, index).
pub fn gen_synthetic(cfg: &SynthConfig, index: usize) -> Result<(Tensor<f32>, LabelMap)> {
    if cfg.classes < 4 {
        return Err(SmpError::Config("synthetic data needs >= 4 classes".into()));
    }
    if cfg.height < 8 || cfg.width < 8 {
        return Err(SmpError::Config("synthetic image must be at least 8x8".into()));
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(cfg.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let (h, w) = (cfg.height, cfg.width);
    let mut label = LabelMap::filled(h, w, CLASS_BACKGROUND);

    for _ in 0..cfg.blobs {
        let cy = rng.gen_range(0..h as i64);
        let cx = rng.gen_range(0..w as i64);
        let radius = rng.gen_range(4..=9);
        draw_disc(&mut label, cy, cx, radius, CLASS_BLOB);
    }
    // thin lines: short strokes so the class stays under 5% of pixels
    for _ in 0..cfg.lines {
        let mut y = rng.gen_range(0.0..h as f64);
        let mut x = rng.gen_range(0.0..w as f64);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let length = rng.gen_range(16..=36) as f64;
        let thickness = rng.gen_range(1..=2);
        let (dy, dx) = (angle.sin(), angle.cos());
        let mut travelled = 0.0;
        while travelled < length {
            let (r, c) = (y.round() as i64, x.round() as i64);
            if (0..h as i64).contains(&r) && (0..w as i64).contains(&c) {
                label.set(r as usize, c as usize, CLASS_LINE);
                if thickness > 1 && (c + 1) < w as i64 {
                    label.set(r as usize, (c + 1) as usize, CLASS_LINE);
                }
            }
            y += dy * 0.5;
            x += dx * 0.5;
            travelled += 0.5;
        }
    }
    for _ in 0..cfg.dots {
        let cy = rng.gen_range(0..h as i64);
        let cx = rng.gen_range(0..w as i64);
        let radius = rng.gen_range(1..=2);
        draw_disc(&mut label, cy, cx, radius, CLASS_DOT);
    }

    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| SmpError::Config(e.to_string()))?;
    let shape = Shape4::new(1, 3, h, w)?;
    let mut image = Tensor::zeros(shape);
    for r in 0..h {
        for c in 0..w {
            let color = CLASS_COLORS[label.get(r, c) as usize];
            for ch in 0..3 {
                let v = (color[ch] + noise.sample(&mut rng)).clamp(0.0, 1.0);
                image.set(0, ch, r, c, v as f32);
            }
        }
    }
    Ok((image, label))
}

/// Random crop plus horizontal flip, the same window and decision for
/// image and label.
pub fn augment(
    image: &Tensor<f32>,
    label: &LabelMap,
    rng: &mut ChaCha8Rng,
    crop_h: usize,
    crop_w: usize,
) -> Result<(Tensor<f32>, LabelMap)> {
    let s = image.shape();
    if s.h != label.h || s.w != label.w {
        return Err(SmpError::Shape("image/label extent mismatch".into()));
    }
    if crop_h > s.h || crop_w > s.w {
        return Err(SmpError::Config(format!(
            "crop {crop_h}x{crop_w} larger than image {}x{}",
            s.h, s.w
        )));
    }
    let top = rng.gen_range(0..=s.h - crop_h);
    let left = rng.gen_range(0..=s.w - crop_w);
    let flip = rng.gen_bool(0.5);
    Ok(crop_flip(image, label, top, left, crop_h, crop_w, flip))
}

/// Deterministic crop/flip used by `augment` and by tests.
pub fn crop_flip(
    image: &Tensor<f32>,
    label: &LabelMap,
    top: usize,
    left: usize,
    crop_h: usize,
    crop_w: usize,
    flip: bool,
) -> (Tensor<f32>, LabelMap) {
    let s = image.shape();
    let out_shape = Shape4::new(s.n, s.c, crop_h, crop_w).expect("valid crop shape");
    let mut out_img = Tensor::zeros(out_shape);
    let mut out_label = LabelMap::filled(crop_h, crop_w, 0);
    for r in 0..crop_h {
        for c in 0..crop_w {
            let src_c = if flip { left + crop_w - 1 - c } else { left + c };
            out_label.set(r, c, label.get(top + r, src_c));
            for b in 0..s.n {
                for ch in 0..s.c {
                    out_img.set(b, ch, r, c, image.get(b, ch, top + r, src_c));
                }
            }
        }
    }
    (out_img, out_label)
}
