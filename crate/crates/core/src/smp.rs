//! Split, merge, shrink and expand pooling.
//!
//! Split rearranges a feature map by within-window offset into `w*h`
//! subsampled batches; merge is its exact inverse. Shrink keeps only one
//! offset's batch; expand scatters it back, leaving zeros elsewhere.
//!
//! Index convention, fixed globally: for spatial position (row r, col x),
//! the within-window offset is k = x mod w, l = r mod h; the element goes
//! to output batch offset k*h + l at position (row (r-l)/h, col (x-k)/w).
//! Input batch b contributes output batches b*(w*h) + k*h + l.

use crate::error::{Result, SmpError};
use crate::tensor::{Shape4, Tensor};
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Non-overlapping pooling window.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Window {
    pub w: usize,
    pub h: usize,
}

impl Window {
    pub fn new(w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(SmpError::Arg(format!("window extents must be >= 1, got {w}x{h}")));
        }
        Ok(Window { w, h })
    }

    /// Number of batches one split produces per input batch.
    #[inline]
    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

/// What merge needs to invert a split.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SplitMeta {
    pub window: Window,
    pub pre_batches: usize,
}

/// Within-window offset shared by a shrink/expand pair.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SampleLoc {
    pub k: usize,
    pub l: usize,
}

impl SampleLoc {
    pub fn checked(k: usize, l: usize, win: Window) -> Result<Self> {
        if k >= win.w || l >= win.h {
            return Err(SmpError::Location(format!(
                "loc ({k},{l}) outside window {}x{}",
                win.w, win.h
            )));
        }
        Ok(SampleLoc { k, l })
    }

    /// Batch offset of this location within a split output.
    #[inline]
    pub fn batch_offset(&self, win: Window) -> usize {
        self.k * win.h + self.l
    }
}

fn check_divisible(shape: Shape4, win: Window) -> Result<()> {
    if shape.w % win.w != 0 {
        return Err(SmpError::Divisibility {
            extent: shape.w,
            window: win.w,
        });
    }
    if shape.h % win.h != 0 {
        return Err(SmpError::Divisibility {
            extent: shape.h,
            window: win.h,
        });
    }
    Ok(())
}

/// Rearrange each input batch into `w*h` subsampled batches.
pub fn split_fwd<T: Float>(x: &Tensor<T>, win: Window) -> Result<(Tensor<T>, SplitMeta)> {
    let s = x.shape();
    check_divisible(s, win)?;
    let area = win.area();
    let out_shape = Shape4::new(s.n * area, s.c, s.h / win.h, s.w / win.w)?;
    let mut out = Tensor::zeros(out_shape);
    for b in 0..s.n {
        for c in 0..s.c {
            for r in 0..s.h {
                let l = r % win.h;
                let or = r / win.h;
                for col in 0..s.w {
                    let k = col % win.w;
                    let ob = b * area + k * win.h + l;
                    out.set(ob, c, or, col / win.w, x.get(b, c, r, col));
                }
            }
        }
    }
    Ok((
        out,
        SplitMeta {
            window: win,
            pre_batches: s.n,
        },
    ))
}

/// Inverse of `split_fwd`.
pub fn merge_fwd<T: Float>(x: &Tensor<T>, meta: &SplitMeta) -> Result<Tensor<T>> {
    let s = x.shape();
    let win = meta.window;
    let area = win.area();
    if s.n % area != 0 || s.n / area != meta.pre_batches {
        return Err(SmpError::Meta(format!(
            "batch count {} inconsistent with window {}x{} and pre_batches {}",
            s.n, win.w, win.h, meta.pre_batches
        )));
    }
    let out_shape = Shape4::new(meta.pre_batches, s.c, s.h * win.h, s.w * win.w)?;
    let mut out = Tensor::zeros(out_shape);
    for b in 0..meta.pre_batches {
        for k in 0..win.w {
            for l in 0..win.h {
                let ib = b * area + k * win.h + l;
                for c in 0..s.c {
                    for r in 0..s.h {
                        for col in 0..s.w {
                            out.set(b, c, r * win.h + l, col * win.w + k, x.get(ib, c, r, col));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of `split_fwd`: routes each output-gradient element back to
/// its unique source. Same rearrangement as `merge_fwd`.
pub fn split_bwd<T: Float>(grad_out: &Tensor<T>, meta: &SplitMeta) -> Result<Tensor<T>> {
    merge_fwd(grad_out, meta)
}

/// Gradient of `merge_fwd`. Same rearrangement as `split_fwd`.
pub fn merge_bwd<T: Float>(grad_out: &Tensor<T>, meta: &SplitMeta) -> Result<Tensor<T>> {
    let s = grad_out.shape();
    if s.n != meta.pre_batches {
        return Err(SmpError::Meta(format!(
            "batch count {} does not match pre_batches {}",
            s.n, meta.pre_batches
        )));
    }
    Ok(split_fwd(grad_out, meta.window)?.0)
}

/// Keep only the split batch at `loc`; batch count does not multiply.
pub fn shrink_fwd<T: Float>(x: &Tensor<T>, win: Window, loc: SampleLoc) -> Result<Tensor<T>> {
    let s = x.shape();
    check_divisible(s, win)?;
    SampleLoc::checked(loc.k, loc.l, win)?;
    let out_shape = Shape4::new(s.n, s.c, s.h / win.h, s.w / win.w)?;
    let mut out = Tensor::zeros(out_shape);
    for b in 0..s.n {
        for c in 0..s.c {
            for r in 0..out_shape.h {
                for col in 0..out_shape.w {
                    out.set(b, c, r, col, x.get(b, c, r * win.h + loc.l, col * win.w + loc.k));
                }
            }
        }
    }
    Ok(out)
}

/// Scatter values back to their sampled positions; everything else zero.
pub fn expand_fwd<T: Float>(x: &Tensor<T>, win: Window, loc: SampleLoc) -> Result<Tensor<T>> {
    SampleLoc::checked(loc.k, loc.l, win)?;
    let s = x.shape();
    let out_shape = Shape4::new(s.n, s.c, s.h * win.h, s.w * win.w)?;
    let mut out = Tensor::zeros(out_shape);
    for b in 0..s.n {
        for c in 0..s.c {
            for r in 0..s.h {
                for col in 0..s.w {
                    out.set(b, c, r * win.h + loc.l, col * win.w + loc.k, x.get(b, c, r, col));
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of `shrink_fwd`: scatter into a zero tensor of the input shape.
pub fn shrink_bwd<T: Float>(
    grad_out: &Tensor<T>,
    win: Window,
    loc: SampleLoc,
    in_shape: Shape4,
) -> Result<Tensor<T>> {
    let s = grad_out.shape();
    if s.n != in_shape.n
        || s.c != in_shape.c
        || s.h * win.h != in_shape.h
        || s.w * win.w != in_shape.w
    {
        return Err(SmpError::Shape(format!(
            "shrink_bwd: grad {} inconsistent with input {} under window {}x{}",
            s, in_shape, win.w, win.h
        )));
    }
    expand_fwd(grad_out, win, loc)
}

/// Gradient of `expand_fwd`: gather the sampled positions only.
pub fn expand_bwd<T: Float>(grad_out: &Tensor<T>, win: Window, loc: SampleLoc) -> Result<Tensor<T>> {
    shrink_fwd(grad_out, win, loc)
}

/// Draw one within-window location uniformly from `rng`.
pub fn sample_location(rng: &mut ChaCha8Rng, win: Window) -> SampleLoc {
    SampleLoc {
        k: rng.gen_range(0..win.w),
        l: rng.gen_range(0..win.h),
    }
}
