//! Static per-layer cost and geometry analysis: FLOP counting and the
//! theoretical receptive field / effective stride of sequential nets.
//!
//! Conventions: one multiply-accumulate counts as 2 FLOPs; pooling and
//! rearrangement layers cost 0; ReLU and batch norm are counted 0 as
//! well. Split and shrink contribute a pure stride to the receptive
//! field recurrence (effective kernel 1), and max pooling is treated
//! the same so that the three subsampling choices are comparable.

use crate::error::{Result, SmpError};
use crate::net::{LayerKind, Network};
use crate::nn::conv2d_out_extent;
use crate::smp::Window;
use crate::tensor::Shape4;
use num_traits::Float;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct FlopEntry {
    pub id: usize,
    pub kind: String,
    pub batches: usize,
    pub gflops: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlopReport {
    pub model: String,
    pub input_shape: String,
    pub layers: Vec<FlopEntry>,
    pub total_gflops: f64,
}

impl std::fmt::Display for FlopReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "model: {}  input: {}", self.model, self.input_shape)?;
        writeln!(f, "{:>4}  {:<9} {:>8}  {:>10}", "id", "kind", "batches", "GFLOPs")?;
        for e in &self.layers {
            writeln!(f, "{:>4}  {:<9} {:>8}  {:>10.4}", e.id, e.kind, e.batches, e.gflops)?;
        }
        write!(f, "total: {:.4} GFLOPs", self.total_gflops)
    }
}

struct ShapeState {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    stack: Vec<(Window, usize)>, // (window, pre_batches)
}

fn propagate<T: Float>(state: &mut ShapeState, id: usize, kind: &LayerKind<T>) -> Result<()> {
    match kind {
        LayerKind::Conv(p) => {
            if state.c != p.in_ch {
                return Err(SmpError::Graph(format!(
                    "layer {id}: conv expects {} channels, got {}",
                    p.in_ch, state.c
                )));
            }
            state.h = conv2d_out_extent(state.h, p.kernel.0, p.stride.0, p.dilation.0, p.padding.0)?;
            state.w = conv2d_out_extent(state.w, p.kernel.1, p.stride.1, p.dilation.1, p.padding.1)?;
            state.c = p.out_ch;
        }
        LayerKind::BatchNorm(_) | LayerKind::Relu | LayerKind::AddFrom(_) => {}
        LayerKind::MaxPool => {
            if state.h % 2 != 0 || state.w % 2 != 0 {
                return Err(SmpError::Graph(format!("layer {id}: maxpool on odd extent")));
            }
            state.h /= 2;
            state.w /= 2;
        }
        LayerKind::Split(win) => {
            if state.h % win.h != 0 || state.w % win.w != 0 {
                return Err(SmpError::Graph(format!("layer {id}: split on non-divisible extent")));
            }
            state.stack.push((*win, state.n));
            state.n *= win.area();
            state.h /= win.h;
            state.w /= win.w;
        }
        LayerKind::Shrink(win) => {
            if state.h % win.h != 0 || state.w % win.w != 0 {
                return Err(SmpError::Graph(format!("layer {id}: shrink on non-divisible extent")));
            }
            state.stack.push((*win, state.n));
            state.h /= win.h;
            state.w /= win.w;
        }
        LayerKind::Merge => {
            let (win, pre) = state
                .stack
                .pop()
                .ok_or_else(|| SmpError::Graph(format!("layer {id}: merge without split")))?;
            state.n = pre;
            state.h *= win.h;
            state.w *= win.w;
        }
        LayerKind::Expand => {
            let (win, _) = state
                .stack
                .pop()
                .ok_or_else(|| SmpError::Graph(format!("layer {id}: expand without shrink")))?;
            state.h *= win.h;
            state.w *= win.w;
        }
        LayerKind::Upsample(f) => {
            state.h *= f;
            state.w *= f;
        }
        LayerKind::Pad(win) => {
            state.h = state.h.div_ceil(win.h) * win.h;
            state.w = state.w.div_ceil(win.w) * win.w;
        }
    }
    Ok(())
}

/// Count conv FLOPs layer by layer, batch-aware: after a split the batch
/// count multiplies every downstream conv's cost.
pub fn count_flops<T: Float>(
    net: &Network<T>,
    input_shape: Shape4,
    model: &str,
) -> Result<FlopReport> {
    let mut state = ShapeState {
        n: input_shape.n,
        c: input_shape.c,
        h: input_shape.h,
        w: input_shape.w,
        stack: Vec::new(),
    };
    let mut layers = Vec::new();
    let mut total = 0.0f64;
    for (id, kind) in net.layers.iter().enumerate() {
        let batches_in = state.n;
        let flops = match kind {
            LayerKind::Conv(p) => {
                let oh =
                    conv2d_out_extent(state.h, p.kernel.0, p.stride.0, p.dilation.0, p.padding.0)?;
                let ow =
                    conv2d_out_extent(state.w, p.kernel.1, p.stride.1, p.dilation.1, p.padding.1)?;
                2.0 * (p.kernel.0 * p.kernel.1 * p.in_ch * p.out_ch) as f64
                    * (oh * ow * batches_in) as f64
            }
            _ => 0.0,
        };
        propagate(&mut state, id, kind)?;
        let gflops = flops / 1e9;
        total += gflops;
        layers.push(FlopEntry {
            id,
            kind: kind.name().to_string(),
            batches: batches_in,
            gflops,
        });
    }
    Ok(FlopReport {
        model: model.to_string(),
        input_shape: input_shape.to_string(),
        layers,
        total_gflops: total,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RfEntry {
    pub id: usize,
    pub kind: String,
    /// Cumulative receptive field (rows, cols).
    pub rf: (usize, usize),
    /// Effective stride on the input grid (rows, cols).
    pub jump: (usize, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct RfReport {
    pub model: String,
    pub layers: Vec<RfEntry>,
}

impl RfReport {
    pub fn final_rf(&self) -> (usize, usize) {
        self.layers.last().map_or((1, 1), |e| e.rf)
    }
}

impl std::fmt::Display for RfReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "model: {}", self.model)?;
        writeln!(f, "{:>4}  {:<9} {:>9}  {:>9}", "id", "kind", "rf(h,w)", "jump(h,w)")?;
        for e in &self.layers {
            writeln!(
                f,
                "{:>4}  {:<9} {:>4},{:<4}  {:>4},{:<4}",
                e.id, e.kind, e.rf.0, e.rf.1, e.jump.0, e.jump.1
            )?;
        }
        let (rh, rw) = self.final_rf();
        write!(f, "final receptive field: {rh}x{rw}")
    }
}

/// Receptive-field recurrence rf' = rf + (effective_kernel - 1) * jump,
/// jump' = jump * stride, per axis.
pub fn receptive_field<T: Float>(net: &Network<T>, model: &str) -> Result<RfReport> {
    let mut rf = (1usize, 1usize);
    let mut jump = (1usize, 1usize);
    let mut stack: Vec<Window> = Vec::new();
    let mut layers = Vec::new();
    for (id, kind) in net.layers.iter().enumerate() {
        match kind {
            LayerKind::Conv(p) => {
                rf.0 += p.dilation.0 * (p.kernel.0 - 1) * jump.0;
                rf.1 += p.dilation.1 * (p.kernel.1 - 1) * jump.1;
                jump.0 *= p.stride.0;
                jump.1 *= p.stride.1;
            }
            LayerKind::MaxPool => {
                jump.0 *= 2;
                jump.1 *= 2;
            }
            LayerKind::Split(w) | LayerKind::Shrink(w) => {
                stack.push(*w);
                jump.0 *= w.h;
                jump.1 *= w.w;
            }
            LayerKind::Merge | LayerKind::Expand => {
                let w = stack.pop().ok_or_else(|| {
                    SmpError::Analysis(format!("layer {id}: merge/expand without split"))
                })?;
                jump.0 /= w.h;
                jump.1 /= w.w;
            }
            LayerKind::Upsample(f) => {
                jump.0 = (jump.0 / f).max(1);
                jump.1 = (jump.1 / f).max(1);
            }
            LayerKind::BatchNorm(_) | LayerKind::Relu | LayerKind::Pad(_) | LayerKind::AddFrom(_) => {}
        }
        layers.push(RfEntry {
            id,
            kind: kind.name().to_string(),
            rf,
            jump,
        });
    }
    Ok(RfReport {
        model: model.to_string(),
        layers,
    })
}
