//! Sequential network execution: forward with a gradient tape, exact
//! backward, Adam updates, a deterministic batch-parallel inference
//! path, and the full-split oracle that reassembles a split network's
//! output from every shrink location combination.

use crate::error::{Result, SmpError};
use crate::nn::{
    batchnorm_bwd, batchnorm_fwd, bilinear_upsample_bwd, bilinear_upsample_fwd, conv2d_bwd,
    conv2d_fwd, crop_spatial, maxpool2x2_bwd, maxpool2x2_fwd, relu_bwd, relu_fwd,
    zero_pad_to_divisible, BatchNorm, BnSaved, Conv2d,
};
use crate::smp::{
    expand_bwd, expand_fwd, merge_fwd, sample_location, shrink_bwd, shrink_fwd, split_fwd,
    SampleLoc, SplitMeta, Window,
};
use crate::tensor::{Shape4, Tensor};
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// One layer of a sequential network. `AddFrom(i)` adds the saved output
/// of layer `i` (a residual skip).
#[derive(Clone, Debug)]
pub enum LayerKind<T = f32> {
    Conv(Conv2d<T>),
    BatchNorm(BatchNorm<T>),
    Relu,
    MaxPool,
    Split(Window),
    Merge,
    Shrink(Window),
    Expand,
    Upsample(usize),
    Pad(Window),
    AddFrom(usize),
}

impl<T> LayerKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv(_) => "conv",
            LayerKind::BatchNorm(_) => "bn",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool => "maxpool",
            LayerKind::Split(_) => "split",
            LayerKind::Merge => "merge",
            LayerKind::Shrink(_) => "shrink",
            LayerKind::Expand => "expand",
            LayerKind::Upsample(_) => "upsample",
            LayerKind::Pad(_) => "pad",
            LayerKind::AddFrom(_) => "add",
        }
    }
}

/// Ordered layer list plus class count and mode flag. In training mode
/// split/merge layers execute as shrink/expand with a freshly sampled
/// location per pair per forward pass.
#[derive(Clone, Debug)]
pub struct Network<T = f32> {
    pub layers: Vec<LayerKind<T>>,
    pub classes: usize,
    pub training: bool,
}

impl<T: Float> Network<T> {
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                LayerKind::Conv(c) => c.param_count(),
                LayerKind::BatchNorm(b) => b.param_count(),
                _ => 0,
            })
            .sum()
    }

    /// Number of subsampling pooling sites (split or shrink layers).
    pub fn pool_sites(&self) -> Vec<Window> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerKind::Split(w) | LayerKind::Shrink(w) => Some(*w),
                _ => None,
            })
            .collect()
    }
}

/// Per-layer saved state for the backward pass.
#[derive(Clone, Debug)]
enum Aux<T> {
    None,
    Bn(BnSaved<T>),
    MaxPool(Vec<usize>),
    /// Rearrangement executed as shrink/expand at `loc`.
    Sampled { window: Window, loc: SampleLoc },
    Pad { orig: (usize, usize) },
}

/// Activations saved by a training-mode forward.
pub struct Tape<T = f32> {
    input: Tensor<T>,
    outputs: Vec<Tensor<T>>,
    aux: Vec<Aux<T>>,
    training: bool,
}

impl<T: Float> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.outputs.last().expect("network has layers")
    }
}

/// Parameter gradients for one layer.
#[derive(Clone, Debug)]
pub enum ParamGrad<T> {
    Conv { weight: Tensor<T>, bias: Option<Vec<T>> },
    Bn { gamma: Vec<T>, beta: Vec<T> },
}

/// Gradients aligned with the network's layer list.
pub struct Grads<T = f32> {
    pub by_layer: Vec<Option<ParamGrad<T>>>,
}

/// Where shrink/expand locations come from during a subsampled forward.
pub enum LocSource<'a> {
    Rng(&'a mut ChaCha8Rng),
    Fixed(&'a [SampleLoc]),
}

struct PoolRec {
    window: Window,
    pre_shape: Shape4,
    loc: Option<SampleLoc>,
}

/// Inference forward with literal split/merge. Deterministic and free of
/// parameter mutation.
pub fn forward_eval<T: Float>(net: &Network<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut outputs: Vec<Option<Tensor<T>>> = vec![None; net.layers.len()];
    let out = run_eval_range(net, x.clone(), 0..net.layers.len(), None, &mut outputs)?;
    Ok(out)
}

/// Eval-mode forward running every split as shrink and every merge as
/// expand, with locations taken from `locs` in pool-site order.
pub fn forward_shrink<T: Float>(
    net: &Network<T>,
    x: &Tensor<T>,
    locs: &[SampleLoc],
) -> Result<Tensor<T>> {
    let mut outputs: Vec<Option<Tensor<T>>> = vec![None; net.layers.len()];
    run_eval_range(net, x.clone(), 0..net.layers.len(), Some(locs), &mut outputs)
}

fn run_eval_range<T: Float>(
    net: &Network<T>,
    input: Tensor<T>,
    range: std::ops::Range<usize>,
    locs: Option<&[SampleLoc]>,
    outputs: &mut [Option<Tensor<T>>],
) -> Result<Tensor<T>> {
    let mut stack: Vec<PoolRec> = Vec::new();
    let mut loc_cursor = 0usize;
    let mut cur = input;
    for i in range {
        let out = match &net.layers[i] {
            LayerKind::Conv(p) => conv2d_fwd(&cur, p)?,
            LayerKind::BatchNorm(bn) => {
                let mut bn = bn.clone();
                batchnorm_fwd(&cur, &mut bn, false)?.0
            }
            LayerKind::Relu => relu_fwd(&cur),
            LayerKind::MaxPool => maxpool2x2_fwd(&cur)?.0,
            LayerKind::Split(w) => match locs {
                None => {
                    let pre_shape = cur.shape();
                    let (out, _) = split_fwd(&cur, *w)?;
                    stack.push(PoolRec { window: *w, pre_shape, loc: None });
                    out
                }
                Some(ls) => {
                    let loc = *ls.get(loc_cursor).ok_or_else(|| {
                        SmpError::Graph("not enough sample locations for pool sites".into())
                    })?;
                    loc_cursor += 1;
                    let pre_shape = cur.shape();
                    let out = shrink_fwd(&cur, *w, loc)?;
                    stack.push(PoolRec { window: *w, pre_shape, loc: Some(loc) });
                    out
                }
            },
            LayerKind::Merge => {
                let rec = stack
                    .pop()
                    .ok_or_else(|| SmpError::Graph(format!("layer {i}: merge without split")))?;
                match rec.loc {
                    None => {
                        let meta = SplitMeta { window: rec.window, pre_batches: rec.pre_shape.n };
                        merge_fwd(&cur, &meta)?
                    }
                    Some(loc) => expand_fwd(&cur, rec.window, loc)?,
                }
            }
            LayerKind::Shrink(w) => {
                let ls = locs.ok_or_else(|| {
                    SmpError::Graph(format!("layer {i}: shrink requires a location source"))
                })?;
                let loc = *ls.get(loc_cursor).ok_or_else(|| {
                    SmpError::Graph("not enough sample locations for pool sites".into())
                })?;
                loc_cursor += 1;
                let pre_shape = cur.shape();
                let out = shrink_fwd(&cur, *w, loc)?;
                stack.push(PoolRec { window: *w, pre_shape, loc: Some(loc) });
                out
            }
            LayerKind::Expand => {
                let rec = stack
                    .pop()
                    .ok_or_else(|| SmpError::Graph(format!("layer {i}: expand without shrink")))?;
                let loc = rec
                    .loc
                    .ok_or_else(|| SmpError::Graph(format!("layer {i}: expand paired with split")))?;
                expand_fwd(&cur, rec.window, loc)?
            }
            LayerKind::Upsample(f) => bilinear_upsample_fwd(&cur, *f)?,
            LayerKind::Pad(w) => zero_pad_to_divisible(&cur, *w).0,
            LayerKind::AddFrom(j) => {
                if *j >= i {
                    return Err(SmpError::Graph(format!(
                        "layer {i}: forward skip reference {j}"
                    )));
                }
                let saved = outputs[*j]
                    .as_ref()
                    .ok_or_else(|| SmpError::Graph(format!("layer {i}: skip source {j} not run")))?;
                cur.add(saved)?
            }
        };
        outputs[i] = Some(out.clone());
        cur = out;
    }
    Ok(cur)
}

/// Training-mode forward: split/merge execute as shrink/expand, one
/// location per pair drawn from `locs`; batch-norm runs in train mode
/// and updates its running statistics. Returns the output and the tape.
pub fn forward_train<T: Float>(
    net: &mut Network<T>,
    x: &Tensor<T>,
    mut locs: LocSource<'_>,
) -> Result<(Tensor<T>, Tape<T>)> {
    if !net.training {
        return Err(SmpError::Mode("forward_train on an inference-mode network".into()));
    }
    let n_layers = net.layers.len();
    let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(n_layers);
    let mut aux: Vec<Aux<T>> = Vec::with_capacity(n_layers);
    let mut stack: Vec<PoolRec> = Vec::new();
    let mut loc_cursor = 0usize;
    let mut cur = x.clone();
    for i in 0..n_layers {
        let mut next_loc = |stack: &mut Vec<PoolRec>, w: Window, pre_shape: Shape4| -> Result<SampleLoc> {
            let loc = match &mut locs {
                LocSource::Rng(rng) => sample_location(rng, w),
                LocSource::Fixed(ls) => *ls.get(loc_cursor).ok_or_else(|| {
                    SmpError::Graph("not enough sample locations for pool sites".into())
                })?,
            };
            loc_cursor += 1;
            stack.push(PoolRec { window: w, pre_shape, loc: Some(loc) });
            Ok(loc)
        };
        let (out, a) = match &mut net.layers[i] {
            LayerKind::Conv(p) => (conv2d_fwd(&cur, p)?, Aux::None),
            LayerKind::BatchNorm(bn) => {
                let (out, saved) = batchnorm_fwd(&cur, bn, true)?;
                (out, Aux::Bn(saved.expect("train mode saves stats")))
            }
            LayerKind::Relu => (relu_fwd(&cur), Aux::None),
            LayerKind::MaxPool => {
                let (out, argmax) = maxpool2x2_fwd(&cur)?;
                (out, Aux::MaxPool(argmax))
            }
            LayerKind::Split(w) | LayerKind::Shrink(w) => {
                let w = *w;
                let pre_shape = cur.shape();
                let loc = next_loc(&mut stack, w, pre_shape)?;
                (shrink_fwd(&cur, w, loc)?, Aux::Sampled { window: w, loc })
            }
            LayerKind::Merge | LayerKind::Expand => {
                let rec = stack
                    .pop()
                    .ok_or_else(|| SmpError::Graph(format!("layer {i}: unmatched merge/expand")))?;
                let loc = rec.loc.expect("training pool records carry a location");
                (
                    expand_fwd(&cur, rec.window, loc)?,
                    Aux::Sampled { window: rec.window, loc },
                )
            }
            LayerKind::Upsample(f) => (bilinear_upsample_fwd(&cur, *f)?, Aux::None),
            LayerKind::Pad(w) => {
                let (out, orig) = zero_pad_to_divisible(&cur, *w);
                (out, Aux::Pad { orig })
            }
            LayerKind::AddFrom(j) => {
                let j = *j;
                if j >= i {
                    return Err(SmpError::Graph(format!("layer {i}: forward skip reference {j}")));
                }
                (cur.add(&outputs[j])?, Aux::None)
            }
        };
        outputs.push(out.clone());
        aux.push(a);
        cur = out;
    }
    let tape = Tape { input: x.clone(), outputs, aux, training: true };
    Ok((cur, tape))
}

/// Reverse pass over a training tape. Returns parameter gradients and
/// the gradient with respect to the network input.
pub fn backward<T: Float>(
    net: &Network<T>,
    tape: &Tape<T>,
    grad_out: &Tensor<T>,
) -> Result<(Grads<T>, Tensor<T>)> {
    if !tape.training {
        return Err(SmpError::Mode("backward requires a training-mode tape".into()));
    }
    let n_layers = net.layers.len();
    if n_layers == 0 {
        return Err(SmpError::Graph("empty network".into()));
    }
    let mut out_grads: Vec<Option<Tensor<T>>> = vec![None; n_layers];
    out_grads[n_layers - 1] = Some(grad_out.clone());
    let mut by_layer: Vec<Option<ParamGrad<T>>> = vec![None; n_layers];
    let mut grad_input: Option<Tensor<T>> = None;

    let route = |slot: &mut Option<Tensor<T>>, g: Tensor<T>| -> Result<()> {
        *slot = Some(match slot.take() {
            None => g,
            Some(acc) => acc.add(&g)?,
        });
        Ok(())
    };

    for i in (0..n_layers).rev() {
        let g = match out_grads[i].take() {
            Some(g) => g,
            None => continue, // output unused by any downstream layer
        };
        let input = if i == 0 { &tape.input } else { &tape.outputs[i - 1] };
        let gx = match (&net.layers[i], &tape.aux[i]) {
            (LayerKind::Conv(p), _) => {
                let (gx, gw, gb) = conv2d_bwd(input, p, &g)?;
                by_layer[i] = Some(ParamGrad::Conv { weight: gw, bias: gb });
                gx
            }
            (LayerKind::BatchNorm(bn), Aux::Bn(saved)) => {
                let (gx, ggamma, gbeta) = batchnorm_bwd(input, bn, saved, &g)?;
                by_layer[i] = Some(ParamGrad::Bn { gamma: ggamma, beta: gbeta });
                gx
            }
            (LayerKind::Relu, _) => relu_bwd(input, &g)?,
            (LayerKind::MaxPool, Aux::MaxPool(argmax)) => {
                maxpool2x2_bwd(input.shape(), argmax, &g)?
            }
            (LayerKind::Split(_) | LayerKind::Shrink(_), Aux::Sampled { window, loc }) => {
                shrink_bwd(&g, *window, *loc, input.shape())?
            }
            (LayerKind::Merge | LayerKind::Expand, Aux::Sampled { window, loc }) => {
                expand_bwd(&g, *window, *loc)?
            }
            (LayerKind::Upsample(f), _) => bilinear_upsample_bwd(input.shape(), *f, &g)?,
            (LayerKind::Pad(_), Aux::Pad { orig }) => crop_spatial(&g, orig.0, orig.1)?,
            (LayerKind::AddFrom(j), _) => {
                route(&mut out_grads[*j], g.clone())?;
                g
            }
            (kind, _) => {
                return Err(SmpError::Graph(format!(
                    "layer {i} ({}) has inconsistent tape state",
                    kind.name()
                )))
            }
        };
        if i == 0 {
            grad_input = Some(match grad_input.take() {
                None => gx,
                Some(acc) => acc.add(&gx)?,
            });
        } else {
            route(&mut out_grads[i - 1], gx)?;
        }
    }
    Ok((
        Grads { by_layer },
        grad_input.ok_or_else(|| SmpError::Graph("no gradient reached the input".into()))?,
    ))
}

/// Adam hyper-parameters. Weight decay is folded into the gradient
/// before the moment updates (classic L2 coupling).
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f32,
    pub weight_decay: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-5,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per parameter slot.
pub struct AdamState {
    pub cfg: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, net: &Network<f32>) -> Self {
        let sizes: Vec<usize> = param_slot_sizes(net);
        AdamState {
            cfg,
            step: 0,
            m: sizes.iter().map(|s| vec![0.0; *s]).collect(),
            v: sizes.iter().map(|s| vec![0.0; *s]).collect(),
        }
    }
}

fn param_slot_sizes(net: &Network<f32>) -> Vec<usize> {
    let mut sizes = Vec::new();
    for l in &net.layers {
        match l {
            LayerKind::Conv(c) => {
                sizes.push(c.weight.shape().len());
                if let Some(b) = &c.bias {
                    sizes.push(b.len());
                }
            }
            LayerKind::BatchNorm(b) => {
                sizes.push(b.gamma.len());
                sizes.push(b.beta.len());
            }
            _ => {}
        }
    }
    sizes
}

fn grad_slots<'a>(net: &Network<f32>, grads: &'a Grads<f32>) -> Result<Vec<Option<&'a [f32]>>> {
    let mut slots = Vec::new();
    for (i, l) in net.layers.iter().enumerate() {
        match (l, grads.by_layer.get(i).and_then(|g| g.as_ref())) {
            (LayerKind::Conv(c), Some(ParamGrad::Conv { weight, bias })) => {
                slots.push(Some(weight.data()));
                if c.bias.is_some() {
                    slots.push(bias.as_deref());
                }
            }
            (LayerKind::Conv(c), None) => {
                slots.push(None);
                if c.bias.is_some() {
                    slots.push(None);
                }
            }
            (LayerKind::BatchNorm(_), Some(ParamGrad::Bn { gamma, beta })) => {
                slots.push(Some(gamma.as_slice()));
                slots.push(Some(beta.as_slice()));
            }
            (LayerKind::BatchNorm(_), None) => {
                slots.push(None);
                slots.push(None);
            }
            (LayerKind::Conv(_) | LayerKind::BatchNorm(_), _) => {
                return Err(SmpError::Shape("gradient kind mismatch".into()))
            }
            _ => {}
        }
    }
    Ok(slots)
}

/// One Adam update over every trainable parameter. Layers without a
/// gradient entry (unreached by backward) still receive weight decay.
pub fn adam_step(net: &mut Network<f32>, grads: &Grads<f32>, state: &mut AdamState) -> Result<()> {
    let grad_slices: Vec<Option<Vec<f32>>> = grad_slots(net, grads)?
        .into_iter()
        .map(|s| s.map(|x| x.to_vec()))
        .collect();
    let mut params: Vec<&mut [f32]> = Vec::new();
    for l in &mut net.layers {
        match l {
            LayerKind::Conv(c) => {
                params.push(c.weight.data_mut());
                if let Some(b) = &mut c.bias {
                    params.push(b.as_mut_slice());
                }
            }
            LayerKind::BatchNorm(b) => {
                params.push(b.gamma.as_mut_slice());
                params.push(b.beta.as_mut_slice());
            }
            _ => {}
        }
    }
    if params.len() != state.m.len() || params.len() != grad_slices.len() {
        return Err(SmpError::Shape(format!(
            "parameter slot count mismatch: {} params, {} moments, {} grads",
            params.len(),
            state.m.len(),
            grad_slices.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c = state.cfg;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for (slot, param) in params.into_iter().enumerate() {
        if state.m[slot].len() != param.len() {
            return Err(SmpError::Shape("moment length mismatch".into()));
        }
        for (j, p) in param.iter_mut().enumerate() {
            let raw = grad_slices[slot].as_ref().map_or(0.0, |g| g[j]);
            let g = raw + c.weight_decay * *p;
            let m = &mut state.m[slot][j];
            let v = &mut state.v[slot][j];
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
    }
    Ok(())
}

/// Inference forward that fans the batches of the first split out to a
/// pool of `workers` threads. The matching merge is the barrier; the
/// result is bitwise-identical to `forward_eval` for any worker count.
pub fn forward_parallel<T: Float + Send + Sync>(
    net: &Network<T>,
    x: &Tensor<T>,
    workers: usize,
) -> Result<Tensor<T>> {
    if workers < 1 {
        return Err(SmpError::Arg("workers must be >= 1".into()));
    }
    let split_idx = net
        .layers
        .iter()
        .position(|l| matches!(l, LayerKind::Split(_)))
        .ok_or_else(|| SmpError::Graph("forward_parallel requires at least one split".into()))?;
    // matching merge, if any: depth counting over split/merge kinds
    let mut depth = 1i32;
    let mut merge_idx = None;
    for (i, l) in net.layers.iter().enumerate().skip(split_idx + 1) {
        match l {
            LayerKind::Split(_) => depth += 1,
            LayerKind::Merge => {
                depth -= 1;
                if depth == 0 {
                    merge_idx = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let seg_end = merge_idx.unwrap_or(net.layers.len());

    let mut outputs: Vec<Option<Tensor<T>>> = vec![None; net.layers.len()];
    let after_split = run_eval_range(net, x.clone(), 0..split_idx + 1, None, &mut outputs)?;
    let pre_batches = x.shape().n;

    let n_tasks = after_split.shape().n;
    let results: Mutex<Vec<Option<Tensor<T>>>> = Mutex::new(vec![None; n_tasks]);
    let next_task = AtomicUsize::new(0);
    let first_err: Mutex<Option<SmpError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n_tasks) {
            scope.spawn(|| loop {
                let b = next_task.fetch_add(1, Ordering::Relaxed);
                if b >= n_tasks {
                    break;
                }
                let run = || -> Result<Tensor<T>> {
                    let batch = after_split.batch_select(b)?;
                    let mut local: Vec<Option<Tensor<T>>> = vec![None; net.layers.len()];
                    // skips into the segment see this worker's own batch
                    local[split_idx] = Some(batch.clone());
                    run_eval_range(net, batch, split_idx + 1..seg_end, None, &mut local)
                };
                match run() {
                    Ok(out) => results.lock().unwrap()[b] = Some(out),
                    Err(e) => {
                        *first_err.lock().unwrap() = Some(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_err.into_inner().unwrap() {
        return Err(e);
    }
    let parts: Vec<Tensor<T>> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.ok_or_else(|| SmpError::Graph("worker produced no result".into())))
        .collect::<Result<_>>()?;
    let mut cur = Tensor::stack_batches(&parts)?;

    if let Some(m) = merge_idx {
        let window = match net.layers[split_idx] {
            LayerKind::Split(w) => w,
            _ => unreachable!(),
        };
        let meta = SplitMeta { window, pre_batches };
        cur = merge_fwd(&cur, &meta)?;
        outputs[m] = Some(cur.clone());
        cur = run_eval_range(net, cur, m + 1..net.layers.len(), None, &mut outputs)?;
    }
    Ok(cur)
}

/// Reassemble a split network's output by running the shrink variant for
/// every location combination and summing the expanded sparse outputs.
pub fn full_split_oracle<T: Float>(net: &Network<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    if net.training {
        return Err(SmpError::Validity(
            "full-split oracle requires eval-mode batch normalization".into(),
        ));
    }
    let sites = net.pool_sites();
    if sites.is_empty() {
        return forward_eval(net, x);
    }
    let mut combo: Vec<SampleLoc> = vec![SampleLoc { k: 0, l: 0 }; sites.len()];
    let mut acc: Option<Tensor<T>> = None;
    loop {
        let out = forward_shrink(net, x, &combo)?;
        acc = Some(match acc {
            None => out,
            Some(a) => a.add(&out)?,
        });
        // odometer over (k, l) per site
        let mut carry = true;
        for (slot, win) in combo.iter_mut().zip(&sites) {
            slot.k += 1;
            if slot.k < win.w {
                carry = false;
                break;
            }
            slot.k = 0;
            slot.l += 1;
            if slot.l < win.h {
                carry = false;
                break;
            }
            slot.l = 0;
        }
        if carry {
            break;
        }
    }
    Ok(acc.expect("at least one combination"))
}
