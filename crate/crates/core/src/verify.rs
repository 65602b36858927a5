//! Randomized verification suites: round-trip identities, adjointness,
//! finite-difference gradient checks, the full-split oracle, and
//! parallel-execution determinism. Each check returns a named result so
//! callers can print one line per check.

use crate::error::{Result, SmpError};
use crate::net::{
    backward, forward_eval, forward_parallel, forward_train, full_split_oracle, Grads, LayerKind,
    LocSource, Network, ParamGrad,
};
use crate::nn::{softmax_xent_bwd, softmax_xent_fwd, BatchNorm, Conv2d};
use crate::smp::{
    expand_bwd, expand_fwd, merge_fwd, shrink_bwd, shrink_fwd, split_bwd, split_fwd, SampleLoc,
    Window,
};
use crate::tensor::{fill_uniform, Shape4, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            detail,
        }
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Order-canonical dot product: each f32 product is exact in f64, the
/// products are sorted before summation, so permuted layouts of the same
/// value multiset give bitwise-identical results.
pub fn exact_dot(a: &Tensor<f32>, b: &Tensor<f32>) -> f64 {
    let mut products: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| *x as f64 * *y as f64)
        .collect();
    products.sort_by(f64::total_cmp);
    products.iter().sum()
}

fn random_case(rng: &mut ChaCha8Rng, max_win: usize, max_tiles: usize) -> (Tensor<f32>, Window) {
    let win = Window {
        w: rng.gen_range(1..=max_win),
        h: rng.gen_range(1..=max_win),
    };
    let n = rng.gen_range(1..=3);
    let c = rng.gen_range(1..=4);
    let h = win.h * rng.gen_range(1..=max_tiles);
    let w = win.w * rng.gen_range(1..=max_tiles);
    let shape = Shape4::new(n, c, h, w).expect("positive extents");
    let x = fill_uniform(shape, rng, -2.0, 2.0).expect("valid range");
    (x, win)
}

/// merge(split(x)) == x bitwise, including a nested two-deep variant.
pub fn verify_roundtrip(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let single = 1000;
    let nested = 200;
    for case in 0..single {
        let (x, win) = random_case(&mut rng, 4, 16);
        let (b, meta) = match split_fwd(&x, win) {
            Ok(v) => v,
            Err(e) => return CheckResult::new("roundtrip", false, format!("case {case}: {e}")),
        };
        let back = match merge_fwd(&b, &meta) {
            Ok(v) => v,
            Err(e) => return CheckResult::new("roundtrip", false, format!("case {case}: {e}")),
        };
        if back.data() != x.data() || back.shape() != x.shape() {
            return CheckResult::new("roundtrip", false, format!("case {case}: not bitwise equal"));
        }
    }
    for case in 0..nested {
        let (x, w1) = random_case(&mut rng, 3, 6);
        let w2 = Window {
            w: rng.gen_range(1..=3),
            h: rng.gen_range(1..=3),
        };
        let s = x.shape();
        // regenerate extents divisible by both windows
        let shape = Shape4::new(s.n, s.c, w1.h * w2.h * 4, w1.w * w2.w * 4).expect("positive");
        let x: Tensor<f32> = fill_uniform(shape, &mut rng, -2.0, 2.0).expect("valid range");
        let run = || -> Result<bool> {
            let (b1, m1) = split_fwd(&x, w1)?;
            let (b2, m2) = split_fwd(&b1, w2)?;
            let back = merge_fwd(&merge_fwd(&b2, &m2)?, &m1)?;
            Ok(back.data() == x.data() && back.shape() == x.shape())
        };
        match run() {
            Ok(true) => {}
            Ok(false) => {
                return CheckResult::new("roundtrip", false, format!("nested case {case}: mismatch"))
            }
            Err(e) => return CheckResult::new("roundtrip", false, format!("nested case {case}: {e}")),
        }
    }
    CheckResult::new(
        "roundtrip",
        true,
        format!("{single} single + {nested} nested cases bitwise equal"),
    )
}

/// shrink(x, loc) equals the corresponding batch group of split(x), for
/// every location, and expand(shrink(x)) restores values at sampled
/// positions with zeros elsewhere.
pub fn verify_shrink(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 500;
    for case in 0..cases {
        let (x, win) = random_case(&mut rng, 4, 8);
        let run = || -> Result<Option<String>> {
            let (batches, _) = split_fwd(&x, win)?;
            let n = x.shape().n;
            for k in 0..win.w {
                for l in 0..win.h {
                    let loc = SampleLoc::checked(k, l, win)?;
                    let shrunk = shrink_fwd(&x, win, loc)?;
                    let off = loc.batch_offset(win);
                    for b in 0..n {
                        let want = batches.batch_select(b * win.area() + off)?;
                        let got = shrunk.batch_select(b)?;
                        if got.data() != want.data() {
                            return Ok(Some(format!("loc ({k},{l}) batch {b} differs")));
                        }
                    }
                    let sparse = expand_fwd(&shrunk, win, loc)?;
                    let s = x.shape();
                    for b in 0..s.n {
                        for c in 0..s.c {
                            for r in 0..s.h {
                                for col in 0..s.w {
                                    let sampled = col % win.w == k && r % win.h == l;
                                    let want = if sampled { x.get(b, c, r, col) } else { 0.0 };
                                    if sparse.get(b, c, r, col) != want {
                                        return Ok(Some(format!(
                                            "expand loc ({k},{l}) at ({b},{c},{r},{col})"
                                        )));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok(None)
        };
        match run() {
            Ok(None) => {}
            Ok(Some(msg)) => return CheckResult::new("shrink", false, format!("case {case}: {msg}")),
            Err(e) => return CheckResult::new("shrink", false, format!("case {case}: {e}")),
        }
    }
    CheckResult::new("shrink", true, format!("{cases} cases, all windows and locations"))
}

/// <op(x), g> == <x, op_bwd(g)> exactly (order-canonical f64 sums) for
/// split, merge, shrink and expand.
pub fn verify_adjointness(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 200;
    for case in 0..cases {
        let (x, win) = random_case(&mut rng, 4, 8);
        let mut run = || -> Result<Option<&'static str>> {
            let (y, meta) = split_fwd(&x, win)?;
            let g = fill_uniform(y.shape(), &mut rng, -1.0, 1.0)?;
            if exact_dot(&y, &g) != exact_dot(&x, &split_bwd(&g, &meta)?) {
                return Ok(Some("split"));
            }
            let loc = SampleLoc::checked(rng.gen_range(0..win.w), rng.gen_range(0..win.h), win)?;
            let y = shrink_fwd(&x, win, loc)?;
            let g = fill_uniform(y.shape(), &mut rng, -1.0, 1.0)?;
            if exact_dot(&y, &g) != exact_dot(&x, &shrink_bwd(&g, win, loc, x.shape())?) {
                return Ok(Some("shrink"));
            }
            let y = expand_fwd(&shrink_fwd(&x, win, loc)?, win, loc)?;
            let g = fill_uniform(y.shape(), &mut rng, -1.0, 1.0)?;
            let small = shrink_fwd(&x, win, loc)?;
            if exact_dot(&y, &g)
                != exact_dot(&small, &expand_bwd(&g, win, loc)?)
            {
                return Ok(Some("expand"));
            }
            Ok(None)
        };
        match run() {
            Ok(None) => {}
            Ok(Some(op)) => {
                return CheckResult::new("adjointness", false, format!("case {case}: {op} not adjoint"))
            }
            Err(e) => return CheckResult::new("adjointness", false, format!("case {case}: {e}")),
        }
    }
    CheckResult::new("adjointness", true, format!("{cases} cases, exact equality"))
}

fn conv64(
    rng: &mut ChaCha8Rng,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    stride: usize,
    dilation: usize,
    padding: usize,
    bias: bool,
) -> LayerKind<f64> {
    let shape = Shape4::new(out_ch, in_ch, k, k).expect("valid weight shape");
    let weight = fill_uniform::<f64>(shape, rng, -0.5, 0.5).expect("valid range");
    let bias = bias.then(|| {
        (0..out_ch)
            .map(|_| rng.gen_range(-0.2..0.2))
            .collect::<Vec<f64>>()
    });
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

fn bn64(rng: &mut ChaCha8Rng, channels: usize) -> LayerKind<f64> {
    let mut bn = BatchNorm::<f64>::new(channels);
    for g in bn.gamma.iter_mut() {
        *g = rng.gen_range(0.5..1.5);
    }
    for b in bn.beta.iter_mut() {
        *b = rng.gen_range(-0.3..0.3);
    }
    LayerKind::BatchNorm(bn)
}

fn params_mut(net: &mut Network<f64>) -> Vec<&mut [f64]> {
    let mut out = Vec::new();
    for l in &mut net.layers {
        match l {
            LayerKind::Conv(c) => {
                out.push(c.weight.data_mut());
                if let Some(b) = &mut c.bias {
                    out.push(b.as_mut_slice());
                }
            }
            LayerKind::BatchNorm(b) => {
                out.push(b.gamma.as_mut_slice());
                out.push(b.beta.as_mut_slice());
            }
            _ => {}
        }
    }
    out
}

fn grad_slots64(net: &Network<f64>, grads: &Grads<f64>) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (l, g) in net.layers.iter().zip(&grads.by_layer) {
        match (l, g) {
            (LayerKind::Conv(c), Some(ParamGrad::Conv { weight, bias })) => {
                out.push(weight.data().to_vec());
                if c.bias.is_some() {
                    out.push(bias.clone().unwrap_or_default());
                }
            }
            (LayerKind::Conv(c), None) => {
                out.push(vec![0.0; c.weight.shape().len()]);
                if let Some(b) = &c.bias {
                    out.push(vec![0.0; b.len()]);
                }
            }
            (LayerKind::BatchNorm(_), Some(ParamGrad::Bn { gamma, beta })) => {
                out.push(gamma.clone());
                out.push(beta.clone());
            }
            (LayerKind::BatchNorm(b), None) => {
                out.push(vec![0.0; b.channels]);
                out.push(vec![0.0; b.channels]);
            }
            _ => {}
        }
    }
    out
}

enum LossKind {
    /// Scalar is <output, r> for a fixed random r.
    Dot(Tensor<f64>),
    /// Per-pixel softmax cross-entropy against fixed labels.
    Xent(Vec<u8>),
}

fn scalar_loss(
    net: &mut Network<f64>,
    x: &Tensor<f64>,
    locs: &[SampleLoc],
    loss: &LossKind,
) -> Result<f64> {
    let (out, _) = forward_train(net, x, LocSource::Fixed(locs))?;
    match loss {
        LossKind::Dot(r) => out.dot(r),
        LossKind::Xent(labels) => Ok(softmax_xent_fwd(&out, labels)?.0),
    }
}

struct GradCheckCase {
    name: &'static str,
    net: Network<f64>,
    x: Tensor<f64>,
    locs: Vec<SampleLoc>,
    loss: LossKind,
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1.0f64.max(a.abs()).max(n.abs())
}

fn gradcheck_case(case: &mut GradCheckCase, rng: &mut ChaCha8Rng) -> Result<Option<String>> {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-6;
    let (out, tape) = forward_train(&mut case.net, &case.x, LocSource::Fixed(&case.locs))?;
    let grad_out = match &case.loss {
        LossKind::Dot(r) => r.clone(),
        LossKind::Xent(labels) => {
            let (_, probs) = softmax_xent_fwd(&out, labels)?;
            softmax_xent_bwd(&probs, labels)?
        }
    };
    let (grads, grad_input) = backward(&case.net, &tape, &grad_out)?;
    let analytic_params = grad_slots64(&case.net, &grads);

    // probe a random subset of parameter coordinates per slot
    let n_slots = analytic_params.len();
    for slot in 0..n_slots {
        let len = analytic_params[slot].len();
        let probes = len.min(4);
        for _ in 0..probes {
            let j = rng.gen_range(0..len);
            let orig = params_mut(&mut case.net)[slot][j];
            params_mut(&mut case.net)[slot][j] = orig + H;
            let lp = scalar_loss(&mut case.net, &case.x, &case.locs, &case.loss)?;
            params_mut(&mut case.net)[slot][j] = orig - H;
            let lm = scalar_loss(&mut case.net, &case.x, &case.locs, &case.loss)?;
            params_mut(&mut case.net)[slot][j] = orig;
            let numeric = (lp - lm) / (2.0 * H);
            let analytic = analytic_params[slot][j];
            if rel_err(analytic, numeric) > TOL {
                return Ok(Some(format!(
                    "{}: param slot {slot} idx {j}: analytic {analytic:.3e} numeric {numeric:.3e}",
                    case.name
                )));
            }
        }
    }

    // probe input coordinates
    let len = case.x.shape().len();
    for _ in 0..len.min(8) {
        let j = rng.gen_range(0..len);
        let orig = case.x.data()[j];
        case.x.data_mut()[j] = orig + H;
        let lp = scalar_loss(&mut case.net, &case.x, &case.locs, &case.loss)?;
        case.x.data_mut()[j] = orig - H;
        let lm = scalar_loss(&mut case.net, &case.x, &case.locs, &case.loss)?;
        case.x.data_mut()[j] = orig;
        let numeric = (lp - lm) / (2.0 * H);
        let analytic = grad_input.data()[j];
        if rel_err(analytic, numeric) > TOL {
            return Ok(Some(format!(
                "{}: input idx {j}: analytic {analytic:.3e} numeric {numeric:.3e}",
                case.name
            )));
        }
    }
    Ok(None)
}

fn gradcheck_cases(rng: &mut ChaCha8Rng) -> Result<Vec<GradCheckCase>> {
    let mut cases = Vec::new();
    let x_shape = Shape4::new(2, 3, 8, 8)?;
    let input = |rng: &mut ChaCha8Rng| fill_uniform::<f64>(x_shape, rng, -1.0, 1.0);
    let dot_loss = |rng: &mut ChaCha8Rng, net: &mut Network<f64>, x: &Tensor<f64>, locs: &[SampleLoc]| -> Result<LossKind> {
        let (out, _) = forward_train(net, x, LocSource::Fixed(locs))?;
        Ok(LossKind::Dot(fill_uniform(out.shape(), rng, -1.0, 1.0)?))
    };

    // plain conv variants: stride, dilation, padding, bias
    for (stride, dilation, padding, bias) in [(1, 1, 1, false), (2, 1, 0, true), (1, 2, 2, false)] {
        let mut net = Network {
            layers: vec![conv64(rng, 3, 4, 3, stride, dilation, padding, bias)],
            classes: 4,
            training: true,
        };
        let x = input(rng)?;
        let loss = dot_loss(rng, &mut net, &x, &[])?;
        cases.push(GradCheckCase { name: "conv", net, x, locs: vec![], loss });
    }

    // conv + batchnorm (train mode) + relu
    {
        let mut net = Network {
            layers: vec![conv64(rng, 3, 4, 3, 1, 1, 1, false), bn64(rng, 4), LayerKind::Relu],
            classes: 4,
            training: true,
        };
        let x = input(rng)?;
        let loss = dot_loss(rng, &mut net, &x, &[])?;
        cases.push(GradCheckCase { name: "conv-bn-relu", net, x, locs: vec![], loss });
    }

    // max pooling
    {
        let mut net = Network {
            layers: vec![conv64(rng, 3, 4, 3, 1, 1, 1, false), LayerKind::MaxPool],
            classes: 4,
            training: true,
        };
        let x = input(rng)?;
        let loss = dot_loss(rng, &mut net, &x, &[])?;
        cases.push(GradCheckCase { name: "maxpool", net, x, locs: vec![], loss });
    }

    // split/merge pair (runs as shrink/expand in training mode)
    {
        let win = Window { w: 2, h: 2 };
        let mut net = Network {
            layers: vec![
                conv64(rng, 3, 4, 3, 1, 1, 1, false),
                LayerKind::Split(win),
                conv64(rng, 4, 4, 3, 1, 1, 1, false),
                LayerKind::Merge,
            ],
            classes: 4,
            training: true,
        };
        let x = input(rng)?;
        let locs = vec![SampleLoc::checked(1, 0, win)?];
        let loss = dot_loss(rng, &mut net, &x, &locs)?;
        cases.push(GradCheckCase { name: "split-merge", net, x, locs, loss });
    }

    // explicit shrink/expand pair
    {
        let win = Window { w: 2, h: 2 };
        let mut net = Network {
            layers: vec![
                LayerKind::Shrink(win),
                conv64(rng, 3, 3, 3, 1, 1, 1, false),
                LayerKind::Expand,
            ],
            classes: 3,
            training: true,
        };
        let x = input(rng)?;
        let locs = vec![SampleLoc::checked(0, 1, win)?];
        let loss = dot_loss(rng, &mut net, &x, &locs)?;
        cases.push(GradCheckCase { name: "shrink-expand", net, x, locs, loss });
    }

    // bilinear upsample
    {
        let mut net = Network {
            layers: vec![
                LayerKind::MaxPool,
                conv64(rng, 3, 4, 3, 1, 1, 1, false),
                LayerKind::Upsample(2),
            ],
            classes: 4,
            training: true,
        };
        let x = input(rng)?;
        let loss = dot_loss(rng, &mut net, &x, &[])?;
        cases.push(GradCheckCase { name: "upsample", net, x, locs: vec![], loss });
    }

    // residual skip
    {
        let mut net = Network {
            layers: vec![
                conv64(rng, 3, 4, 3, 1, 1, 1, false),
                conv64(rng, 4, 4, 3, 1, 1, 1, false),
                bn64(rng, 4),
                LayerKind::AddFrom(0),
                LayerKind::Relu,
            ],
            classes: 4,
            training: true,
        };
        let x = input(rng)?;
        let loss = dot_loss(rng, &mut net, &x, &[])?;
        cases.push(GradCheckCase { name: "residual", net, x, locs: vec![], loss });
    }

    // end-to-end: small split network with cross-entropy loss
    {
        let win = Window { w: 2, h: 2 };
        let net = Network {
            layers: vec![
                conv64(rng, 3, 4, 3, 1, 1, 1, false),
                bn64(rng, 4),
                LayerKind::Relu,
                LayerKind::Split(win),
                conv64(rng, 4, 3, 3, 1, 1, 1, true),
                LayerKind::Merge,
            ],
            classes: 3,
            training: true,
        };
        let x = input(rng)?;
        let locs = vec![SampleLoc::checked(1, 1, win)?];
        let s = x.shape();
        let labels: Vec<u8> = (0..s.n * s.h * s.w)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    255
                } else {
                    rng.gen_range(0..3)
                }
            })
            .collect();
        cases.push(GradCheckCase { name: "xent-end-to-end", net, x, locs, loss: LossKind::Xent(labels) });
    }
    Ok(cases)
}

/// Central-difference gradient checks (f64, step 1e-5) over every layer
/// kind plus an end-to-end cross-entropy network.
pub fn verify_gradcheck(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = 20;
    let mut checked = 0;
    for round in 0..rounds {
        let mut cases = match gradcheck_cases(&mut rng) {
            Ok(c) => c,
            Err(e) => return CheckResult::new("gradcheck", false, format!("setup: {e}")),
        };
        for case in cases.iter_mut() {
            match gradcheck_case(case, &mut rng) {
                Ok(None) => checked += 1,
                Ok(Some(msg)) => {
                    return CheckResult::new("gradcheck", false, format!("round {round}: {msg}"))
                }
                Err(e) => {
                    return CheckResult::new(
                        "gradcheck",
                        false,
                        format!("round {round}: {}: {e}", case.name),
                    )
                }
            }
        }
    }
    CheckResult::new("gradcheck", true, format!("{checked} cases within tolerance"))
}

fn oracle_net(rng: &mut ChaCha8Rng, sites: usize) -> Network<f32> {
    let win = Window { w: 2, h: 2 };
    let mut layers = vec![conv32(rng, 3, 4, 3), LayerKind::Relu];
    for _ in 0..sites {
        layers.push(LayerKind::Split(win));
        layers.push(conv32(rng, 4, 4, 3));
        layers.push(LayerKind::Relu);
    }
    layers.push(conv32(rng, 4, 2, 1));
    for _ in 0..sites {
        layers.push(LayerKind::Merge);
    }
    Network { layers, classes: 2, training: false }
}

fn conv32(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, k: usize) -> LayerKind<f32> {
    let shape = Shape4::new(out_ch, in_ch, k, k).expect("valid weight shape");
    let weight = fill_uniform::<f32>(shape, rng, -0.5, 0.5).expect("valid range");
    LayerKind::Conv(
        Conv2d::new(in_ch, out_ch, (k, k), (1, 1), (1, 1), (k / 2, k / 2), weight, None)
            .expect("consistent conv config"),
    )
}

/// Build a random-weight toy net with `splits` nested 2x2 split sites
/// and return the max abs diff between the assembled full-split oracle
/// and the split/merge forward on a 64x64 input.
pub fn oracle_equiv(splits: usize, seed: u64) -> Result<f32> {
    if splits == 0 || splits > 6 {
        return Err(SmpError::Arg("splits must be in 1..=6".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = oracle_net(&mut rng, splits);
    let x = fill_uniform(Shape4::new(1, 3, 64, 64)?, &mut rng, -1.0, 1.0)?;
    let want = forward_eval(&net, &x)?;
    let got = full_split_oracle(&net, &x)?;
    want.max_abs_diff(&got)
}

/// Summing the sparse outputs of every shrink-location combination
/// reproduces the split/merge forward within 1e-5.
pub fn verify_oracle(max_sites: usize, seed: u64) -> CheckResult {
    let mut details = Vec::new();
    for sites in 1..=max_sites {
        match oracle_equiv(sites, seed.wrapping_add(sites as u64)) {
            Ok(diff) if diff <= 1e-5 => details.push(format!("L={sites} max diff {diff:.2e}")),
            Ok(diff) => {
                return CheckResult::new(
                    "oracle",
                    false,
                    format!("L={sites}: max diff {diff:.2e} exceeds 1e-5"),
                )
            }
            Err(e) => return CheckResult::new("oracle", false, format!("L={sites}: {e}")),
        }
    }
    CheckResult::new("oracle", true, details.join(", "))
}

/// `forward_parallel` is bitwise-identical to `forward_eval` for worker
/// counts 1, 2, 4 and 8.
pub fn verify_parallel(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = oracle_net(&mut rng, 2);
    let shape = match Shape4::new(1, 3, 32, 32) {
        Ok(s) => s,
        Err(e) => return CheckResult::new("parallel", false, e.to_string()),
    };
    let x = match fill_uniform(shape, &mut rng, -1.0, 1.0) {
        Ok(x) => x,
        Err(e) => return CheckResult::new("parallel", false, e.to_string()),
    };
    let want = match forward_eval(&net, &x) {
        Ok(w) => w,
        Err(e) => return CheckResult::new("parallel", false, e.to_string()),
    };
    for workers in [1, 2, 4, 8] {
        match forward_parallel(&net, &x, workers) {
            Ok(got) if got.data() == want.data() && got.shape() == want.shape() => {}
            Ok(_) => {
                return CheckResult::new(
                    "parallel",
                    false,
                    format!("{workers} workers: output differs from sequential"),
                )
            }
            Err(e) => return CheckResult::new("parallel", false, format!("{workers} workers: {e}")),
        }
    }
    CheckResult::new("parallel", true, "workers 1/2/4/8 bitwise equal".into())
}

/// Run a named suite. Suites: roundtrip (round-trip, shrink consistency,
/// adjointness), gradcheck, oracle, parallel, all.
pub fn run_suite(suite: &str, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    match suite {
        "roundtrip" => {
            out.push(verify_roundtrip(seed));
            out.push(verify_shrink(seed.wrapping_add(1)));
            out.push(verify_adjointness(seed.wrapping_add(2)));
        }
        "gradcheck" => out.push(verify_gradcheck(seed)),
        "oracle" => out.push(verify_oracle(3, seed)),
        "parallel" => out.push(verify_parallel(seed)),
        "all" => {
            out.extend(run_suite("roundtrip", seed)?);
            out.extend(run_suite("gradcheck", seed)?);
            out.extend(run_suite("oracle", seed)?);
            out.extend(run_suite("parallel", seed)?);
        }
        other => return Err(SmpError::Arg(format!("unknown suite '{other}'"))),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let results = run_suite("all", 7).unwrap();
        assert_eq!(results.len(), 6);
        for r in &results {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suite("bogus", 0).is_err());
    }

    #[test]
    fn exact_dot_is_permutation_invariant() {
        let shape = Shape4::new(1, 1, 2, 3).unwrap();
        let a = Tensor::new(shape, vec![0.1, -2.0, 3.5, 0.7, -0.3, 1.1]).unwrap();
        let b = Tensor::new(shape, vec![1.0, 0.5, -0.25, 2.0, 4.0, -1.0]).unwrap();
        let fwd = exact_dot(&a, &b);
        let rev_a = Tensor::new(shape, a.data().iter().rev().copied().collect()).unwrap();
        let rev_b = Tensor::new(shape, b.data().iter().rev().copied().collect()).unwrap();
        assert_eq!(fwd.to_bits(), exact_dot(&rev_a, &rev_b).to_bits());
    }
}
