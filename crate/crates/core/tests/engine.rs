//! Engine-level integration tests: network execution, optimizer
//! behavior, architecture builders and the cost/receptive-field
//! analyzers.

use smp_core::analysis::{count_flops, receptive_field};
use smp_core::net::{
    adam_step, backward, forward_eval, forward_parallel, forward_train, full_split_oracle,
    AdamConfig, AdamState, LayerKind, LocSource, Network,
};
use smp_core::nn::Conv2d;
use smp_core::smp::{SampleLoc, Window};
use smp_core::tensor::{fill_uniform, random_uniform, Shape4, Tensor};
use smp_core::train::{train_toy, TrainConfig};
use smp_core::zoo::{build_analysis_net, build_toy_baseline, build_toy_smp, ArchConfig, ArchVariant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn input(seed: u64, n: usize, c: usize, h: usize, w: usize) -> Tensor<f32> {
    random_uniform(Shape4::new(n, c, h, w).unwrap(), seed, -1.0, 1.0).unwrap()
}

#[test]
fn split_net_with_identity_weights_round_trips() {
    // a net that only splits and merges is the identity
    let net: Network<f32> = Network {
        layers: vec![
            LayerKind::Split(Window { w: 2, h: 2 }),
            LayerKind::Split(Window { w: 3, h: 1 }),
            LayerKind::Merge,
            LayerKind::Merge,
        ],
        classes: 3,
        training: false,
    };
    let x = input(0, 2, 3, 4, 12);
    let y = forward_eval(&net, &x).unwrap();
    assert_eq!(y, x);
}

#[test]
fn dilated_and_split_variants_share_arithmetic() {
    // with shared conv2 weights, the split net's batch (k,l) output is
    // the dilated net's output subsampled at phase (k,l), bitwise
    let dilated = build_analysis_net(ArchVariant::DilatedNet, 9);
    let split = build_analysis_net(ArchVariant::SplitNet, 9);
    let x = input(1, 1, 3, 8, 8);
    let yd = forward_eval(&dilated, &x).unwrap();
    let ys = forward_eval(&split, &x).unwrap();
    assert_eq!(ys.shape().n, 4);
    for k in 0..2 {
        for l in 0..2 {
            let batch = ys.batch_select(k * 2 + l).unwrap();
            let s = batch.shape();
            for c in 0..s.c {
                for r in 0..s.h {
                    for col in 0..s.w {
                        assert_eq!(
                            batch.get(0, c, r, col),
                            yd.get(0, c, 2 * r + l, 2 * col + k),
                            "mismatch at k={k} l={l} c={c} r={r} col={col}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn shrink_at_origin_tracks_the_maxpool_variant_geometry() {
    // the split net run in shrink mode at (0,0) has the same output
    // extents as the max-pool variant
    let mp = build_analysis_net(ArchVariant::MaxPoolNet, 2);
    let sp = build_analysis_net(ArchVariant::SplitNet, 2);
    let x = input(3, 1, 3, 16, 16);
    let ym = forward_eval(&mp, &x).unwrap();
    let ys = smp_core::net::forward_shrink(&sp, &x, &[SampleLoc { k: 0, l: 0 }]).unwrap();
    assert_eq!(ym.shape(), ys.shape());
}

#[test]
fn flop_report_scales_with_batches_after_split() {
    let net = build_analysis_net(ArchVariant::SplitNet, 0);
    let shape = Shape4::new(1, 3, 64, 64).unwrap();
    let report = count_flops(&net, shape, "split").unwrap();
    assert_eq!(report.layers[2].batches, 4);
    // conv on 4 batches of quarter extent costs what one full map costs
    let full = count_flops(&build_analysis_net(ArchVariant::DilatedNet, 0), shape, "dilated").unwrap();
    assert_eq!(report.total_gflops, full.total_gflops);
}

#[test]
fn receptive_field_traces_stop_at_seven_for_all_three_variants() {
    for v in [ArchVariant::MaxPoolNet, ArchVariant::DilatedNet, ArchVariant::SplitNet] {
        let report = receptive_field(&build_analysis_net(v, 0), "m").unwrap();
        assert_eq!(report.final_rf(), (7, 7));
    }
}

#[test]
fn merge_restores_the_jump() {
    let net = build_toy_smp(&ArchConfig::default()).unwrap();
    let report = receptive_field(&net, "toy_smp").unwrap();
    assert_eq!(report.layers.last().unwrap().jump, (1, 1));
}

#[test]
fn parallel_inference_matches_sequential_on_residual_nets() {
    // regression: residual skips that reference the split output itself
    let net = build_toy_smp(&ArchConfig {
        widths: [6, 8, 10],
        ..ArchConfig::default()
    })
    .unwrap();
    let x = input(7, 1, 3, 32, 32);
    let want = forward_eval(&net, &x).unwrap();
    for workers in [1, 2, 4, 8] {
        let got = forward_parallel(&net, &x, workers).unwrap();
        assert_eq!(got, want, "workers {workers}");
    }
    assert!(forward_parallel(&net, &x, 0).is_err());
}

#[test]
fn oracle_matches_toy_smp_inference() {
    let mut net = build_toy_smp(&ArchConfig {
        widths: [4, 6, 8],
        ..ArchConfig::default()
    })
    .unwrap();
    let x = input(5, 1, 3, 16, 16);
    let want = forward_eval(&net, &x).unwrap();
    let got = full_split_oracle(&net, &x).unwrap();
    assert!(want.max_abs_diff(&got).unwrap() <= 1e-5);
    net.training = true;
    assert!(full_split_oracle(&net, &x).is_err());
}

#[test]
fn training_forward_requires_training_mode() {
    let mut net = build_toy_smp(&ArchConfig::default()).unwrap();
    let x = input(0, 1, 3, 16, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(forward_train(&mut net, &x, LocSource::Rng(&mut rng)).is_err());
    net.training = true;
    let (out, tape) = forward_train(&mut net, &x, LocSource::Rng(&mut rng)).unwrap();
    assert_eq!(out.shape().h, 16);
    let grad = Tensor::full(out.shape(), 1.0f32);
    let (grads, grad_input) = backward(&net, &tape, &grad).unwrap();
    assert_eq!(grad_input.shape(), x.shape());
    assert_eq!(grads.by_layer.len(), net.layers.len());
}

#[test]
fn toy_param_counts_match() {
    for (widths, blocks, classes) in [([16, 32, 64], 1, 4), ([8, 8, 8], 2, 3)] {
        let cfg = ArchConfig {
            widths,
            blocks,
            classes,
            ..ArchConfig::default()
        };
        let smp = build_toy_smp(&cfg).unwrap();
        let base = build_toy_baseline(&cfg).unwrap();
        assert_eq!(smp.param_count(), base.param_count());
    }
}

#[test]
fn adam_weight_decay_shrinks_params_with_zero_grads() {
    let mut net = build_toy_smp(&ArchConfig {
        widths: [4, 4, 4],
        ..ArchConfig::default()
    })
    .unwrap();
    let cfg = AdamConfig {
        lr: 0.01,
        weight_decay: 0.1,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(cfg, &net);
    let grads = smp_core::net::Grads {
        by_layer: vec![None; net.layers.len()],
    };
    let before: f32 = match &net.layers[0] {
        LayerKind::Conv(c) => c.weight.data().iter().map(|v| v * v).sum(),
        _ => panic!("layer 0 is a conv"),
    };
    for _ in 0..10 {
        adam_step(&mut net, &grads, &mut state).unwrap();
    }
    let after: f32 = match &net.layers[0] {
        LayerKind::Conv(c) => c.weight.data().iter().map(|v| v * v).sum(),
        _ => unreachable!(),
    };
    assert!(after < before, "decay must shrink weights: {after} vs {before}");
}

#[test]
fn adam_constant_gradient_moves_at_learning_rate() {
    // with constant grad and no decay, the bias-corrected step is -lr
    let weight = Tensor::full(Shape4::new(1, 1, 1, 1).unwrap(), 2.0f32);
    let conv = Conv2d::new(1, 1, (1, 1), (1, 1), (1, 1), (0, 0), weight, None).unwrap();
    let mut net = Network {
        layers: vec![LayerKind::Conv(conv)],
        classes: 1,
        training: true,
    };
    let cfg = AdamConfig {
        lr: 0.5,
        weight_decay: 0.0,
        eps: 0.0,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(cfg, &net);
    let grads = smp_core::net::Grads {
        by_layer: vec![Some(smp_core::net::ParamGrad::Conv {
            weight: Tensor::full(Shape4::new(1, 1, 1, 1).unwrap(), 3.0f32),
            bias: None,
        })],
    };
    adam_step(&mut net, &grads, &mut state).unwrap();
    let w = match &net.layers[0] {
        LayerKind::Conv(c) => c.weight.get(0, 0, 0, 0),
        _ => unreachable!(),
    };
    assert!((w - 1.5).abs() < 1e-6, "got {w}");
}

#[test]
fn bn_running_stats_update_only_in_training() {
    let cfg = ArchConfig {
        widths: [4, 4, 4],
        ..ArchConfig::default()
    };
    let mut net = build_toy_smp(&cfg).unwrap();
    let x = input(1, 1, 3, 16, 16);
    let stats = |net: &Network<f32>| -> Vec<f32> {
        net.layers
            .iter()
            .filter_map(|l| match l {
                LayerKind::BatchNorm(b) => Some(b.running_mean.clone()),
                _ => None,
            })
            .flatten()
            .collect()
    };
    let before = stats(&net);
    forward_eval(&net, &x).unwrap();
    assert_eq!(stats(&net), before);
    net.training = true;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    forward_train(&mut net, &x, LocSource::Rng(&mut rng)).unwrap();
    assert_ne!(stats(&net), before);
}

#[test]
fn fixed_locations_reproduce_a_training_forward() {
    let mut net = build_toy_smp(&ArchConfig {
        widths: [4, 6, 8],
        ..ArchConfig::default()
    })
    .unwrap();
    net.training = true;
    let x = input(2, 1, 3, 16, 16);
    let locs = [SampleLoc { k: 1, l: 0 }, SampleLoc { k: 0, l: 1 }];
    let (a, _) = forward_train(&mut net.clone(), &x, LocSource::Fixed(&locs)).unwrap();
    let (b, _) = forward_train(&mut net.clone(), &x, LocSource::Fixed(&locs)).unwrap();
    assert_eq!(a, b);
    // too few locations is a graph error
    assert!(forward_train(&mut net, &x, LocSource::Fixed(&locs[..1])).is_err());
}

#[test]
fn training_loss_decreases_on_the_toy_task() {
    let cfg = TrainConfig {
        arch: ArchConfig {
            widths: [8, 10, 12],
            seed: 42,
            ..ArchConfig::default()
        },
        steps: 60,
        eval_every: 30,
        val_images: 2,
        ..TrainConfig::default()
    };
    let out = train_toy(&cfg).unwrap();
    let early: f32 = out.metrics[..10].iter().map(|m| m.loss).sum::<f32>() / 10.0;
    let late: f32 = out.metrics[50..].iter().map(|m| m.loss).sum::<f32>() / 10.0;
    assert!(late < early, "late {late} vs early {early}");
}

#[test]
fn flop_counter_rejects_indivisible_input() {
    let net = build_analysis_net(ArchVariant::SplitNet, 0);
    let shape = Shape4::new(1, 3, 63, 63).unwrap();
    assert!(count_flops(&net, shape, "split").is_err());
}

#[test]
fn toy_inference_preserves_spatial_extents() {
    let cfg = ArchConfig {
        widths: [4, 6, 8],
        ..ArchConfig::default()
    };
    let x = input(0, 1, 3, 32, 32);
    for net in [build_toy_smp(&cfg).unwrap(), build_toy_baseline(&cfg).unwrap()] {
        let y = forward_eval(&net, &x).unwrap();
        assert_eq!((y.shape().h, y.shape().w), (32, 32));
        assert_eq!(y.shape().c, cfg.classes);
    }
}

#[test]
fn eval_forward_ignores_worker_thread_count_under_nested_splits() {
    // deeper nesting than the toy nets use
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = fill_uniform::<f32>(Shape4::new(5, 3, 3, 3).unwrap(), &mut rng, -0.4, 0.4).unwrap();
    let net: Network<f32> = Network {
        layers: vec![
            LayerKind::Split(Window { w: 2, h: 2 }),
            LayerKind::Conv(
                Conv2d::new(3, 5, (3, 3), (1, 1), (1, 1), (1, 1), w, None).unwrap(),
            ),
            LayerKind::Split(Window { w: 2, h: 1 }),
            LayerKind::Relu,
            LayerKind::Merge,
            LayerKind::Merge,
        ],
        classes: 5,
        training: false,
    };
    let x = input(8, 2, 3, 8, 8);
    let want = forward_eval(&net, &x).unwrap();
    for workers in [2, 3, 16] {
        assert_eq!(forward_parallel(&net, &x, workers).unwrap(), want);
    }
}
