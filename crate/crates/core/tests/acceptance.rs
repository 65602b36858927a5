//! Acceptance gate: one test per claimed property, each printing a
//! single PASS/FAIL line (visible with `--nocapture`). Tolerances are
//! pinned in the assertions.

use smp_core::analysis::{count_flops, receptive_field};
use smp_core::checkpoint;
use smp_core::imgio;
use smp_core::net::{forward_eval, forward_parallel, full_split_oracle, LayerKind};
use smp_core::tensor::{random_uniform, Shape4};
use smp_core::train::{train_toy, TrainConfig};
use smp_core::verify;
use smp_core::zoo::{build_analysis_net, build_toy_baseline, build_toy_smp, ArchConfig, ArchVariant};

fn check(criterion: usize, name: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("PASS criterion {criterion} ({name}): {detail}"),
        Err(detail) => {
            println!("FAIL criterion {criterion} ({name}): {detail}");
            panic!("criterion {criterion} ({name}) failed: {detail}");
        }
    }
}

fn gate(r: verify::CheckResult) -> Result<String, String> {
    if r.pass {
        Ok(r.detail)
    } else {
        Err(r.detail)
    }
}

#[test]
fn criterion_01_roundtrip_losslessness() {
    check(1, "round-trip losslessness", || gate(verify::verify_roundtrip(1001)));
}

#[test]
fn criterion_02_shrink_split_consistency() {
    check(2, "shrink/split consistency", || gate(verify::verify_shrink(1002)));
}

#[test]
fn criterion_03_flop_table() {
    check(3, "FLOP table reproduction", || {
        let shape = Shape4::new(1, 3, 256, 256).map_err(|e| e.to_string())?;
        let report = |v: ArchVariant| {
            count_flops(&build_analysis_net(v, 0), shape, "m").map_err(|e| e.to_string())
        };
        let mp = report(ArchVariant::MaxPoolNet)?;
        let di = report(ArchVariant::DilatedNet)?;
        let sp = report(ArchVariant::SplitNet)?;
        let tol = 0.05;
        let conv_gflops = |r: &smp_core::analysis::FlopReport| -> Vec<f64> {
            r.layers.iter().filter(|l| l.kind == "conv").map(|l| l.gflops).collect()
        };
        let expect = [
            (conv_gflops(&mp), vec![0.23, 2.42], mp.total_gflops, 2.65, "maxpool"),
            (conv_gflops(&di), vec![0.23, 9.68], di.total_gflops, 9.92, "dilated"),
            (conv_gflops(&sp), vec![0.23, 9.68], sp.total_gflops, 9.92, "split"),
        ];
        for (got, want, total, want_total, model) in &expect {
            if got.len() != want.len() {
                return Err(format!("{model}: {} conv layers, expected {}", got.len(), want.len()));
            }
            for (g, w) in got.iter().zip(want) {
                if (g - w).abs() > tol {
                    return Err(format!("{model}: conv {g:.4} GF vs {w} (tol {tol})"));
                }
            }
            if (total - want_total).abs() > tol {
                return Err(format!("{model}: total {total:.4} GF vs {want_total} (tol {tol})"));
            }
        }
        if di.total_gflops != sp.total_gflops {
            return Err(format!(
                "dilated {} != split {} exactly",
                di.total_gflops, sp.total_gflops
            ));
        }
        Ok(format!(
            "totals {:.4} / {:.4} / {:.4} GF, dilated == split exactly",
            mp.total_gflops, di.total_gflops, sp.total_gflops
        ))
    });
}

#[test]
fn criterion_04_full_split_oracle() {
    check(4, "full-split oracle", || {
        let net = build_toy_smp(&ArchConfig {
            widths: [6, 8, 10],
            seed: 104,
            ..ArchConfig::default()
        })
        .map_err(|e| e.to_string())?;
        if net.pool_sites().len() != 2 {
            return Err("toy net must have 2 pool sites".into());
        }
        let shape = Shape4::new(1, 3, 64, 64).map_err(|e| e.to_string())?;
        let x = random_uniform(shape, 104, -1.0, 1.0).map_err(|e| e.to_string())?;
        let want = forward_eval(&net, &x).map_err(|e| e.to_string())?;
        let got = full_split_oracle(&net, &x).map_err(|e| e.to_string())?;
        let diff = want.max_abs_diff(&got).map_err(|e| e.to_string())?;
        if diff <= 1e-5 {
            Ok(format!("16 location combinations, max abs diff {diff:.2e}"))
        } else {
            Err(format!("max abs diff {diff:.2e} exceeds 1e-5"))
        }
    });
}

#[test]
fn criterion_05_gradient_checks() {
    check(5, "gradient checks", || gate(verify::verify_gradcheck(1005)));
}

#[test]
fn criterion_06_adjointness() {
    check(6, "adjointness", || gate(verify::verify_adjointness(1006)));
}

#[test]
fn criterion_07_parallel_determinism() {
    check(7, "parallel determinism", || {
        let bitwise = verify::verify_parallel(1007);
        if !bitwise.pass {
            return Err(bitwise.detail);
        }
        // informational speedup smoke: heavy per-batch work, logged only
        let net = build_analysis_net(ArchVariant::SplitNet, 7);
        let shape = Shape4::new(1, 3, 64, 64).map_err(|e| e.to_string())?;
        let x = random_uniform(shape, 7, -1.0, 1.0).map_err(|e| e.to_string())?;
        let t0 = std::time::Instant::now();
        let seq = forward_eval(&net, &x).map_err(|e| e.to_string())?;
        let t_seq = t0.elapsed();
        let t1 = std::time::Instant::now();
        let par = forward_parallel(&net, &x, 4).map_err(|e| e.to_string())?;
        let t_par = t1.elapsed();
        if par != seq {
            return Err("parallel output differs on the benchmark net".into());
        }
        let ratio = t_par.as_secs_f64() / t_seq.as_secs_f64();
        let verdict = if ratio < 0.6 { "meets" } else { "misses" };
        Ok(format!(
            "{}; speedup smoke: 4 workers {ratio:.2}x sequential ({verdict} 0.6x, informational)",
            bitwise.detail
        ))
    });
}

#[test]
fn criterion_08_receptive_field_parity() {
    check(8, "receptive-field parity", || {
        for v in [ArchVariant::MaxPoolNet, ArchVariant::DilatedNet, ArchVariant::SplitNet] {
            let rf = receptive_field(&build_analysis_net(v, 0), "m")
                .map_err(|e| e.to_string())?
                .final_rf();
            if rf != (7, 7) {
                return Err(format!("{v:?}: final rf {rf:?}, expected (7, 7)"));
            }
        }
        let cfg = ArchConfig::default();
        let smp = build_toy_smp(&cfg).map_err(|e| e.to_string())?;
        let base = build_toy_baseline(&cfg).map_err(|e| e.to_string())?;
        // the subsampling mechanisms differ, so compare the traces at
        // conv layers, where both nets do their filtering work
        let conv_rf = |net: &smp_core::net::Network<f32>| -> Result<Vec<(usize, usize)>, String> {
            let report = receptive_field(net, "m").map_err(|e| e.to_string())?;
            Ok(net
                .layers
                .iter()
                .zip(&report.layers)
                .filter(|(l, _)| matches!(l, LayerKind::Conv(_)))
                .map(|(_, e)| e.rf)
                .collect())
        };
        let a = conv_rf(&smp)?;
        let b = conv_rf(&base)?;
        if a != b {
            return Err(format!("conv rf traces differ: {a:?} vs {b:?}"));
        }
        Ok(format!(
            "all three variants end at rf 7; toy conv traces equal over {} convs",
            a.len()
        ))
    });
}

#[test]
fn criterion_09_parameter_parity() {
    check(9, "parameter-count parity", || {
        let mut counts = Vec::new();
        for (widths, blocks) in [([16, 32, 64], 1), ([12, 24, 32], 2)] {
            let cfg = ArchConfig {
                widths,
                blocks,
                ..ArchConfig::default()
            };
            let smp = build_toy_smp(&cfg).map_err(|e| e.to_string())?.param_count();
            let base = build_toy_baseline(&cfg).map_err(|e| e.to_string())?.param_count();
            if smp != base {
                return Err(format!("widths {widths:?}: {smp} vs {base} params"));
            }
            counts.push(smp);
        }
        Ok(format!("equal trainable counts {counts:?}"))
    });
}

#[test]
fn criterion_10_training_direction() {
    check(10, "desk-scale training direction", || {
        let mut mean_smp = Vec::new();
        let mut mean_base = Vec::new();
        let mut line_diff = Vec::new();
        for seed in [1u64, 2, 3] {
            let mut per_variant = Vec::new();
            for variant in [ArchVariant::ToySmp, ArchVariant::ToyBaseline] {
                let cfg = TrainConfig {
                    arch: ArchConfig {
                        variant,
                        seed,
                        ..TrainConfig::default().arch
                    },
                    ..TrainConfig::default()
                };
                let out = train_toy(&cfg).map_err(|e| e.to_string())?;
                let line = out.final_report.per_class[2].iou.unwrap_or(0.0);
                per_variant.push((out.final_report.mean_iou, line));
            }
            mean_smp.push(per_variant[0].0);
            mean_base.push(per_variant[1].0);
            line_diff.push(per_variant[0].1 - per_variant[1].1);
        }
        let median = |v: &mut Vec<f64>| -> f64 {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let m_smp = median(&mut mean_smp);
        let m_base = median(&mut mean_base);
        let m_line = median(&mut line_diff);
        if m_smp < m_base {
            return Err(format!("median mean IoU {m_smp:.4} < baseline {m_base:.4}"));
        }
        if m_line < 0.0 {
            return Err(format!("median thin-line advantage {m_line:.4} < 0"));
        }
        Ok(format!(
            "3-seed medians: mean IoU {m_smp:.4} vs {m_base:.4}, thin-line advantage {m_line:+.4}"
        ))
    });
}

#[test]
fn criterion_11_serialization() {
    check(11, "serialization", || {
        let net = build_toy_smp(&ArchConfig {
            widths: [6, 8, 10],
            seed: 111,
            ..ArchConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let b1 = checkpoint::to_bytes(&net);
        let b2 = checkpoint::to_bytes(&checkpoint::from_bytes(&b1).map_err(|e| e.to_string())?);
        if b1 != b2 {
            return Err("checkpoint save->load->save not byte-identical".into());
        }
        let (image, label) =
            smp_core::data::gen_synthetic(&smp_core::data::SynthConfig::default(), 0)
                .map_err(|e| e.to_string())?;
        let rgb = imgio::tensor_to_rgb(&image).map_err(|e| e.to_string())?;
        let s = image.shape();
        let ppm = imgio::encode_ppm(s.w, s.h, &rgb).map_err(|e| e.to_string())?;
        let (w, h, back) = imgio::decode_ppm(&ppm).map_err(|e| e.to_string())?;
        if imgio::encode_ppm(w, h, &back).map_err(|e| e.to_string())? != ppm {
            return Err("PPM round trip not byte-exact".into());
        }
        let pgm = imgio::encode_pgm(label.w, label.h, &label.data).map_err(|e| e.to_string())?;
        let (w, h, back) = imgio::decode_pgm(&pgm).map_err(|e| e.to_string())?;
        if imgio::encode_pgm(w, h, &back).map_err(|e| e.to_string())? != pgm {
            return Err("PGM round trip not byte-exact".into());
        }
        Ok(format!(
            "checkpoint {} bytes byte-identical; PPM/PGM round trips byte-exact",
            b1.len()
        ))
    });
}
