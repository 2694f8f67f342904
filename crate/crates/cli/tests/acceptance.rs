//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use ewgnn_core::channel::random_frame;
use ewgnn_core::codes::{bch_generator_polynomial, Gf2Poly};
use ewgnn_core::ewgnn::{
    ewgnn_decode_observed, ewgnn_decode_with_history, loss_and_gradient, multiloss, ConstantWeight,
    GradWorkspace,
};
use ewgnn_core::msgpass::{bp_decode_observed, DecodeResult};
use ewgnn_core::neural::{FnnKernel, CANONICAL_PARAMS};
use ewgnn_core::{
    bch_construct, ber_run, bp_decode, build_graph, derive_stream, ldpc_regular_construct,
    sigma_from_snr_db, train, BerConfig, BerTable, BpConfig, Code, DecoderSpec, EwgnnConfig,
    FnnModel, Gf2Matrix, StopRule, TrainConfig,
};

const BCH_ALPHA: f64 = 1e-32;
const LDPC_ALPHA: f64 = 1e-7;

// Seeds for the desk-scale training run.
const LDPC_SEED: u64 = 1;
const INIT_SEED: u64 = 1;
const TRAIN_SEED: u64 = 1;
const EVAL_SEED: u64 = 7;
// Bit errors per BER point. The floor is 100; more errors tighten the comparison.
const MIN_BIT_ERRORS: u64 = 1000;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn frame(code: &Code, snr: f64, seed: u64, labels: &[u64]) -> ewgnn_core::Frame {
    random_frame(
        code,
        &sigma_from_snr_db(snr),
        &mut derive_stream(seed, labels),
    )
}

fn bp_reduction() -> Outcome {
    let bch = bch_construct(6, 5).map_err(|e| e.to_string())?;
    let ldpc = ldpc_regular_construct(32, 3, 6, LDPC_SEED).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for (code, alpha) in [(bch, BCH_ALPHA), (ldpc, LDPC_ALPHA)] {
        let graph = build_graph(code.parity()).map_err(|e| e.to_string())?;
        let cfg = EwgnnConfig::new(alpha, 8).map_err(|e| e.to_string())?;
        let mut mismatched = 0;
        for f in 0..1000u64 {
            let fr = frame(&code, 1.0 + (f % 7) as f64, 11, &[f]);
            let mut bp_states = Vec::new();
            let bp = bp_decode_observed(&graph, &fr.llr, &BpConfig::new(8, alpha), |s| {
                bp_states.push(s.clone())
            })
            .map_err(|e| e.to_string())?;
            let mut gnn_states = Vec::new();
            let gnn: DecodeResult =
                ewgnn_decode_observed(&graph, &fr.llr, &ConstantWeight(1.0), &cfg, |s, _| {
                    gnn_states.push(s.clone())
                })
                .map_err(|e| e.to_string())?;
            if bp_states != gnn_states || bp != gnn {
                mismatched += 1;
            }
        }
        summary.push(format!(
            "({},{}) {mismatched}/1000 frames differ",
            code.n(),
            code.k()
        ));
        if mismatched > 0 {
            return Err(summary.join(", "));
        }
    }
    Ok(format!("{}, bit-exact", summary.join(", ")))
}

fn tree_exactness() -> Outcome {
    let h = Gf2Matrix::from_rows(&[[1u8; 8]]).map_err(|e| e.to_string())?;
    let code = Code::from_parity("spc8", h).map_err(|e| e.to_string())?;
    let graph = build_graph(code.parity()).map_err(|e| e.to_string())?;
    let codewords: Vec<Vec<u8>> = (0..128u32)
        .map(|m| {
            code.encode(&(0..7).map(|i| ((m >> i) & 1) as u8).collect::<Vec<_>>())
                .unwrap()
        })
        .collect();
    let mut worst = 0.0f64;
    for f in 0..100u64 {
        let fr = frame(&code, 2.0, 12, &[f]);
        let bp =
            bp_decode(&graph, &fr.llr, &BpConfig::new(1, BCH_ALPHA)).map_err(|e| e.to_string())?;
        for i in 0..8 {
            // ln Pr(c|y) up to a constant is Σ ±llr/2.
            let (mut zero, mut one) = (0.0, 0.0);
            for c in &codewords {
                let metric: f64 = c
                    .iter()
                    .zip(&fr.llr)
                    .map(|(&b, &l)| if b == 0 { 0.5 * l } else { -0.5 * l })
                    .sum();
                if c[i] == 0 {
                    zero += metric.exp();
                } else {
                    one += metric.exp();
                }
            }
            worst = worst.max((bp.posterior[i] - (zero / one).ln()).abs());
        }
    }
    check(
        worst <= 1e-9,
        format!("max |BP - MAP| = {worst:.3e} over 100 frames"),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(f64::MIN_POSITIVE)
}

fn gradient_fidelity() -> Outcome {
    let code = ldpc_regular_construct(16, 3, 6, 0).map_err(|e| e.to_string())?;
    let graph = build_graph(code.parity()).map_err(|e| e.to_string())?;
    let cfg = EwgnnConfig::new(LDPC_ALPHA, 3).map_err(|e| e.to_string())?;
    let step = 1e-5;
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let model = FnnModel::init(100 + trial, 1.0, LDPC_ALPHA);
        let fr = frame(&code, 1.0 + (trial % 6) as f64, 13, &[trial]);
        let mut grad = vec![0.0; model.n_params()];
        let mut ws = GradWorkspace::default();
        loss_and_gradient(
            &graph,
            &fr.llr,
            &fr.codeword,
            &FnnKernel::new(&model),
            &cfg,
            &mut ws,
            &mut grad,
        )
        .map_err(|e| e.to_string())?;
        let theta = model.to_flat();
        let mut probe = model.clone();
        let mut fd = vec![0.0; theta.len()];
        for p in 0..theta.len() {
            let mut eval = |delta: f64| {
                let mut th = theta.clone();
                th[p] += delta;
                probe.set_flat(&th).unwrap();
                let (_, hist) = ewgnn_decode_with_history(&graph, &fr.llr, &probe, &cfg).unwrap();
                multiloss(&hist, &fr.codeword).unwrap()
            };
            fd[p] = (eval(step) - eval(-step)) / (2.0 * step);
        }
        worst = worst.max(rel_err(&grad, &fd));
    }
    check(
        worst < 1e-4,
        format!("max relative error {worst:.3e} over 20 configurations"),
    )
}

fn parameter_count() -> Outcome {
    let model = FnnModel::init(0, 1.0, LDPC_ALPHA);
    let n = model.n_params();
    check(
        n == 1249 && CANONICAL_PARAMS == 1249 && model.to_flat().len() == 1249,
        format!("{n} parameters"),
    )
}

fn ber_cfg(iterations: usize) -> BerConfig {
    BerConfig {
        iterations,
        alpha: LDPC_ALPHA,
        stop: StopRule {
            min_bit_errors: MIN_BIT_ERRORS,
            max_frames: 20_000_000,
        },
        seed: EVAL_SEED,
        workers: 0,
    }
}

fn compare(
    code: &Code,
    model: &FnnModel,
    snrs: &[f64],
    iterations: usize,
) -> Result<(BerTable, BerTable), String> {
    let cfg = ber_cfg(iterations);
    let bp = ber_run(code, &DecoderSpec::Bp { early_stop: false }, snrs, &cfg)
        .map_err(|e| e.to_string())?;
    let gnn = ber_run(
        code,
        &DecoderSpec::Ewgnn {
            model: model.clone(),
        },
        snrs,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    Ok((bp, gnn))
}

fn describe(bp: &BerTable, gnn: &BerTable) -> String {
    bp.points
        .iter()
        .zip(&gnn.points)
        .map(|(b, g)| format!("{} dB bp {:.3e} ewgnn {:.3e}", b.snr_db, b.ber, g.ber))
        .collect::<Vec<_>>()
        .join("; ")
}

fn training_gain(code: &Code) -> Result<(Outcome, FnnModel), String> {
    let start = Instant::now();
    let mut cfg = TrainConfig::new(code.clone());
    cfg.seed = TRAIN_SEED;
    let mut model = FnnModel::init(INIT_SEED, 1.0, LDPC_ALPHA);
    train(&cfg, &mut model).map_err(|e| e.to_string())?;
    let trained = start.elapsed();
    let (bp, gnn) = compare(code, &model, &[4.0, 4.5, 5.0], 8)?;
    let pairs: Vec<(f64, f64)> = bp
        .points
        .iter()
        .zip(&gnn.points)
        .map(|(b, g)| (b.ber, g.ber))
        .collect();
    let ok = pairs.iter().all(|(b, g)| g <= b) && pairs.iter().any(|(b, g)| g < b);
    let detail = format!(
        "{} (training {:.0} s)",
        describe(&bp, &gnn),
        trained.as_secs_f64()
    );
    Ok((check(ok, detail), model))
}

fn scalability(model: &FnnModel) -> Outcome {
    let code = ldpc_regular_construct(128, 3, 6, 0).map_err(|e| e.to_string())?;
    let (bp, gnn) = compare(&code, model, &[3.5, 4.0], 8)?;
    let ok = bp
        .points
        .iter()
        .zip(&gnn.points)
        .all(|(b, g)| g.ber <= b.ber);
    check(ok, describe(&bp, &gnn))
}

fn iteration_transfer(code: &Code, model: &FnnModel) -> Outcome {
    let spec = DecoderSpec::Ewgnn {
        model: model.clone(),
    };
    let t8 = ber_run(code, &spec, &[4.5], &ber_cfg(8)).map_err(|e| e.to_string())?;
    let t30 = ber_run(code, &spec, &[4.5], &ber_cfg(30)).map_err(|e| e.to_string())?;
    let (a, b) = (t8.points[0].ber, t30.points[0].ber);
    check(b <= a, format!("4.5 dB T=8 {a:.3e} T=30 {b:.3e}"))
}

fn code_facts() -> Outcome {
    let mut xn1 = vec![0u8; 64];
    xn1[0] = 1;
    xn1[63] = 1;
    let xn1 = Gf2Poly::from_coeffs(xn1);
    let mut seen = Vec::new();
    for (delta, k) in [(5, 51), (7, 45), (11, 36)] {
        let code = bch_construct(6, delta).map_err(|e| e.to_string())?;
        let ght = code
            .generator()
            .mul(&code.parity().transpose())
            .map_err(|e| e.to_string())?;
        let g = bch_generator_polynomial(6, delta);
        let divides = xn1.rem(&g).is_zero();
        seen.push(format!("delta {delta} -> ({},{})", code.n(), code.k()));
        if code.n() != 63 || code.k() != k || !ght.is_zero() || !divides {
            return Err(format!(
                "{}, GH^T zero {}, g | x^63-1 {divides}",
                seen.join(", "),
                ght.is_zero()
            ));
        }
    }
    Ok(format!("{}, GH^T = 0, g | x^63-1", seen.join(", ")))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ewgnn"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "ewgnn {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let code = path("code.alist");
    run_cli(&["code", "ldpc", "--n", "32", "--seed", "1", "--out", &code])?;
    let mut models = Vec::new();
    for run in 0..2 {
        let out = path(&format!("model{run}"));
        let args = [
            "train", "--code", &code, "--epochs", "20", "--batch", "64", "--seed", "3", "--out",
            &out,
        ];
        run_cli(&args)?;
        models.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let mut csvs = Vec::new();
    for workers in ["1", "8"] {
        let csv = path(&format!("ber{workers}.csv"));
        let model = path("model0");
        let args = [
            "eval",
            "--code",
            &code,
            "--decoder",
            "ewgnn",
            "--model",
            &model,
            "--snr",
            "1:4:1",
            "--max-frames",
            "3000",
            "--seed",
            "5",
            "--workers",
            workers,
            "--csv",
            &csv,
        ];
        run_cli(&args)?;
        csvs.push(std::fs::read(&csv).map_err(|e| e.to_string())?);
    }
    check(
        models[0] == models[1] && csvs[0] == csvs[1],
        format!(
            "model files identical {}, CSV identical for workers 1/8 {}",
            models[0] == models[1],
            csvs[0] == csvs[1]
        ),
    )
}

fn channel_calibration() -> Outcome {
    let code = ldpc_regular_construct(32, 3, 6, LDPC_SEED).map_err(|e| e.to_string())?;
    let cfg = BerConfig {
        iterations: 1,
        alpha: LDPC_ALPHA,
        stop: StopRule {
            min_bit_errors: 0,
            max_frames: 20_000,
        },
        seed: 17,
        workers: 0,
    };
    let table = ber_run(&code, &DecoderSpec::Uncoded, &[0.0], &cfg).map_err(|e| e.to_string())?;
    let bits = (table.points[0].frames * 32) as f64;
    let q1 = 0.158_655_253_931_457_05;
    let sd = (q1 * (1.0 - q1) / bits).sqrt();
    let ber = table.points[0].ber;
    check(
        (ber - q1).abs() <= 3.0 * sd,
        format!("BER {ber:.5} vs Q(1) {q1:.5}, 3 sd = {:.5}", 3.0 * sd),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome, secs: f64| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} {tag} {name}: {detail} [{secs:.1} s]");
    };
    let guarded = |f: &dyn Fn() -> Outcome| -> (Outcome, f64) {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        (out, start.elapsed().as_secs_f64())
    };

    let (o, s) = guarded(&bp_reduction);
    report(1, "BP reduction", o, s);
    let (o, s) = guarded(&tree_exactness);
    report(2, "tree-code exactness", o, s);
    let (o, s) = guarded(&gradient_fidelity);
    report(3, "gradient fidelity", o, s);
    let (o, s) = guarded(&parameter_count);
    report(4, "parameter count", o, s);

    let code = ldpc_regular_construct(32, 3, 6, LDPC_SEED).expect("(32,16) LDPC");
    let start = Instant::now();
    let trained = catch_unwind(AssertUnwindSafe(|| training_gain(&code)));
    let secs = start.elapsed().as_secs_f64();
    let model = match trained {
        Ok(Ok((outcome, model))) => {
            report(5, "desk-scale training gain", outcome, secs);
            Some(model)
        }
        Ok(Err(e)) => {
            report(5, "desk-scale training gain", Err(e), secs);
            None
        }
        Err(_) => {
            report(5, "desk-scale training gain", Err("panicked".into()), secs);
            None
        }
    };
    match &model {
        Some(m) => {
            let (o, s) = guarded(&|| scalability(m));
            report(6, "scalability transfer", o, s);
            let (o, s) = guarded(&|| iteration_transfer(&code, m));
            report(7, "iteration transfer", o, s);
        }
        None => {
            report(
                6,
                "scalability transfer",
                Err("no trained model".into()),
                0.0,
            );
            report(7, "iteration transfer", Err("no trained model".into()), 0.0);
        }
    }

    let (o, s) = guarded(&code_facts);
    report(8, "code-construction facts", o, s);
    let (o, s) = guarded(&determinism);
    report(9, "determinism", o, s);
    let (o, s) = guarded(&channel_calibration);
    report(10, "uncoded-channel calibration", o, s);

    if failures == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
