use super::*;
use crate::codes::ldpc_regular_construct;
use crate::ewgnn::bit_loss;
use crate::msgpass::{bp_decode, BpConfig};

fn small_cfg(epochs: usize) -> TrainConfig {
    let code = ldpc_regular_construct(16, 3, 6, 2).unwrap();
    TrainConfig {
        batch_size: 8,
        iterations: 3,
        epochs,
        seed: 42,
        ..TrainConfig::new(code)
    }
}

#[test]
fn default_schedule() {
    let s = LrSchedule::default();
    assert_eq!(s.rate(0, 100), 1e-3);
    assert_eq!(s.rate(59, 100), 1e-3);
    assert!((s.rate(60, 100) - 1e-4).abs() < 1e-18);
    assert!((s.rate(85, 100) - 1e-5).abs() < 1e-18);
    assert!((s.rate(99, 100) - 1e-5).abs() < 1e-18);
    let zero = LrSchedule::StepDecay {
        base: 0.0,
        milestones: vec![0.5],
        factor: 0.1,
        floor: 1e-5,
    };
    assert_eq!(zero.rate(80, 100), 0.0);
}

#[test]
fn batches_are_seeded_and_valid() {
    let mut cfg = small_cfg(1);
    let a = sample_batch(&cfg, 3);
    assert_eq!(a, sample_batch(&cfg, 3));
    assert_ne!(a, sample_batch(&cfg, 4));
    assert_eq!(a.len(), 8);
    for fr in &a {
        assert!(cfg.code.is_codeword(&fr.codeword).unwrap());
        assert!(fr.snr_db >= 1.0 && fr.snr_db <= 8.0);
    }
    cfg.snr_min = 4.5;
    cfg.snr_max = 4.5;
    assert!(sample_batch(&cfg, 0).iter().all(|f| f.snr_db == 4.5));
}

#[test]
fn config_validation() {
    let mut cfg = small_cfg(1);
    cfg.snr_min = 9.0;
    assert!(cfg.validate().is_err());
    let mut cfg = small_cfg(1);
    cfg.batch_size = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = small_cfg(1);
    cfg.checkpoint_every = 5;
    assert!(cfg.validate().is_err());
}

#[test]
fn zero_learning_rate_freezes_the_model() {
    let mut cfg = small_cfg(4);
    cfg.lr = LrSchedule::Constant(0.0);
    let start = FnnModel::init(1, 1.0, cfg.alpha);
    let mut model = start.clone();
    let report = train(&cfg, &mut model).unwrap();
    assert_eq!(model, start);
    assert_eq!(report.losses.len(), 4);
    assert!(report.losses.iter().all(|l| l.is_finite()));
}

#[test]
fn training_is_bitwise_reproducible_across_worker_counts() {
    let mut runs = Vec::new();
    for workers in [1, 3] {
        let mut cfg = small_cfg(5);
        cfg.workers = workers;
        let mut model = FnnModel::init(7, 1.0, cfg.alpha);
        let report = train(&cfg, &mut model).unwrap();
        runs.push((report.losses, model_save(&model)));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn batch_gradient_is_the_mean_of_frame_gradients() {
    let cfg = small_cfg(1);
    let graph = build_graph(cfg.code.parity()).unwrap();
    let model = FnnModel::init(3, 1.0, cfg.alpha);
    let batch = sample_batch(&cfg, 0);
    let (loss, grad) = model.batch_loss_grad(&graph, &batch, &cfg).unwrap();
    let mut sum = vec![0.0; grad.len()];
    let mut lsum = 0.0;
    for fr in &batch {
        let mut g = vec![0.0; grad.len()];
        lsum += model.frame_loss_grad(&graph, fr, &cfg, &mut g).unwrap();
        for (a, b) in sum.iter_mut().zip(&g) {
            *a += b;
        }
    }
    assert_eq!(loss, lsum / 8.0);
    for (a, b) in grad.iter().zip(&sum) {
        assert_eq!(*a, b / 8.0);
    }
}

#[test]
fn overfitting_a_frozen_batch_decreases_the_loss() {
    let mut cfg = small_cfg(1);
    cfg.snr_min = 1.0;
    cfg.snr_max = 3.0;
    cfg.batch_size = 16;
    let graph = build_graph(cfg.code.parity()).unwrap();
    let batch = sample_batch(&cfg, 0);
    let mut model = FnnModel::init(5, 1.0, cfg.alpha);
    let mut params = model.to_flat();
    let mut adam = AdamState::new(params.len(), 3e-4);
    let mut losses = Vec::new();
    for _ in 0..200 {
        let (loss, grad) = model.batch_loss_grad(&graph, &batch, &cfg).unwrap();
        losses.push(loss);
        adam.step(&mut params, &grad).unwrap();
        model.set_flat(&params).unwrap();
    }
    let decreasing = losses.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(
        decreasing as f64 >= 0.9 * 199.0,
        "{decreasing}/199 steps decreased"
    );
    assert!(losses[199] < losses[0]);
}

#[test]
fn diverged_loss_is_reported() {
    let cfg = small_cfg(2);
    let mut model = FnnModel::init(1, 1.0, cfg.alpha);
    model.biases_mut(2)[0] = f64::NAN;
    assert!(matches!(
        train(&cfg, &mut model),
        Err(TrainError::DivergedLoss { epoch: 0, .. })
    ));
}

#[test]
fn checkpoints_have_a_sidecar() {
    let dir = std::env::temp_dir().join(format!("ewgnn-ckpt-{}", std::process::id()));
    let mut cfg = small_cfg(4);
    cfg.checkpoint_every = 2;
    cfg.checkpoint_dir = Some(dir.clone());
    let mut model = FnnModel::init(1, 1.0, cfg.alpha);
    let report = train(&cfg, &mut model).unwrap();
    assert_eq!(report.checkpoints.len(), 2);
    let last = std::fs::read_to_string(&report.checkpoints[1]).unwrap();
    assert_eq!(crate::neural::model_load(&last).unwrap(), model);
    let side = std::fs::read_to_string(report.checkpoints[1].with_extension("step")).unwrap();
    assert!(side.starts_with("step 4 loss "));
    let loss: f64 = side.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert_eq!(loss, report.losses[3]);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn model_file_carries_no_code_information() {
    let cfg = small_cfg(1);
    let text = FnnModel::init(1, 1.0, cfg.alpha).to_text(cfg.alpha);
    let header: Vec<&str> = text.lines().take(4).collect();
    assert_eq!(header[0], "EWGNN v1");
    assert_eq!(header[3], "arch 4 32 32 1");
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn nbp_with_unit_weights_scores_the_bp_posterior() {
    let cfg = small_cfg(1);
    let graph = build_graph(cfg.code.parity()).unwrap();
    let fr = &sample_batch(&cfg, 0)[0];
    let w = NbpWeights::ones(graph.n_edges());
    let (loss, _) =
        nbp_loss_and_gradient(&graph, &fr.llr, &fr.codeword, &w, cfg.alpha, 3, false).unwrap();
    let bp = bp_decode(&graph, &fr.llr, &BpConfig::new(3, cfg.alpha)).unwrap();
    let expected: f64 = bp
        .posterior
        .iter()
        .zip(&fr.codeword)
        .map(|(&h, &c)| bit_loss(h, c))
        .sum::<f64>()
        / 16.0;
    assert!((loss - expected).abs() < 1e-14);
}

#[test]
fn nbp_gradient_matches_finite_differences() {
    let cfg = small_cfg(1);
    let graph = build_graph(cfg.code.parity()).unwrap();
    let fr = &sample_batch(&cfg, 1)[2];
    let mut w = NbpWeights::ones(graph.n_edges());
    for (i, x) in w.w_edge.iter_mut().chain(w.w_out.iter_mut()).enumerate() {
        *x = 0.7 + 0.01 * (i % 13) as f64;
    }
    for multiloss in [false, true] {
        let (_, grad) =
            nbp_loss_and_gradient(&graph, &fr.llr, &fr.codeword, &w, cfg.alpha, 3, multiloss)
                .unwrap();
        let flat = w.to_flat();
        let mut num = 0.0;
        let mut den = 0.0f64;
        for p in 0..flat.len() {
            let eval = |d: f64| {
                let mut f = flat.clone();
                f[p] += d;
                let ww = NbpWeights::from_flat(&f).unwrap();
                nbp_loss_and_gradient(&graph, &fr.llr, &fr.codeword, &ww, cfg.alpha, 3, multiloss)
                    .unwrap()
                    .0
            };
            let fd = (eval(1e-5) - eval(-1e-5)) / 2e-5;
            num += (fd - grad[p]).powi(2);
            den = den.max(fd.abs()).max(grad[p].abs());
        }
        assert!(num.sqrt() / den < 1e-4);
    }
}

#[test]
fn nbp_training_runs() {
    let cfg = small_cfg(3);
    let graph = build_graph(cfg.code.parity()).unwrap();
    let mut w = NbpWeights::ones(graph.n_edges());
    let report = train(&cfg, &mut w).unwrap();
    assert_eq!(report.losses.len(), 3);
    assert_ne!(w, NbpWeights::ones(graph.n_edges()));
}
