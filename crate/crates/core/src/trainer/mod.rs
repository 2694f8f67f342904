//! Training loop: fresh random batch per epoch, unrolled-decode loss, one
//! Adam step per epoch.
//!
//! Per-frame gradients are computed in parallel but summed in frame order,
//! so a run is bit-reproducible whatever the thread count.

mod nbp;

pub use nbp::nbp_loss_and_gradient;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{derive_stream, random_frame, sigma_from_snr_db, Frame};
use crate::codes::Code;
use crate::ewgnn::{loss_and_gradient, EwgnnConfig, EwgnnError, GradWorkspace};
use crate::msgpass::NbpWeights;
use crate::neural::{model_save, nbp_save, AdamState, FnnKernel, FnnModel, NeuralError};
use crate::tanner::{build_graph, GraphError, TannerGraph};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss became {loss} at epoch {epoch}")]
    DivergedLoss { epoch: usize, loss: f64 },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Decoder(#[from] EwgnnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Learning rate as a function of the epoch.
#[derive(Clone, Debug, PartialEq)]
pub enum LrSchedule {
    Constant(f64),
    /// `base`, multiplied by `factor` once each milestone (a fraction of the
    /// total epochs) has passed, never below `floor`.
    StepDecay {
        base: f64,
        milestones: Vec<f64>,
        factor: f64,
        floor: f64,
    },
}

impl Default for LrSchedule {
    /// `1e-3`, ×0.1 at 60 % and 85 % of training, floor `1e-5`.
    fn default() -> Self {
        LrSchedule::StepDecay {
            base: 1e-3,
            milestones: vec![0.6, 0.85],
            factor: 0.1,
            floor: 1e-5,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant(lr) => *lr,
            LrSchedule::StepDecay {
                base,
                milestones,
                factor,
                floor,
            } => {
                let progress = epoch as f64 / epochs.max(1) as f64;
                let passed = milestones.iter().filter(|&&m| progress >= m).count();
                let lr = base * factor.powi(passed as i32);
                lr.max(floor.min(*base))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub code: Code,
    pub batch_size: usize,
    pub snr_min: f64,
    pub snr_max: f64,
    pub iterations: usize,
    pub alpha: f64,
    pub lr: LrSchedule,
    pub epochs: usize,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// NBP only: score every iteration instead of just the last.
    pub multiloss: bool,
    /// Thread count; 0 uses the global rayon pool.
    pub workers: usize,
}

impl TrainConfig {
    /// Defaults for a regular LDPC code: SNR in [1, 8] dB, `α = 1e-7`,
    /// `T = 8`, batch 500, 2000 epochs.
    pub fn new(code: Code) -> Self {
        Self {
            code,
            batch_size: 500,
            snr_min: 1.0,
            snr_max: 8.0,
            iterations: 8,
            alpha: 1e-7,
            lr: LrSchedule::default(),
            epochs: 2000,
            seed: 0,
            checkpoint_every: 0,
            checkpoint_dir: None,
            multiloss: false,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.snr_min <= self.snr_max) {
            return bad("snr_min must not exceed snr_max");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.checkpoint_every > 0 && self.checkpoint_dir.is_none() {
            return bad("checkpointing needs a directory");
        }
        EwgnnConfig::new(self.alpha, self.iterations)?;
        Ok(())
    }

    pub fn decoder_config(&self) -> EwgnnConfig {
        EwgnnConfig {
            alpha: self.alpha,
            iterations: self.iterations,
            normalization_epsilon: 1e-12,
        }
    }
}

/// Stream label separating training draws from any other use of the seed.
const TRAIN_PURPOSE: u64 = 0x0074_7261_696e;

/// The batch of epoch `epoch`. Frame `f` draws its SNR, message and noise
/// from `derive_stream(seed, [epoch, f, purpose])`.
pub fn sample_batch(cfg: &TrainConfig, epoch: usize) -> Vec<Frame> {
    (0..cfg.batch_size)
        .map(|f| {
            let mut rng = derive_stream(cfg.seed, &[epoch as u64, f as u64, TRAIN_PURPOSE]);
            let snr = rng.uniform(cfg.snr_min, cfg.snr_max);
            random_frame(&cfg.code, &sigma_from_snr_db(snr), &mut rng)
        })
        .collect()
}

/// A decoder whose parameters can be trained by [`train`].
pub trait Differentiable: Clone + Send + Sync {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<(), TrainError>;
    /// Loss of one frame; adds the parameter gradient into `grad`.
    fn frame_loss_grad(
        &self,
        graph: &TannerGraph,
        frame: &Frame,
        cfg: &TrainConfig,
        grad: &mut [f64],
    ) -> Result<f64, TrainError>;
    /// Mean loss and gradient over `frames`, reduced in frame order.
    fn batch_loss_grad(
        &self,
        graph: &TannerGraph,
        frames: &[Frame],
        cfg: &TrainConfig,
    ) -> Result<(f64, Vec<f64>), TrainError> {
        let n_params = self.params().len();
        let per_frame: Vec<(f64, Vec<f64>)> = frames
            .par_iter()
            .map(|fr| {
                let mut g = vec![0.0; n_params];
                self.frame_loss_grad(graph, fr, cfg, &mut g).map(|l| (l, g))
            })
            .collect::<Result<_, _>>()?;
        reduce_in_order(per_frame, n_params)
    }
    fn to_text(&self, alpha: f64) -> String;
}

pub(crate) fn reduce_in_order(
    per_frame: Vec<(f64, Vec<f64>)>,
    n_params: usize,
) -> Result<(f64, Vec<f64>), TrainError> {
    let count = per_frame.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for (l, g) in per_frame {
        loss += l;
        for (acc, x) in grad.iter_mut().zip(&g) {
            *acc += x;
        }
    }
    grad.iter_mut().for_each(|g| *g /= count);
    Ok((loss / count, grad))
}

impl Differentiable for FnnModel {
    fn params(&self) -> Vec<f64> {
        self.to_flat()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), TrainError> {
        Ok(self.set_flat(params)?)
    }

    fn frame_loss_grad(
        &self,
        graph: &TannerGraph,
        frame: &Frame,
        cfg: &TrainConfig,
        grad: &mut [f64],
    ) -> Result<f64, TrainError> {
        let kernel = FnnKernel::new(self);
        let mut ws = GradWorkspace::default();
        Ok(loss_and_gradient(
            graph,
            &frame.llr,
            &frame.codeword,
            &kernel,
            &cfg.decoder_config(),
            &mut ws,
            grad,
        )?)
    }

    // The kernel and workspace are built once per worker rather than once
    // per frame.
    fn batch_loss_grad(
        &self,
        graph: &TannerGraph,
        frames: &[Frame],
        cfg: &TrainConfig,
    ) -> Result<(f64, Vec<f64>), TrainError> {
        let kernel = FnnKernel::new(self);
        let dcfg = cfg.decoder_config();
        let n_params = kernel.n_params();
        let per_frame: Vec<(f64, Vec<f64>)> = frames
            .par_iter()
            .map_init(GradWorkspace::default, |ws, fr| {
                let mut g = vec![0.0; n_params];
                loss_and_gradient(graph, &fr.llr, &fr.codeword, &kernel, &dcfg, ws, &mut g)
                    .map(|l| (l, g))
            })
            .collect::<Result<_, _>>()?;
        reduce_in_order(per_frame, n_params)
    }

    fn to_text(&self, alpha: f64) -> String {
        let mut m = self.clone();
        m.alpha = alpha;
        model_save(&m)
    }
}

impl Differentiable for NbpWeights {
    fn params(&self) -> Vec<f64> {
        self.to_flat()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), TrainError> {
        if params.len() != self.n_params() {
            return Err(TrainError::InvalidConfig(format!(
                "expected {} NBP weights, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let (a, b) = params.split_at(self.n_edges());
        self.w_edge.copy_from_slice(a);
        self.w_out.copy_from_slice(b);
        Ok(())
    }

    fn frame_loss_grad(
        &self,
        graph: &TannerGraph,
        frame: &Frame,
        cfg: &TrainConfig,
        grad: &mut [f64],
    ) -> Result<f64, TrainError> {
        let (loss, g) = nbp_loss_and_gradient(
            graph,
            &frame.llr,
            &frame.codeword,
            self,
            cfg.alpha,
            cfg.iterations,
            cfg.multiloss,
        )?;
        for (acc, x) in grad.iter_mut().zip(&g) {
            *acc += x;
        }
        Ok(loss)
    }

    fn to_text(&self, alpha: f64) -> String {
        nbp_save(self, alpha)
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Batch loss of every epoch, measured before that epoch's update.
    pub losses: Vec<f64>,
    pub wall_time: Duration,
    pub seed: u64,
    pub checkpoints: Vec<PathBuf>,
}

/// Trains `model` in place.
pub fn train<M: Differentiable>(
    cfg: &TrainConfig,
    model: &mut M,
) -> Result<TrainReport, TrainError> {
    train_with_progress(cfg, model, |_, _| {})
}

/// [`train`] calling `progress(epoch, loss)` after every epoch.
pub fn train_with_progress<M: Differentiable>(
    cfg: &TrainConfig,
    model: &mut M,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let graph = build_graph(cfg.code.parity())?;
    let start = Instant::now();
    let mut params = model.params();
    let mut adam = AdamState::new(params.len(), cfg.lr.rate(0, cfg.epochs));
    let mut report = TrainReport {
        losses: Vec::with_capacity(cfg.epochs),
        wall_time: Duration::ZERO,
        seed: cfg.seed,
        checkpoints: Vec::new(),
    };
    for epoch in 0..cfg.epochs {
        let batch = sample_batch(cfg, epoch);
        let (loss, grad) = pool.install(|| model.batch_loss_grad(&graph, &batch, cfg))?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::DivergedLoss { epoch, loss });
        }
        adam.lr = cfg.lr.rate(epoch, cfg.epochs);
        adam.step(&mut params, &grad)?;
        model.set_params(&params)?;
        report.losses.push(loss);
        progress(epoch, loss);
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            let dir = cfg.checkpoint_dir.as_ref().expect("validated");
            report.checkpoints.push(write_checkpoint(
                dir,
                epoch + 1,
                loss,
                &model.to_text(cfg.alpha),
            )?);
        }
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Writes `checkpoint_<step>.model` and a sidecar `.step` file holding
/// `step <k> loss <x>`.
fn write_checkpoint(
    dir: &std::path::Path,
    step: usize,
    loss: f64,
    text: &str,
) -> Result<PathBuf, TrainError> {
    let io = |path: &std::path::Path| {
        let path = path.to_path_buf();
        move |source| TrainError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(format!("checkpoint_{step:06}.model"));
    std::fs::write(&path, text).map_err(io(&path))?;
    let side = path.with_extension("step");
    std::fs::write(&side, format!("step {step} loss {loss:.16e}\n")).map_err(io(&side))?;
    Ok(path)
}

#[cfg(test)]
mod tests;
