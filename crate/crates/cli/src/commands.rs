use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use ewgnn_core::ber::{plot_svg, write_csv};
use ewgnn_core::ewgnn::ewgnn_decode_with_history;
use ewgnn_core::neural::{model_load, nbp_load};
use ewgnn_core::trainer::{train_with_progress, Differentiable, LrSchedule};
use ewgnn_core::{
    alist_read, alist_write, bch_construct, ber_run, bp_decode, build_graph,
    ldpc_regular_construct, nbp_decode, BerConfig, BpConfig, Code, DecoderSpec, EwgnnConfig,
    FnnModel, NbpWeights, StopRule, TrainConfig,
};

use crate::args::{
    Cli, CodeCommand, Command, DecodeArgs, EvalArgs, EvalDecoder, TrainArgs, TrainDecoder,
};

pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Code(cmd) => code(cmd),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Decode(a) => decode(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn code(cmd: CodeCommand) -> Result<(), Failure> {
    let (code, out) = match cmd {
        CodeCommand::Bch { m, delta, out } => {
            (bch_construct(m, delta).map_err(anyhow::Error::from)?, out)
        }
        CodeCommand::Ldpc {
            n,
            wc,
            wr,
            seed,
            out,
        } => (
            ldpc_regular_construct(n, wc, wr, seed).map_err(anyhow::Error::from)?,
            out,
        ),
    };
    eprintln!("{}: n = {}, k = {}", code.name, code.n(), code.k());
    emit(out.as_deref(), &alist_write(code.parity()))?;
    Ok(())
}

fn load_code(path: &Path) -> Result<Code> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let h = alist_read(&text).with_context(|| format!("parsing {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "code".into());
    Ok(Code::from_parity(name, h)?)
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    if a.checkpoint_every > 0 && a.checkpoint_dir.is_none() {
        return Err(Failure::Usage(
            "--checkpoint-every requires --checkpoint-dir".into(),
        ));
    }
    let code = load_code(&a.code)?;
    let cfg = TrainConfig {
        batch_size: a.batch,
        snr_min: a.snr_min,
        snr_max: a.snr_max,
        iterations: a.t,
        alpha: a.alpha,
        lr: LrSchedule::StepDecay {
            base: a.lr,
            milestones: vec![0.6, 0.85],
            factor: 0.1,
            floor: 1e-5,
        },
        epochs: a.epochs,
        seed: a.seed,
        checkpoint_every: a.checkpoint_every,
        checkpoint_dir: a.checkpoint_dir.clone(),
        multiloss: a.multiloss,
        workers: a.workers,
        ..TrainConfig::new(code)
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let text = match a.decoder {
        TrainDecoder::Ewgnn => {
            let mut model = FnnModel::init(a.seed, 1.0, a.alpha);
            fit(&cfg, &mut model)?
        }
        TrainDecoder::Nbp => {
            let graph = build_graph(cfg.code.parity()).map_err(anyhow::Error::from)?;
            let mut w = NbpWeights::ones(graph.n_edges());
            fit(&cfg, &mut w)?
        }
    };
    fs::write(&a.out, text)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(Failure::Runtime)
}

fn fit<M: Differentiable>(cfg: &TrainConfig, model: &mut M) -> Result<String> {
    let every = (cfg.epochs / 20).max(1);
    let report = train_with_progress(cfg, model, |epoch, loss| {
        if epoch % every == 0 || epoch + 1 == cfg.epochs {
            eprintln!("epoch {epoch} loss {loss:.6}");
        }
    })?;
    eprintln!(
        "trained {} epochs in {:.1?}",
        report.losses.len(),
        report.wall_time
    );
    Ok(model.to_text(cfg.alpha))
}

/// `start:stop:step` (inclusive of `stop` when on the grid) or a comma list.
pub(crate) fn parse_snr(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid SNR value {s:?}"))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                return Err(format!(
                    "SNR range {spec:?} needs step > 0 and stop ≥ start"
                ));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect()
        }
        [_] => spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("invalid SNR grid {spec:?}")),
    };
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!(
            "SNR points in {spec:?} must be strictly increasing"
        ));
    }
    Ok(grid)
}

/// Resolves the decoder and its clip factor, enforcing that models go with
/// nbp/ewgnn only.
fn decoder_spec(
    decoder: EvalDecoder,
    model: Option<&Path>,
    alpha: Option<f64>,
    early_stop: bool,
) -> Result<(DecoderSpec, f64), Failure> {
    let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let default_alpha = 1e-7;
    match (decoder, model) {
        (EvalDecoder::Uncoded | EvalDecoder::Bp, Some(_)) => Err(Failure::Usage(
            "--model is only accepted with --decoder nbp or ewgnn".into(),
        )),
        (EvalDecoder::Nbp | EvalDecoder::Ewgnn, None) => Err(Failure::Usage(
            "--model is required for --decoder nbp and ewgnn".into(),
        )),
        (EvalDecoder::Uncoded, None) => Ok((DecoderSpec::Uncoded, alpha.unwrap_or(default_alpha))),
        (EvalDecoder::Bp, None) => Ok((
            DecoderSpec::Bp { early_stop },
            alpha.unwrap_or(default_alpha),
        )),
        (EvalDecoder::Nbp, Some(p)) => {
            let (weights, a) =
                nbp_load(&read(p)?).with_context(|| format!("loading {}", p.display()))?;
            Ok((DecoderSpec::Nbp { weights }, alpha.unwrap_or(a)))
        }
        (EvalDecoder::Ewgnn, Some(p)) => {
            let model =
                model_load(&read(p)?).with_context(|| format!("loading {}", p.display()))?;
            let a = alpha.unwrap_or(model.alpha);
            Ok((DecoderSpec::Ewgnn { model }, a))
        }
    }
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let snrs = parse_snr(&a.snr).map_err(Failure::Usage)?;
    if a.early_stop && a.decoder != EvalDecoder::Bp {
        return Err(Failure::Usage(
            "--early-stop applies to --decoder bp only".into(),
        ));
    }
    let (spec, alpha) = decoder_spec(a.decoder, a.model.as_deref(), a.alpha, a.early_stop)?;
    let code = load_code(&a.code)?;
    let cfg = BerConfig {
        iterations: a.t,
        alpha,
        stop: StopRule {
            min_bit_errors: a.min_bit_errors,
            max_frames: a.max_frames,
        },
        seed: a.seed,
        workers: a.workers,
    };
    let table = ber_run(&code, &spec, &snrs, &cfg).map_err(anyhow::Error::from)?;
    emit(a.csv.as_deref(), &write_csv(&table))?;
    if let Some(svg) = &a.svg {
        let text = plot_svg(std::slice::from_ref(&table)).map_err(anyhow::Error::from)?;
        emit(Some(svg), &text)?;
    }
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<(), Failure> {
    let llr = a
        .llr
        .split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Failure::Usage(format!("invalid --llr list {:?}", a.llr)))?;
    let (spec, alpha) = decoder_spec(a.decoder, a.model.as_deref(), a.alpha, false)?;
    let code = load_code(&a.code)?;
    if llr.len() != code.n() {
        return Err(Failure::Usage(format!(
            "--llr has {} values but the code has n = {}",
            llr.len(),
            code.n()
        )));
    }
    let graph = build_graph(code.parity()).map_err(anyhow::Error::from)?;
    let (c_hat, posterior): (Vec<u8>, Vec<f64>) = match &spec {
        DecoderSpec::Uncoded => (
            llr.iter().map(|&l| u8::from(l <= 0.0)).collect(),
            llr.clone(),
        ),
        DecoderSpec::Bp { .. } => {
            let r =
                bp_decode(&graph, &llr, &BpConfig::new(a.t, alpha)).map_err(anyhow::Error::from)?;
            (r.c_hat, r.posterior)
        }
        DecoderSpec::Nbp { weights } => {
            let r = nbp_decode(&graph, &llr, &BpConfig::new(a.t, alpha), weights)
                .map_err(|e| anyhow!(e))?;
            (r.c_hat, r.posterior)
        }
        DecoderSpec::Ewgnn { model } => {
            let cfg = EwgnnConfig::new(alpha, a.t).map_err(|e| Failure::Usage(e.to_string()))?;
            let (r, _) = ewgnn_decode_with_history(&graph, &llr, model, &cfg)
                .map_err(anyhow::Error::from)?;
            (r.c_hat, r.posterior)
        }
    };
    let bits: Vec<String> = c_hat.iter().map(|b| b.to_string()).collect();
    let post: Vec<String> = posterior.iter().map(|p| p.to_string()).collect();
    println!("c_hat {}", bits.join(" "));
    println!("posterior {}", post.join(" "));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::parse_snr;

    #[test]
    fn snr_grids() {
        assert_eq!(parse_snr("1:6:0.5").unwrap().len(), 11);
        assert_eq!(parse_snr("1:6:0.5").unwrap()[10], 6.0);
        assert_eq!(
            parse_snr("0:1:0.1").unwrap(),
            vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        );
        assert_eq!(parse_snr("1:2:0.4").unwrap(), vec![1.0, 1.4, 1.8]);
        assert_eq!(parse_snr("4,4.5,5").unwrap(), vec![4.0, 4.5, 5.0]);
        assert_eq!(parse_snr("3.5").unwrap(), vec![3.5]);
        assert!(parse_snr("2:1:0.5").is_err());
        assert!(parse_snr("1:2:0").is_err());
        assert!(parse_snr("1:2").is_err());
        assert!(parse_snr("5,4").is_err());
        assert!(parse_snr("x").is_err());
    }
}
