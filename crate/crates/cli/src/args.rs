use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "ewgnn",
    version,
    about = "Train and evaluate message-passing decoders for short block codes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Construct a parity-check matrix and write it as alist
    #[command(subcommand)]
    Code(CodeCommand),
    /// Train an EW-GNN or neural BP model
    Train(TrainArgs),
    /// Monte-Carlo BER/FER sweep
    Eval(EvalArgs),
    /// Decode one frame of channel LLRs
    Decode(DecodeArgs),
}

#[derive(Subcommand, Debug)]
pub enum CodeCommand {
    /// Narrow-sense primitive binary BCH code of length 2^m - 1
    Bch {
        #[arg(long)]
        m: u32,
        /// Designed distance (odd)
        #[arg(long)]
        delta: usize,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random (wc, wr)-regular LDPC code
    Ldpc {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        wc: usize,
        #[arg(long, default_value_t = 6)]
        wr: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainDecoder {
    Ewgnn,
    Nbp,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalDecoder {
    Uncoded,
    Bp,
    Nbp,
    Ewgnn,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Parity-check matrix in alist format
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long, value_enum, default_value = "ewgnn")]
    pub decoder: TrainDecoder,
    /// Decoding iterations
    #[arg(long, default_value_t = 8)]
    pub t: usize,
    #[arg(long, default_value_t = 500)]
    pub batch: usize,
    #[arg(long, default_value_t = 1.0)]
    pub snr_min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub snr_max: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial learning rate; decays ×0.1 at 60% and 85% of the epochs
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Clip factor of the check kernel
    #[arg(long, default_value_t = 1e-7)]
    pub alpha: f64,
    /// NBP only: score every iteration instead of the last
    #[arg(long)]
    pub multiloss: bool,
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long, value_enum, default_value = "bp")]
    pub decoder: EvalDecoder,
    /// Model file; required for nbp and ewgnn
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub t: usize,
    /// SNR grid in dB: start:stop:step (stop included when on the grid) or a comma list
    #[arg(long, default_value = "1:6:0.5")]
    pub snr: String,
    #[arg(long, default_value_t = 100)]
    pub min_bit_errors: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_frames: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Clip factor; defaults to the model's, else 1e-7
    #[arg(long)]
    pub alpha: Option<f64>,
    /// BP only: stop once the syndrome is satisfied
    #[arg(long)]
    pub early_stop: bool,
    /// CSV output file; stdout when omitted
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long, value_enum, default_value = "bp")]
    pub decoder: EvalDecoder,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated channel LLRs, one per code bit
    #[arg(long, allow_hyphen_values = true)]
    pub llr: String,
    #[arg(long, default_value_t = 8)]
    pub t: usize,
    /// Clip factor; defaults to the model's, else 1e-7
    #[arg(long)]
    pub alpha: Option<f64>,
}
