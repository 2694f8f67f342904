//! Decoders for short binary linear block codes: belief propagation, neural
//! BP with tied edge weights, and an edge-weighted graph neural network
//! decoder whose per-edge weights come from a small shared feed-forward
//! network. Includes code constructions, a seeded AWGN channel, training
//! and a Monte-Carlo bit-error-rate harness.

pub mod ber;
pub mod channel;
pub mod codes;
pub mod ewgnn;
pub mod msgpass;
pub mod neural;
pub mod tanner;
pub mod trainer;

pub use ber::{ber_run, BerConfig, BerPoint, BerTable, DecoderSpec, StopRule};
pub use channel::{derive_stream, sigma_from_snr_db, Frame, RngStream};
pub use codes::{
    alist_read, alist_write, bch_construct, ldpc_regular_construct, Code, CodeError, Gf2Matrix,
};
pub use ewgnn::{ewgnn_decode, EwgnnConfig};
pub use msgpass::{bp_decode, nbp_decode, BpConfig, DecodeResult, NbpWeights};
pub use neural::{model_load, model_save, FnnModel};
pub use tanner::{build_graph, TannerGraph};
pub use trainer::{train, TrainConfig, TrainReport};
