//! Shared fixtures for the criterion benchmarks.

use ewgnn_core::channel::{derive_stream, random_frame, sigma_from_snr_db, Frame};
use ewgnn_core::{build_graph, ldpc_regular_construct, Code, TannerGraph};

/// A (3, 6)-regular LDPC code of length `n` with `frames` noisy frames at
/// `snr_db`.
pub fn ldpc_fixture(n: usize, snr_db: f64, frames: usize) -> (Code, TannerGraph, Vec<Frame>) {
    let code = ldpc_regular_construct(n, 3, 6, 1).expect("valid parameters");
    let graph = build_graph(code.parity()).expect("non-empty matrix");
    let params = sigma_from_snr_db(snr_db);
    let batch = (0..frames as u64)
        .map(|f| random_frame(&code, &params, &mut derive_stream(7, &[f])))
        .collect();
    (code, graph, batch)
}
