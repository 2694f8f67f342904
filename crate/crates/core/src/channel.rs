//! BPSK over AWGN, channel LLRs, and the deterministic random streams used
//! throughout the crate.
//!
//! # Random-number contract
//!
//! Every random draw comes from an [`RngStream`] obtained with
//! [`derive_stream`]; nothing reads a global generator. The construction is
//! plain integer arithmetic so other implementations can reproduce it bit
//! for bit:
//!
//! * `mix64(z)`: `z ^= z >> 30; z *= 0xbf58476d1ce4e5b9; z ^= z >> 27;
//!   z *= 0x94d049bb133111eb; z ^= z >> 31` (SplitMix64 finalizer, wrapping
//!   multiplication).
//! * `derive_stream(seed, labels)`: `state = mix64(seed)`, then for each
//!   label `state = mix64(state ^ mix64(label + GOLDEN))` with
//!   `GOLDEN = 0x9e3779b97f4a7c15`.
//! * `next_u64`: `state += GOLDEN; return mix64(state)`.
//! * `next_f64`: `(next_u64 >> 11) · 2⁻⁵³`, uniform on `[0, 1)`.
//! * Gaussian pairs by Box–Muller: `u1 = 1 − next_f64()` (in `(0, 1]`),
//!   `u2 = next_f64()`, `r = sqrt(−2 ln u1)`, output `(r cos 2πu2, r sin 2πu2)`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::codes::Code;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("noise variance must be positive, got {0}")]
    NonpositiveVariance(f64),
}

/// A reproducible stream of 64-bit values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
    stream_id: u64,
}

/// Derives the stream for `(seed, labels)`.
///
/// Distinct label paths give statistically independent streams; the same
/// path always gives the same stream.
pub fn derive_stream(seed: u64, labels: &[u64]) -> RngStream {
    let mut state = mix64(seed);
    let mut id = 0u64;
    for &label in labels {
        let h = mix64(label.wrapping_add(GOLDEN));
        state = mix64(state ^ h);
        id = mix64(id ^ h);
    }
    RngStream {
        state,
        stream_id: id,
    }
}

impl RngStream {
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` by multiply-shift (`bound > 0`).
    #[inline]
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// Uniform on `[lo, hi]`; exactly `lo` when the interval is degenerate.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.next_f64();
        if lo == hi {
            lo
        } else {
            lo + (hi - lo) * u
        }
    }

    /// Two independent standard normals.
    #[inline]
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        (r * c, r * s)
    }

    /// Fisher–Yates shuffle, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// SNR in dB together with the noise level it implies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub snr_db: f64,
    pub sigma: f64,
    pub sigma2: f64,
}

/// `γ = 10·log10(1/σ²)`, so `σ = 10^(−γ/20)`.
pub fn sigma_from_snr_db(snr_db: f64) -> ChannelParams {
    let sigma = 10f64.powf(-snr_db / 20.0);
    ChannelParams {
        snr_db,
        sigma,
        sigma2: sigma * sigma,
    }
}

/// BPSK-modulates `codeword` (`x = 1 − 2c`) and adds Gaussian noise.
///
/// Draws `⌈n/2⌉` Box–Muller pairs; the unused half of the last pair is
/// discarded when `n` is odd.
pub fn transmit(codeword: &[u8], params: &ChannelParams, rng: &mut RngStream) -> Vec<f64> {
    let mut y = Vec::with_capacity(codeword.len());
    for pair in codeword.chunks(2) {
        let (z0, z1) = rng.gaussian_pair();
        for (&c, z) in pair.iter().zip([z0, z1]) {
            let x = 1.0 - 2.0 * f64::from(c & 1);
            y.push(x + params.sigma * z);
        }
    }
    y
}

/// Channel LLRs `s_i = 2·y_i / σ²`.
pub fn llr_from_channel(y: &[f64], sigma2: f64) -> Result<Vec<f64>, ChannelError> {
    if !(sigma2 > 0.0) {
        return Err(ChannelError::NonpositiveVariance(sigma2));
    }
    let scale = 2.0 / sigma2;
    Ok(y.iter().map(|&v| scale * v).collect())
}

/// A transmitted codeword together with its channel LLRs.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub codeword: Vec<u8>,
    pub llr: Vec<f64>,
    pub snr_db: f64,
}

/// Uniform random message, encoded, sent over BPSK/AWGN. Message bits are
/// drawn first, then the noise, all from `rng`.
pub fn random_frame(code: &Code, params: &ChannelParams, rng: &mut RngStream) -> Frame {
    let msg: Vec<u8> = (0..code.k()).map(|_| rng.next_bit()).collect();
    let codeword = code.encode(&msg).expect("message length equals k");
    let y = transmit(&codeword, params, rng);
    Frame {
        llr: llr_from_channel(&y, params.sigma2).expect("sigma is positive"),
        codeword,
        snr_db: params.snr_db,
    }
}
