//! Monte-Carlo bit and frame error rates.
//!
//! Frame `f` of SNR point `p` draws its message and noise from
//! `derive_stream(seed, [p, f])`. Frames are decoded in parallel chunks
//! and then scanned in index order against the stop rule, so the counts
//! do not depend on the worker count or on the chunk size.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{derive_stream, random_frame, sigma_from_snr_db};
use crate::codes::Code;
use crate::ewgnn::{ewgnn_decode, EwgnnConfig, EwgnnError};
use crate::msgpass::{bp_decode, hard_decision, nbp_decode, BpConfig, DecodeError, NbpWeights};
use crate::neural::{FnnKernel, FnnModel};
use crate::tanner::{build_graph, GraphError, TannerGraph};

#[derive(Debug, Error)]
pub enum BerError {
    #[error("SNR points must be finite and strictly increasing")]
    InvalidSnrGrid,
    #[error("stop rule needs min_bit_errors ≥ 1 or max_frames ≥ 1")]
    InvalidStopRule,
    #[error("cannot plot an empty table")]
    EmptyTable,
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Ewgnn(#[from] EwgnnError),
}

/// Which decoder to measure.
#[derive(Clone, Debug)]
pub enum DecoderSpec {
    /// Hard decision on the channel LLRs.
    Uncoded,
    Bp {
        early_stop: bool,
    },
    Nbp {
        weights: NbpWeights,
    },
    Ewgnn {
        model: FnnModel,
    },
}

impl DecoderSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderSpec::Uncoded => "uncoded",
            DecoderSpec::Bp { .. } => "bp",
            DecoderSpec::Nbp { .. } => "nbp",
            DecoderSpec::Ewgnn { .. } => "ewgnn",
        }
    }
}

/// Simulate until `bit_errors ≥ min_bit_errors` or `frames = max_frames`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_bit_errors: 100,
            max_frames: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BerConfig {
    pub iterations: usize,
    pub alpha: f64,
    pub stop: StopRule,
    pub seed: u64,
    /// Thread count; 0 uses the global rayon pool.
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
}

impl BerPoint {
    pub fn new(snr_db: f64, frames: u64, bit_errors: u64, frame_errors: u64, n: usize) -> Self {
        let (ber, fer) = if frames == 0 {
            (0.0, 0.0)
        } else {
            (
                bit_errors as f64 / (frames as f64 * n as f64),
                frame_errors as f64 / frames as f64,
            )
        };
        Self {
            snr_db,
            frames,
            bit_errors,
            frame_errors,
            ber,
            fer,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerTable {
    pub code_name: String,
    pub decoder_name: String,
    pub iterations: usize,
    pub points: Vec<BerPoint>,
    pub seed: u64,
}

enum Prepared<'a> {
    Uncoded,
    Bp(BpConfig),
    Nbp(BpConfig, &'a NbpWeights),
    Ewgnn(EwgnnConfig, FnnKernel),
}

impl Prepared<'_> {
    fn decode(&self, graph: &TannerGraph, llr: &[f64]) -> Result<Vec<u8>, BerError> {
        Ok(match self {
            Prepared::Uncoded => llr.iter().map(|&l| hard_decision(l)).collect(),
            Prepared::Bp(cfg) => bp_decode(graph, llr, cfg)?.c_hat,
            Prepared::Nbp(cfg, w) => nbp_decode(graph, llr, cfg, w)?.c_hat,
            Prepared::Ewgnn(cfg, k) => ewgnn_decode(graph, llr, k, cfg)?.c_hat,
        })
    }
}

/// Frames decoded per parallel chunk before the stop rule is checked.
const CHUNK: u64 = 512;

pub fn ber_run(
    code: &Code,
    decoder: &DecoderSpec,
    snrs: &[f64],
    cfg: &BerConfig,
) -> Result<BerTable, BerError> {
    if snrs.iter().any(|s| !s.is_finite()) || snrs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BerError::InvalidSnrGrid);
    }
    let stop = cfg.stop;
    if stop.min_bit_errors == 0 && stop.max_frames == 0 {
        return Err(BerError::InvalidStopRule);
    }
    let graph = build_graph(code.parity())?;
    let prepared = match decoder {
        DecoderSpec::Uncoded => Prepared::Uncoded,
        DecoderSpec::Bp { early_stop } => {
            Prepared::Bp(BpConfig::new(cfg.iterations, cfg.alpha).with_early_stop(*early_stop))
        }
        DecoderSpec::Nbp { weights } => {
            Prepared::Nbp(BpConfig::new(cfg.iterations, cfg.alpha), weights)
        }
        DecoderSpec::Ewgnn { model } => Prepared::Ewgnn(
            EwgnnConfig::new(cfg.alpha, cfg.iterations)?,
            FnnKernel::new(model),
        ),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BerError::Pool(e.to_string()))?;

    let n = code.n();
    let mut points = Vec::with_capacity(snrs.len());
    for (p, &snr) in snrs.iter().enumerate() {
        let params = sigma_from_snr_db(snr);
        let (mut frames, mut bit_errors, mut frame_errors) = (0u64, 0u64, 0u64);
        let done = |frames: u64, bit_errors: u64| {
            (stop.min_bit_errors > 0 && bit_errors >= stop.min_bit_errors)
                || frames >= stop.max_frames
        };
        while !done(frames, bit_errors) {
            let end = (frames + CHUNK).min(stop.max_frames);
            let errors: Vec<usize> = pool.install(|| {
                (frames..end)
                    .into_par_iter()
                    .map(|f| {
                        let mut rng = derive_stream(cfg.seed, &[p as u64, f]);
                        let fr = random_frame(code, &params, &mut rng);
                        let c_hat = prepared.decode(&graph, &fr.llr)?;
                        Ok(c_hat
                            .iter()
                            .zip(&fr.codeword)
                            .filter(|(a, b)| a != b)
                            .count())
                    })
                    .collect::<Result<_, BerError>>()
            })?;
            for e in errors {
                frames += 1;
                bit_errors += e as u64;
                frame_errors += u64::from(e > 0);
                if done(frames, bit_errors) {
                    break;
                }
            }
        }
        points.push(BerPoint::new(snr, frames, bit_errors, frame_errors, n));
    }
    Ok(BerTable {
        code_name: code.name.clone(),
        decoder_name: decoder.name().to_string(),
        iterations: cfg.iterations,
        points,
        seed: cfg.seed,
    })
}

pub const CSV_HEADER: &str = "snr_db,frames,bit_errors,frame_errors,ber,fer";

pub fn write_csv(table: &BerTable) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for p in &table.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.snr_db, p.frames, p.bit_errors, p.frame_errors, p.ber, p.fer
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BerPoint>, BerError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(BerError::Csv {
                line: 1,
                message: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| BerError::Csv {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let real = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err(format!("invalid number {s:?}")))
        };
        let count = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| err(format!("invalid count {s:?}")))
        };
        points.push(BerPoint {
            snr_db: real(fields[0])?,
            frames: count(fields[1])?,
            bit_errors: count(fields[2])?,
            frame_errors: count(fields[3])?,
            ber: real(fields[4])?,
            fer: real(fields[5])?,
        });
    }
    Ok(points)
}

/// Zero BERs are drawn at this value on the log axis.
pub const BER_FLOOR: f64 = 1e-8;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Log-scale BER against SNR, one polyline and legend entry per table.
pub fn plot_svg(tables: &[BerTable]) -> Result<String, BerError> {
    if tables.is_empty() || tables.iter().any(|t| t.points.is_empty()) {
        return Err(BerError::EmptyTable);
    }
    let (w, h) = (640.0, 480.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0);
    let all = tables.iter().flat_map(|t| &t.points);
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y_lo = f64::INFINITY;
    for p in all {
        x_min = x_min.min(p.snr_db);
        x_max = x_max.max(p.snr_db);
        y_lo = y_lo.min(p.ber.max(BER_FLOOR).log10().floor());
    }
    if x_max == x_min {
        x_min -= 0.5;
        x_max += 0.5;
    }
    let y_hi = 0.0;
    let y_lo = y_lo.min(-1.0);
    let px = |x: f64| left + (x - x_min) / (x_max - x_min) * (w - left - right);
    let py = |ber: f64| {
        let y = ber.max(BER_FLOOR).log10();
        top + (y_hi - y) / (y_hi - y_lo) * (h - top - bottom)
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    let mut decade = y_lo as i32;
    while decade <= y_hi as i32 {
        let y = py(10f64.powi(decade));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            w - right
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">1e{decade}</text>"#,
            left - 6.0,
            y + 4.0
        );
        decade += 1;
    }
    for x in [x_min, x_max] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{x}</text>"#,
            px(x),
            h - bottom + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">SNR (dB)</text>"#,
        left + (w - left - right) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">BER</text>"#,
        top + (h - top - bottom) / 2.0,
        top + (h - top - bottom) / 2.0
    );
    for (i, t) in tables.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = t
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.snr_db), py(p.ber)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 + 18.0 * i as f64;
        let lx = w - right - 200.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            xml_escape(&format!(
                "{} {} T={}",
                t.decoder_name, t.code_name, t.iterations
            ))
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
