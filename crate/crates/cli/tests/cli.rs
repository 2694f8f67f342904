use std::path::Path;
use std::process::{Command, Output};

use ewgnn_core::{alist_read, Code};

fn ewgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ewgnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ldpc_file(dir: &Path) -> std::path::PathBuf {
    let f = dir.join("ldpc32.alist");
    let out = ewgnn(&[
        "code",
        "ldpc",
        "--n",
        "32",
        "--wc",
        "3",
        "--wr",
        "6",
        "--seed",
        "1",
        "--out",
        p(&f),
    ]);
    assert!(out.status.success());
    f
}

#[test]
fn bch_alist_header() {
    let out = ewgnn(&["code", "bch", "--m", "6", "--delta", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("63 12"));
    assert_eq!(alist_read(&text).unwrap().cols(), 63);
}

#[test]
fn exit_codes() {
    assert_eq!(ewgnn(&["--help"]).status.code(), Some(0));
    assert_eq!(ewgnn(&["eval", "--help"]).status.code(), Some(0));
    let bad = ewgnn(&["eval", "--code", "x", "--frobnicate"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--frobnicate"));
    assert_eq!(
        ewgnn(&["code", "bch", "--m", "6", "--delta", "4"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ewgnn(&["eval", "--code", "/definitely/missing.alist"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let code = ldpc_file(dir.path());
    let with_model = ewgnn(&[
        "eval",
        "--code",
        p(&code),
        "--decoder",
        "bp",
        "--model",
        "m",
    ]);
    assert_eq!(with_model.status.code(), Some(1));
    let no_model = ewgnn(&["eval", "--code", p(&code), "--decoder", "ewgnn"]);
    assert_eq!(no_model.status.code(), Some(1));
    let bad_snr = ewgnn(&["eval", "--code", p(&code), "--snr", "3:1:0.5"]);
    assert_eq!(bad_snr.status.code(), Some(1));
}

#[test]
fn eval_is_worker_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let code = ldpc_file(dir.path());
    let mut csvs = Vec::new();
    for w in ["1", "8"] {
        let csv = dir.path().join(format!("w{w}.csv"));
        let out = ewgnn(&[
            "eval",
            "--code",
            p(&code),
            "--snr",
            "1:3:1",
            "--min-bit-errors",
            "50",
            "--max-frames",
            "5000",
            "--seed",
            "4",
            "--workers",
            w,
            "--csv",
            p(&csv),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(String::from_utf8_lossy(&csvs[0]).lines().count(), 4);
}

#[test]
fn decode_noiseless_codeword() {
    let dir = tempfile::tempdir().unwrap();
    let path = ldpc_file(dir.path());
    let code = Code::from_parity(
        "c",
        alist_read(&std::fs::read_to_string(&path).unwrap()).unwrap(),
    )
    .unwrap();
    let msg: Vec<u8> = (0..code.k()).map(|i| (i % 3 == 0) as u8).collect();
    let c = code.encode(&msg).unwrap();
    let llr: Vec<String> = c
        .iter()
        .map(|&b| if b == 0 { "9.5" } else { "-9.5" }.to_string())
        .collect();
    let out = ewgnn(&[
        "decode",
        "--code",
        p(&path),
        "--llr",
        &llr.join(","),
        "--t",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let bits: Vec<String> = c.iter().map(|b| b.to_string()).collect();
    assert_eq!(
        text.lines().next().unwrap(),
        format!("c_hat {}", bits.join(" "))
    );
    assert!(text.lines().nth(1).unwrap().starts_with("posterior "));

    let short = ewgnn(&["decode", "--code", p(&path), "--llr", "1,2,3"]);
    assert_eq!(short.status.code(), Some(1));
}

#[test]
fn train_then_eval_both_decoders() {
    let dir = tempfile::tempdir().unwrap();
    let code = ldpc_file(dir.path());
    for decoder in ["ewgnn", "nbp"] {
        let mut texts = Vec::new();
        for run in 0..2 {
            let model = dir.path().join(format!("{decoder}{run}.model"));
            let out = ewgnn(&[
                "train",
                "--code",
                p(&code),
                "--decoder",
                decoder,
                "--t",
                "3",
                "--batch",
                "6",
                "--epochs",
                "3",
                "--seed",
                "11",
                "--out",
                p(&model),
            ]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
            texts.push(std::fs::read(&model).unwrap());
        }
        assert_eq!(texts[0], texts[1]);

        let model = dir.path().join(format!("{decoder}0.model"));
        let svg = dir.path().join("curve.svg");
        let out = ewgnn(&[
            "eval",
            "--code",
            p(&code),
            "--decoder",
            decoder,
            "--model",
            p(&model),
            "--t",
            "3",
            "--snr",
            "2,3",
            "--max-frames",
            "300",
            "--svg",
            p(&svg),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let csv = String::from_utf8(out.stdout).unwrap();
        assert!(csv.starts_with("snr_db,frames,bit_errors,frame_errors,ber,fer\n2,"));
        assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
    }
}

#[test]
fn checkpoints_need_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let code = ldpc_file(dir.path());
    let out = ewgnn(&[
        "train",
        "--code",
        p(&code),
        "--epochs",
        "2",
        "--checkpoint-every",
        "1",
        "--out",
        p(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
