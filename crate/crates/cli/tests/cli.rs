use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use texvc::codec::decode_sequence;
use texvc::eval::RdReport;
use texvc::motion::AffineMotion;
use texvc::y4m::read_y4m;

fn texvc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texvc")).current_dir(dir).args(args).output().expect("spawn texvc")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = texvc(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A 9-frame 96x64 panning clip with ground-truth masks in `gt/`.
fn clip(dir: &Path, seed: &str) {
    ok(
        dir,
        &[
            "gen-data", "--total", "400", "--out", "d.txds", "--clip", "clip.y4m", "--clip-masks", "gt",
            "--clip-width", "96", "--clip-height", "64", "--clip-frames", "9", "--seed", seed,
        ],
    );
}

#[test]
fn encode_then_decode() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    clip(d, "5");
    ok(d, &["encode", "--input", "clip.y4m", "--masks", "gt", "--q", "24", "--out", "x.txc1", "--stats", "x.json"]);
    ok(d, &["decode", "--in", "x.txc1", "--out", "y.y4m"]);
    let bytes = fs::read(d.join("x.txc1")).unwrap();
    let decoded = read_y4m(fs::File::open(d.join("y.y4m")).unwrap()).unwrap();
    assert_eq!(decoded, decode_sequence(&bytes).unwrap());
    let stats: serde_json::Value = serde_json::from_slice(&fs::read(d.join("x.json")).unwrap()).unwrap();
    assert_eq!(stats["frames"].as_array().unwrap().len(), 9);
    assert_eq!(stats["total_bytes"].as_u64().unwrap() as usize, bytes.len());
}

#[test]
fn usage_and_domain_errors() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    clip(d, "1");
    let code = |args: &[&str]| texvc(d, args).status.code();
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&[]), Some(2));
    assert_eq!(code(&["encode", "--input", "clip.y4m"]), Some(2));
    assert_eq!(code(&["encode", "--input", "clip.y4m", "--out", "x.txc1", "--bogus"]), Some(2));
    assert_eq!(code(&["encode", "--input", "clip.y4m", "--out", "x.txc1"]), Some(2));
    assert_eq!(code(&["encode", "--input", "raw.yuv", "--no-texture", "--out", "x.txc1"]), Some(2));
    assert_eq!(code(&["rd-sweep", "--input", "clip.y4m", "--masks", "gt", "--out", "r.json", "--q", "16,24"]), Some(2));
    assert_eq!(code(&["--threads", "0", "decode", "--in", "a", "--out", "b"]), Some(2));
    assert_eq!(code(&["decode", "--in", "missing.txc1", "--out", "y.y4m"]), Some(1));
    assert_eq!(code(&["decode", "--in", "d.txds", "--out", "y.y4m"]), Some(1));
    assert_eq!(code(&["encode", "--input", "clip.y4m", "--masks", "gt", "--q", "99", "--out", "x.txc1"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
    let v = ok(d, &["--version"]);
    assert!(v.contains("TXC1") && v.contains("TXNN"), "{v}");
}

#[test]
fn bd_reproduces_sweep() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    clip(d, "2");
    let table = ok(d, &["rd-sweep", "--input", "clip.y4m", "--masks", "gt", "--out", "r/report.json", "--streams-dir", "s"]);
    let report: RdReport = serde_json::from_slice(&fs::read(d.join("r/report.json")).unwrap()).unwrap();
    assert_eq!(fs::read_to_string(d.join("r/report.txt")).unwrap(), table);
    assert_eq!(fs::read_dir(d.join("s")).unwrap().count(), 8);
    let out = ok(d, &["bd", "--baseline", "r/report.baseline.json", "--test", "r/report.texture.json"]);
    let value = |label: &str| -> f64 {
        let line = out.lines().find(|l| l.starts_with(label)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(Some(value("BD-RATE")), report.bd_rate);
    assert_eq!(Some(value("BD-PSNR")), report.bd_psnr);
}

#[test]
fn motion_prints_six_parameters() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    clip(d, "3");
    let out = ok(d, &["motion", "--cur", "clip.y4m", "--cur-frame", "1", "--ref", "clip.y4m", "--mask", "gt/clip.mask.1.pgm"]);
    let m: AffineMotion = out.trim().parse().unwrap();
    let truth = AffineMotion::translation(2.0, 0.0);
    assert!(m.params().iter().zip(truth.params()).all(|(a, b)| (a - b).abs() < 0.05), "{m}");
}

/// Every artifact of one gen-data, train, segment, encode and rd-sweep run.
fn pipeline(dir: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let g = ["--seed", "11", "--threads", threads];
    let run = |args: &[&str]| ok(dir, &[args, &g[..]].concat());
    clip(dir, "11");
    run(&["gen-data", "--total", "2000", "--out", "train.txds"]);
    run(&["train", "--data", "train.txds", "--out", "w.txnn", "--log", "log.json", "--epochs", "2"]);
    run(&["segment", "--weights", "w.txnn", "--input", "clip.y4m", "--out-dir", "m"]);
    run(&["encode", "--input", "clip.y4m", "--masks", "m", "--out", "x.txc1", "--stats", "x.json"]);
    run(&["rd-sweep", "--input", "clip.y4m", "--masks", "m", "--out", "r/report.json", "--streams-dir", "s"]);
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in fs::read_dir(&p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                stack.push(e);
            } else {
                files.push((e.strip_prefix(dir).unwrap().display().to_string(), fs::read(&e).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn same_seed_same_artifacts_at_any_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (x, y) = (pipeline(a.path(), "1"), pipeline(b.path(), "3"));
    assert!(x.len() > 30, "{} files", x.len());
    assert_eq!(x.iter().map(|f| &f.0).collect::<Vec<_>>(), y.iter().map(|f| &f.0).collect::<Vec<_>>());
    for (f, g) in x.iter().zip(&y) {
        assert!(f.1 == g.1, "{} differs", f.0);
    }
}
