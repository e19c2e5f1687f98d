#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use m2bm::wav;
use serde_json::{json, Value};

pub fn m2bm(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_m2bm")).current_dir(cwd).args(args).output().expect("spawn m2bm")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Runs and asserts success.
pub fn ok(cwd: &Path, args: &[&str]) {
    let out = m2bm(cwd, args);
    assert_eq!(code(&out), 0, "m2bm {args:?} failed: {}", stderr(&out));
}

pub fn write_json(path: &Path, value: &Value) {
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn small_stft() -> Value {
    json!({"win_len": 64, "hop": 16, "fft_size": 64})
}

/// A short scene with one target and one noise source at distinct
/// delays on each mic.
pub fn scene(seed: u64, mics: usize, samples: usize) -> Value {
    let fir = |delay: usize, gain: f64| {
        let mut f = vec![0.0; delay + 2];
        f[delay] = gain;
        f[delay + 1] = 0.3 * gain;
        f
    };
    let target: Vec<Vec<f64>> = (0..mics).map(|m| fir(m, 1.0 - 0.1 * m as f64)).collect();
    let noise: Vec<Vec<f64>> = (0..mics).map(|m| fir(mics - 1 - m, 0.8)).collect();
    json!({
        "num_mics": mics,
        "num_samples": samples,
        "target_firs": target,
        "noise_firs": [noise],
        "target_source": {"tone_complex": {"f0": 120.0 + 17.0 * seed as f64, "harmonics": 10}},
        "noise_sources": [{"noise": {"pole": 0.5}}],
        "snr_db": 0.0,
        "ref_mic": 0,
        "seed": seed,
        "stft": small_stft(),
    })
}

/// Writes `name.json` and simulates it into directory `name`.
pub fn simulate(cwd: &Path, name: &str, seed: u64, mics: usize, samples: usize) -> PathBuf {
    write_json(&cwd.join(format!("{name}.json")), &scene(seed, mics, samples));
    ok(cwd, &["simulate", &format!("{name}.json"), "--out", name]);
    cwd.join(name)
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn read_wav(path: &Path) -> wav::Audio {
    wav::read(path).unwrap()
}

/// Every file under `dir`, relative, sorted.
pub fn tree(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// Manifest contents with the run duration removed.
pub fn manifest_without_time(path: &Path) -> Value {
    let mut v = read_json(path);
    v.as_object_mut().unwrap().remove("wall_time");
    v
}
