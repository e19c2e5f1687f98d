mod common;

use std::fs;

use common::*;
use serde_json::json;

#[test]
fn simulate_writes_images_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), "s", 1, 2, 3200);
    let mut files: Vec<String> = tree(&out).iter().map(|p| p.display().to_string()).collect();
    files.sort();
    assert_eq!(files, ["manifest.json", "mixture.wav", "noise.wav", "target.wav"]);
    let x = read_wav(&out.join("target.wav"));
    let v = read_wav(&out.join("noise.wav"));
    let y = read_wav(&out.join("mixture.wav"));
    assert_eq!((y.num_channels(), y.len(), y.sample_rate), (2, 3200, 16000));
    let snr = 10.0 * (energy(&x.channels[0]) / energy(&v.channels[0])).log10();
    assert!(snr.abs() < 1e-3, "{snr}");
    for c in 0..2 {
        for n in 0..y.len() {
            assert!((y.channels[c][n] - x.channels[c][n] - v.channels[c][n]).abs() < 1e-6);
        }
    }
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 1);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
    assert!(m["wall_time"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_pcm16_and_wav_sources() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = scene(2, 3, 1600);
    spec["snr_db"] = json!(6.0);
    spec["target_firs"] = json!([[0.5], [0.4], [0.3]]);
    spec["noise_firs"] = json!([[[0.2], [0.2], [0.2]]]);
    write_json(&dir.path().join("a.json"), &spec);
    ok(dir.path(), &["simulate", "a.json", "--out", "a", "--format", "pcm16"]);
    let a = read_wav(&dir.path().join("a/target.wav"));
    assert_eq!(a.num_channels(), 3);

    // reuse the rendered target of mic 0 (scaled) as a dry WAV source
    let dry: Vec<f64> = a.channels[0].iter().map(|v| 2.0 * v).collect();
    m2bm::wav::write(
        &dir.path().join("dry.wav"),
        &m2bm::wav::Audio::mono(16000, dry.clone()),
        m2bm::wav::SampleFormat::Float32,
    )
    .unwrap();
    spec["target_source"] = json!({"wav": {"path": "dry.wav"}});
    spec["target_firs"] = json!([[1.0], [1.0], [1.0]]);
    write_json(&dir.path().join("b.json"), &spec);
    ok(dir.path(), &["simulate", "b.json", "--out", "b"]);
    let b = read_wav(&dir.path().join("b/target.wav"));
    for (p, q) in b.channels[1].iter().zip(&dry) {
        assert!((p - q).abs() < 1e-6);
    }
    let m = read_json(&dir.path().join("b/manifest.json"));
    assert!(m["inputs"].as_array().unwrap().iter().any(|p| p.as_str().unwrap().ends_with("dry.wav")));
}

#[test]
fn bad_invocations_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    assert_eq!(code(&m2bm(cwd, &["simulate", "missing.json", "--out", "x"])), 1);
    fs::write(cwd.join("bad.json"), "{\"num_mics\": 1}").unwrap();
    assert_eq!(code(&m2bm(cwd, &["simulate", "bad.json", "--out", "x"])), 1);
    let mut one_mic = scene(0, 2, 800);
    one_mic["num_mics"] = json!(1);
    write_json(&cwd.join("one.json"), &one_mic);
    let out = m2bm(cwd, &["simulate", "one.json", "--out", "x"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("num_mics"));
    assert_eq!(code(&m2bm(cwd, &["frobnicate"])), 1);
    assert_eq!(code(&m2bm(cwd, &["beamform", "y.wav", "--out", "o", "--ref-mic", "0"])), 1);
    assert_eq!(code(&m2bm(cwd, &["--help"])), 0);
    assert_eq!(code(&m2bm(cwd, &["--version"])), 0);
}

#[test]
fn oracle_beamform_report() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    simulate(cwd, "s", 3, 4, 4000);
    ok(
        cwd,
        &[
            "beamform",
            "s/mixture.wav",
            "--oracle",
            "--ref-mic",
            "1",
            "--mics",
            "0,1,3",
            "--win",
            "64",
            "--hop",
            "16",
            "--out",
            "bf",
        ],
    );
    let report = read_json(&cwd.join("bf/beamform.json"));
    assert!(report["max_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(report["mic_subset"], json!([0, 1, 3]));
    assert_eq!(report["residuals"].as_array().unwrap().len(), 33);
    assert_eq!(report["fallback_count"], json!(report["fallback_bins"].as_array().unwrap().len()));
    let y = read_wav(&cwd.join("bf/beamformed.wav"));
    assert_eq!((y.num_channels(), y.len()), (1, 4000));

    // explicit estimates directory gives the same result as --oracle
    ok(
        cwd,
        &[
            "beamform",
            "s/mixture.wav",
            "--estimates",
            "s",
            "--ref-mic",
            "1",
            "--mics",
            "0,1,3",
            "--win",
            "64",
            "--hop",
            "16",
            "--out",
            "bf2",
        ],
    );
    assert_eq!(fs::read(cwd.join("bf/beamformed.wav")).unwrap(), fs::read(cwd.join("bf2/beamformed.wav")).unwrap());

    for bad in [
        vec!["--oracle", "--mics", "1"],
        vec!["--oracle", "--mics", "0,2"],
        vec!["--estimates", "nowhere"],
        vec!["--oracle", "--win", "64"],
    ] {
        let mut args = vec!["beamform", "s/mixture.wav", "--ref-mic", "1", "--out", "bad"];
        args.extend(bad.iter().copied());
        let out = m2bm(cwd, &args);
        assert_eq!(code(&out), 1, "{bad:?}: {}", stderr(&out));
    }
}

fn train_config(mode: &str, steps: usize, entries: serde_json::Value) -> serde_json::Value {
    json!({
        "train": {
            "mode": mode,
            "lr": 0.1,
            "steps": steps,
            "batch": 2,
            "seed": 7,
            "fcp": {"past_taps": 3, "future_taps": 1},
            "model": {"input_channels": 2, "bands": 11, "context_past": 1, "init": {"random": {"std": 0.05}}}
        },
        "stft": small_stft(),
        "ref_mic": 0,
        "dataset": entries,
    })
}

fn supervised_entries(n: usize) -> serde_json::Value {
    json!((0..n)
        .map(|i| json!({"mixture": format!("s{i}/mixture.wav"), "tag": "simulated", "target": format!("s{i}/target.wav"), "noise": format!("s{i}/noise.wav")}))
        .collect::<Vec<_>>())
}

#[test]
fn supervised_training_halves_loss_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    for i in 0..2 {
        simulate(cwd, &format!("s{i}"), 10 + i as u64, 2, 2400);
    }
    write_json(&cwd.join("train.json"), &train_config("supervised", 150, supervised_entries(2)));
    let start = std::time::Instant::now();
    ok(cwd, &["train", "train.json", "--out", "run1"]);
    assert!(start.elapsed().as_secs() < 60);
    let report = read_json(&cwd.join("run1/report.json"));
    let (a, b) = (report["train"]["initial_loss"].as_f64().unwrap(), report["train"]["final_loss"].as_f64().unwrap());
    assert!(b <= 0.5 * a, "{a} -> {b}");
    assert_eq!(report["train"]["loss_curve"].as_array().unwrap().len(), 150);
    assert_eq!(report["train"]["mode_counts"]["supervised"], json!(300));

    ok(cwd, &["train", "train.json", "--out", "run2"]);
    for f in ["model.bin", "model.json", "report.json"] {
        assert_eq!(fs::read(cwd.join("run1").join(f)).unwrap(), fs::read(cwd.join("run2").join(f)).unwrap(), "{f}");
    }
    let side = read_json(&cwd.join("run1/model.json"));
    assert_eq!(side["seed"], 7);
    assert_eq!(side["step"], 150);
    assert_eq!(fs::metadata(cwd.join("run1/model.bin")).unwrap().len(), 8 * side["num_params"].as_u64().unwrap());

    // the trained model improves a scene it never saw
    simulate(cwd, "h", 40, 2, 2400);
    write_json(
        &cwd.join("eval.json"),
        &json!({"kind": "checkpoint", "checkpoint": "run1/model.bin", "scenes": [{"mixture": "h/mixture.wav", "target": "h/target.wav", "noise": "h/noise.wav"}],
                "fcp": {"past_taps": 3, "future_taps": 1}}),
    );
    ok(cwd, &["eval", "eval.json", "--out", "ev"]);
    let ev = read_json(&cwd.join("ev/eval.json"));
    assert!(ev["si_sdr_db"].as_f64().unwrap() > ev["input_si_sdr_db"].as_f64().unwrap(), "{ev}");
}

#[test]
fn missing_beamformed_files_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    simulate(cwd, "s0", 1, 2, 1600);
    let entries = json!([
        {"mixture": "s0/mixture.wav", "tag": "simulated", "target": "s0/target.wav", "noise": "s0/noise.wav"},
        {"mixture": "s0/mixture.wav", "tag": "real_like", "beamformed": "bf/first.wav"},
        {"mixture": "s0/mixture.wav", "tag": "real_like", "beamformed": "bf/second.wav"},
    ]);
    write_json(&cwd.join("t.json"), &train_config("super_m2bm", 2, entries));
    let out = m2bm(cwd, &["train", "t.json", "--out", "r"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("bf/first.wav") && !err.contains("second"), "{err}");

    let entries = json!([{"mixture": "s0/mixture.wav", "tag": "real_like"}]);
    write_json(&cwd.join("t2.json"), &train_config("m2bm", 2, entries));
    let out = m2bm(cwd, &["train", "t2.json", "--out", "r"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("dataset[0]"));
}

#[test]
fn divergence_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    simulate(cwd, "s0", 1, 2, 1600);
    let mut cfg = train_config("supervised", 50, supervised_entries(1));
    cfg["train"]["lr"] = json!(1e300);
    write_json(&cwd.join("t.json"), &cfg);
    let out = m2bm(cwd, &["train", "t.json", "--out", "r"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("step"), "{}", stderr(&out));
}

#[test]
fn m2bm_pipeline_with_model_beamformer() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    simulate(cwd, "s0", 1, 3, 2400);
    simulate(cwd, "r0", 2, 3, 2400);
    let mut cfg = train_config("supervised", 20, supervised_entries(1));
    cfg["train"]["model"]["input_channels"] = json!(1);
    write_json(&cwd.join("sup.json"), &cfg);
    ok(cwd, &["train", "sup.json", "--out", "sup"]);
    ok(cwd, &["beamform", "r0/mixture.wav", "--checkpoint", "sup/model.bin", "--ref-mic", "0", "--out", "r0/bf"]);
    let entries = json!([
        {"mixture": "s0/mixture.wav", "tag": "simulated", "target": "s0/target.wav", "noise": "s0/noise.wav"},
        {"mixture": "r0/mixture.wav", "tag": "real_like", "beamformed": "r0/bf/beamformed.wav"},
    ]);
    let mut cfg = train_config("super_m2bm", 5, entries);
    cfg["heldout"] =
        json!([{"mixture": "r0/mixture.wav", "tag": "real_like", "target": "r0/target.wav", "noise": "r0/noise.wav"}]);
    cfg["require_decrease"] = json!(false);
    write_json(&cwd.join("m.json"), &cfg);
    ok(cwd, &["train", "m.json", "--out", "m"]);
    let report = read_json(&cwd.join("m/report.json"));
    assert_eq!(report["train"]["mode_counts"], json!({"supervised": 5, "m2m": 0, "m2bm": 5}));
    assert!(report["heldout"]["si_sdr_db"].is_number());

    // a checkpoint trained on 3-channel mixtures refuses 2-channel input
    simulate(cwd, "two", 3, 2, 1600);
    let out = m2bm(cwd, &["enhance", "m/model.bin", "two/mixture.wav", "--out", "e"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("channels"));
}

#[test]
fn identity_checkpoint_passes_reference_through() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    simulate(cwd, "s0", 4, 3, 2001);
    let mut cfg = train_config("supervised", 0, supervised_entries(1));
    cfg["train"]["model"]["init"] = json!("identity");
    cfg["ref_mic"] = json!(2);
    write_json(&cwd.join("id.json"), &cfg);
    ok(cwd, &["train", "id.json", "--out", "id"]);
    ok(cwd, &["enhance", "id/model.bin", "s0/mixture.wav", "--out", "enh"]);
    let y = read_wav(&cwd.join("s0/mixture.wav"));
    let e = read_wav(&cwd.join("enh/enhanced.wav"));
    assert_eq!((e.num_channels(), e.len()), (1, y.len()));
    let err = e.channels[0].iter().zip(&y.channels[2]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
    ok(cwd, &["enhance", "id/model.bin", "s0/mixture.wav", "--out", "enh0", "--ref-mic", "0"]);
    let e0 = read_wav(&cwd.join("enh0/enhanced.wav"));
    assert!(e0.channels[0].iter().zip(&y.channels[0]).all(|(a, b)| (a - b).abs() < 1e-6));
}

fn gradcheck_config(tolerance: f64) -> serde_json::Value {
    let mut s = scene(5, 3, 1200);
    s["stft"] = json!({"win_len": 32, "hop": 8, "fft_size": 32});
    json!({"scene": s, "taps": 2, "tolerance": tolerance})
}

#[test]
fn gradcheck_reports_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    write_json(&cwd.join("g.json"), &gradcheck_config(1e-4));
    ok(cwd, &["gradcheck", "g.json", "--out", "g"]);
    let r = read_json(&cwd.join("g/gradcheck.json"));
    assert_eq!(r["passed"], json!(true));
    let modes: Vec<&str> = r["results"].as_array().unwrap().iter().map(|a| a["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["supervised", "m2m", "m2bm"]);
    assert_eq!(r["sweep"].as_array().unwrap().len(), 5);

    write_json(&cwd.join("strict.json"), &gradcheck_config(1e-300));
    let out = m2bm(cwd, &["gradcheck", "strict.json", "--out", "strict"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(cwd.join("strict/gradcheck.json").is_file());
}
