//! Release gate for the `percept` binary: drive the real executables end to
//! end and check every shipped guarantee — artifact completeness, internal
//! consistency of `report.json`, byte-identical reruns, the exit-code
//! contract, and the plot outputs. Each test prints a single
//! `ACCEPTANCE <name>: PASS (...)` line when its guarantee holds.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn percept() -> Command {
    Command::new(env!("CARGO_BIN_EXE_percept"))
}

fn psynth() -> Command {
    Command::new(env!("CARGO_BIN_EXE_percept-synth"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn subprocess")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected exit 0, got {:?}\n--- stdout ---\n{}\n--- stderr ---\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_exit(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "--- stdout ---\n{}\n--- stderr ---\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Recompute every figure in `report.json` from its own embedded confusion
/// matrix and sample table; all must agree within 1e-9. Returns (samples,
/// accuracy).
fn check_report_consistency(path: &Path) -> (usize, f64) {
    const TOL: f64 = 1e-9;
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let cm: Vec<Vec<u64>> = serde_json::from_value(report["confusion"].clone()).unwrap();
    let k = cm.len();
    assert!(k >= 2, "confusion matrix has {k} classes");
    assert!(cm.iter().all(|row| row.len() == k), "confusion not square");

    let total: u64 = cm.iter().flatten().sum();
    let trace: u64 = (0..k).map(|i| cm[i][i]).sum();
    let accuracy = report["accuracy"].as_f64().unwrap();
    assert!((accuracy - trace as f64 / total as f64).abs() < TOL);

    let mut f1s = Vec::with_capacity(k);
    let mut supports = Vec::with_capacity(k);
    for i in 0..k {
        let row_sum: u64 = cm[i].iter().sum();
        let col_sum: u64 = (0..k).map(|r| cm[r][i]).sum();
        let tp = cm[i][i] as f64;
        let p = if col_sum == 0 { 0.0 } else { tp / col_sum as f64 };
        let r = if row_sum == 0 { 0.0 } else { tp / row_sum as f64 };
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let pc = &report["per_class"][i];
        assert!((pc["precision"].as_f64().unwrap() - p).abs() < TOL, "class {i} precision");
        assert!((pc["recall"].as_f64().unwrap() - r).abs() < TOL, "class {i} recall");
        assert!((pc["f1"].as_f64().unwrap() - f1).abs() < TOL, "class {i} f1");
        assert_eq!(pc["support"].as_u64().unwrap(), row_sum, "class {i} support");
        f1s.push(f1);
        supports.push(row_sum);
    }
    let macro_f1 = f1s.iter().sum::<f64>() / k as f64;
    assert!((report["macro_f1"].as_f64().unwrap() - macro_f1).abs() < TOL);
    let weighted: f64 = f1s
        .iter()
        .zip(&supports)
        .map(|(f, &s)| f * s as f64)
        .sum::<f64>()
        / total as f64;
    assert!((report["weighted_f1"].as_f64().unwrap() - weighted).abs() < TOL);

    // The sample table must reproduce the confusion matrix exactly.
    let samples = report["samples"].as_array().unwrap();
    assert_eq!(samples.len() as u64, total);
    let mut rebuilt = vec![vec![0u64; k]; k];
    for s in samples {
        let t = s["truth"].as_u64().unwrap() as usize;
        let p = s["predicted"].as_u64().unwrap() as usize;
        rebuilt[t][p] += 1;
        let c = s["confidence"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&c), "confidence {c} out of range");
    }
    assert_eq!(rebuilt, cm, "sample table disagrees with confusion matrix");

    (total as usize, accuracy)
}

#[test]
fn end_to_end_speaker_run_produces_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = run(psynth()
        .current_dir(root)
        .args(["speaker", "--out", "data", "--seed", "11"])
        .args(["--clips-per-class", "6", "--sample-rate", "8000", "--seconds", "0.5"]));
    assert_ok(&out);
    assert!(root.join("data/manifest.csv").is_file());

    fs::write(
        root.join("run.toml"),
        concat!(
            "task = \"speaker\"\n",
            "data = \"data/manifest.csv\"\n",
            "seed = 17\n",
            "out = \"out\"\n\n",
            "[split]\ntrain = 0.5\nval = 0.25\ntest = 0.25\n\n",
            "[train]\nepochs = 4\nbatch_size = 4\n\n",
            "[mfcc]\ncache = \"features.mfcc\"\n",
        ),
    )
    .unwrap();

    // featurize: cache + scaler + per-class counts.
    let out = run(percept()
        .current_dir(root)
        .args(["featurize", "--config", "run.toml"]));
    assert_ok(&out);
    assert!(root.join("features.mfcc").is_file(), "feature cache written");
    assert!(root.join("out/scaler.json").is_file());
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    for c in 0..5 {
        assert!(
            stdout.contains(&format!("speaker{c}: 6 clips")),
            "missing count line for class {c} in:\n{stdout}"
        );
    }
    let scaler: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out/scaler.json")).unwrap()).unwrap();
    assert_eq!(scaler["mean"].as_array().unwrap().len(), 13);
    assert_eq!(scaler["std"].as_array().unwrap().len(), 13);

    // train: model + history + full report set, reusing the cache.
    let out = run(percept()
        .current_dir(root)
        .args(["train", "--config", "run.toml"]));
    assert_ok(&out);
    for f in ["model.prcp", "history.csv", "report.json", "confusion.csv", "confusion.pgm"] {
        assert!(root.join("out").join(f).is_file(), "missing out/{f}");
    }
    let history = fs::read_to_string(root.join("out/history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,train_acc,val_loss,val_acc"));
    assert_eq!(lines.count(), 4, "one history row per epoch");
    let (train_samples, _) = check_report_consistency(&root.join("out/report.json"));
    assert_eq!(train_samples, 5, "test split holds one clip per class");

    // eval on the whole dataset with the saved model.
    let out = run(percept().current_dir(root).args([
        "eval",
        "--config",
        "run.toml",
        "--model",
        "out/model.prcp",
        "--out",
        "eval_out",
    ]));
    assert_ok(&out);
    for f in ["report.json", "confusion.csv", "confusion.pgm"] {
        assert!(root.join("eval_out").join(f).is_file(), "missing eval_out/{f}");
    }
    let (eval_samples, _) = check_report_consistency(&root.join("eval_out/report.json"));
    assert_eq!(eval_samples, 30, "eval consumes every clip");

    // plot one training clip.
    let out = run(percept().current_dir(root).args([
        "plot",
        "--wav",
        "data/speaker0/clip000.wav",
        "--out",
        "plots",
    ]));
    assert_ok(&out);
    for f in ["waveform.csv", "spectrogram.csv", "spectrogram.pgm", "mfcc.csv", "mfcc.pgm"] {
        assert!(root.join("plots").join(f).is_file(), "missing plots/{f}");
    }

    println!(
        "ACCEPTANCE cli-end-to-end: PASS (featurize/train/eval/plot all exit 0; reports self-consistent within 1e-9)"
    );
}

#[test]
fn train_reruns_and_model_reloads_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = run(psynth()
        .current_dir(root)
        .args(["eye", "--out", "eyedata", "--seed", "5", "--per-class", "10"]));
    assert_ok(&out);

    // A small dense head keeps the run quick; augmentation is on so the
    // whole stochastic path is under test.
    fs::write(
        root.join("run.toml"),
        concat!(
            "task = \"eye\"\n",
            "data = \"eyedata/manifest.csv\"\n",
            "seed = 23\n",
            "eval_split = \"test\"\n\n",
            "[split]\ntrain = 0.5\nval = 0.25\ntest = 0.25\n\n",
            "[train]\nepochs = 2\nbatch_size = 8\naugment = true\n\n",
            "[[layer]]\nkind = \"flatten\"\n\n",
            "[[layer]]\nkind = \"dense\"\nunits = 2\n\n",
            "[[layer]]\nkind = \"softmax\"\n",
        ),
    )
    .unwrap();

    for out_dir in ["out1", "out2"] {
        let out = run(percept()
            .current_dir(root)
            .args(["train", "--config", "run.toml", "--out", out_dir]));
        assert_ok(&out);
    }
    for f in ["model.prcp", "report.json", "history.csv"] {
        assert_eq!(
            read_bytes(&root.join("out1").join(f)),
            read_bytes(&root.join("out2").join(f)),
            "{f} differs between identical reruns"
        );
    }

    // Evaluating the saved model on the re-derived test split must rebuild
    // the training report byte for byte: the model file round-trips every
    // parameter exactly and the split derivation is seeded.
    let out = run(percept().current_dir(root).args([
        "eval",
        "--config",
        "run.toml",
        "--model",
        "out1/model.prcp",
        "--out",
        "out3",
    ]));
    assert_ok(&out);
    assert_eq!(
        read_bytes(&root.join("out1/report.json")),
        read_bytes(&root.join("out3/report.json")),
        "eval of the saved model differs from the training report"
    );

    println!(
        "ACCEPTANCE cli-determinism: PASS (rerun artifacts and reloaded-model eval byte-identical)"
    );
}

#[test]
fn exit_codes_partition_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Exit 2: configuration problems.
    fs::write(
        root.join("unknown.toml"),
        "task = \"eye\"\ndata = \"m.csv\"\nseed = 1\nepochz = 3\n",
    )
    .unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["train", "--config", "unknown.toml"]));
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("epochz"), "diagnostic names the bad key");

    fs::write(root.join("noseed.toml"), "task = \"eye\"\ndata = \"m.csv\"\n").unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["train", "--config", "noseed.toml"]));
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("seed"));

    fs::write(
        root.join("badsplit.toml"),
        "task = \"eye\"\ndata = \"m.csv\"\nseed = 1\n[split]\ntrain = 0.5\nval = 0.2\ntest = 0.2\n",
    )
    .unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["train", "--config", "badsplit.toml"]));
    assert_exit(&out, 2);

    let out = run(percept()
        .current_dir(root)
        .args(["train", "--config", "absent.toml"]));
    assert_exit(&out, 2);

    // Exit 3: data problems. A manifest whose only entry is missing must
    // name the file.
    fs::write(
        root.join("nodata.toml"),
        "task = \"eye\"\ndata = \"ghost/manifest.csv\"\nseed = 1\n",
    )
    .unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["train", "--config", "nodata.toml"]));
    assert_exit(&out, 3);

    fs::write(root.join("manifest.csv"), "path,label\nghost.wav,0\n").unwrap();
    fs::write(
        root.join("ghostclip.toml"),
        "task = \"speaker\"\ndata = \"manifest.csv\"\nseed = 1\n",
    )
    .unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["featurize", "--config", "ghostclip.toml"]));
    assert_exit(&out, 3);
    assert!(
        stderr_of(&out).contains("ghost.wav"),
        "diagnostic names the missing clip: {}",
        stderr_of(&out)
    );

    // Exit 4: numerical failure. An absurd learning rate overflows the
    // dense head to infinity and the next softmax produces NaN; artifacts
    // are still flushed before exiting.
    let out = run(psynth()
        .current_dir(root)
        .args(["eye", "--out", "eyedata", "--seed", "5", "--per-class", "10"]));
    assert_ok(&out);
    fs::write(
        root.join("nan.toml"),
        concat!(
            "task = \"eye\"\n",
            "data = \"eyedata/manifest.csv\"\n",
            "seed = 23\n\n",
            "[split]\ntrain = 0.5\nval = 0.25\ntest = 0.25\n\n",
            "[train]\nepochs = 3\nbatch_size = 8\nlearning_rate = 3e38\n\n",
            "[[layer]]\nkind = \"flatten\"\n\n",
            "[[layer]]\nkind = \"dense\"\nunits = 2\n\n",
            "[[layer]]\nkind = \"softmax\"\n",
        ),
    )
    .unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["train", "--config", "nan.toml", "--out", "nan_out"]));
    assert_exit(&out, 4);
    assert!(stderr_of(&out).contains("NaN"), "{}", stderr_of(&out));
    for f in ["model.prcp", "history.csv", "report.json", "confusion.csv", "confusion.pgm"] {
        assert!(
            root.join("nan_out").join(f).is_file(),
            "NaN run must still flush nan_out/{f}"
        );
    }

    // Exit 3 again: evaluating a model against a config for another task.
    fs::write(
        root.join("mismatch.toml"),
        "task = \"speaker\"\ndata = \"manifest.csv\"\nseed = 1\n",
    )
    .unwrap();
    let out = run(percept().current_dir(root).args([
        "eval",
        "--config",
        "mismatch.toml",
        "--model",
        "nan_out/model.prcp",
    ]));
    assert_exit(&out, 3);
    let err = stderr_of(&out);
    assert!(err.contains("eye") && err.contains("speaker"), "{err}");

    println!(
        "ACCEPTANCE cli-exit-codes: PASS (config errors 2, data errors 3 with file named, NaN 4 with artifacts flushed)"
    );
}

#[test]
fn plot_renders_expected_grids_and_rejects_float_wav() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let rate = 16_000u32;

    // One second at 16 kHz with the default front end: exactly 98 MFCC
    // frames of 13 coefficients.
    let tone: Vec<f32> = (0..rate)
        .map(|i| 0.5 * (2.0 * std::f32::consts::PI * 220.0 * i as f32 / rate as f32).sin())
        .collect();
    percept_core::audio::write_wav_pcm16(&root.join("tone.wav"), &tone, rate).unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["plot", "--wav", "tone.wav", "--out", "p1"]));
    assert_ok(&out);
    let mfcc_csv = fs::read_to_string(root.join("p1/mfcc.csv")).unwrap();
    let rows: Vec<&str> = mfcc_csv.lines().collect();
    assert_eq!(rows.len(), 98, "MFCC frame count");
    for row in &rows {
        assert_eq!(row.split(',').count(), 13, "coefficients per frame");
    }

    // Rendering is idempotent byte for byte.
    let out = run(percept()
        .current_dir(root)
        .args(["plot", "--wav", "tone.wav", "--out", "p2"]));
    assert_ok(&out);
    for f in ["waveform.csv", "spectrogram.csv", "spectrogram.pgm", "mfcc.csv", "mfcc.pgm"] {
        assert_eq!(
            read_bytes(&root.join("p1").join(f)),
            read_bytes(&root.join("p2").join(f)),
            "{f} differs between identical plot runs"
        );
    }

    // Silence has no dynamic range: the spectrogram renders one mid-gray.
    percept_core::audio::write_wav_pcm16(&root.join("silent.wav"), &vec![0.0; rate as usize], rate)
        .unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["plot", "--wav", "silent.wav", "--out", "p3"]));
    assert_ok(&out);
    let img = percept_core::imaging::read_pgm(&root.join("p3/spectrogram.pgm")).unwrap();
    let mid = 128.0 / 255.0;
    assert!(
        img.pixels().iter().all(|&p| (p - mid).abs() < 1e-6),
        "silent spectrogram is a single gray level"
    );

    // IEEE-float WAV (format code 3) is unsupported and must say so.
    let mut wav: Vec<u8> = Vec::new();
    wav.extend_from_slice(b"RIFF");
    wav.extend_from_slice(&40u32.to_le_bytes());
    wav.extend_from_slice(b"WAVE");
    wav.extend_from_slice(b"fmt ");
    wav.extend_from_slice(&16u32.to_le_bytes());
    wav.extend_from_slice(&3u16.to_le_bytes()); // IEEE float, not PCM
    wav.extend_from_slice(&1u16.to_le_bytes());
    wav.extend_from_slice(&rate.to_le_bytes());
    wav.extend_from_slice(&(rate * 4).to_le_bytes());
    wav.extend_from_slice(&4u16.to_le_bytes());
    wav.extend_from_slice(&32u16.to_le_bytes());
    wav.extend_from_slice(b"data");
    wav.extend_from_slice(&4u32.to_le_bytes());
    wav.extend_from_slice(&0f32.to_le_bytes());
    fs::write(root.join("float.wav"), wav).unwrap();
    let out = run(percept()
        .current_dir(root)
        .args(["plot", "--wav", "float.wav", "--out", "p4"]));
    assert_exit(&out, 3);
    assert!(
        stderr_of(&out).contains("format code 3"),
        "diagnostic names the format: {}",
        stderr_of(&out)
    );

    println!(
        "ACCEPTANCE cli-plot: PASS (98x13 MFCC grid, idempotent bytes, flat-silence render, float-PCM rejected)"
    );
}
