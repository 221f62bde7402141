mod common;

use common::{make_corpus, make_recording, p, run, run_ok};
use egogate::audio::{load_wav, preprocess};
use egogate::pipeline::clip_examples;
use egogate::train::evaluate_loss;
use egogate::{ClassifierHead, Label, WindowSpec};
use serde_json::Value;
use std::fs;
use std::path::Path;

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn train_log_reproduces_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let labels = make_corpus(dir.path(), 6, 10, 6.0, 1);
    let model = dir.path().join("m.egogate");
    run_ok(&["train", "--labels", p(&labels), "--audio-dir", p(dir.path()), "--epochs", "8", "--out", p(&model)]);
    let log = read_json(&dir.path().join("m.egogate.log.json"));
    assert_eq!(log["epoch_losses"].as_array().unwrap().len(), 8);
    assert_eq!(log["counts_before"], serde_json::json!([20, 12]));
    assert_eq!(log["config"]["seed"], 1337);

    let head = ClassifierHead::read_from(fs::read(&model).unwrap().as_slice()).unwrap();
    let text = fs::read_to_string(&labels).unwrap();
    let mut examples = Vec::new();
    for line in text.lines() {
        let row: Value = serde_json::from_str(line).unwrap();
        let clip = preprocess(load_wav(dir.path().join(row["clip_file"].as_str().unwrap())).unwrap()).unwrap();
        let label = if row["is_hand_object_interaction"] == 1 { Label::Interaction } else { Label::NoInteraction };
        examples.extend(clip_examples(&clip, label, WindowSpec::default()).unwrap());
    }
    let w = &log["class_weights"];
    let weights = [w[0].as_f64().unwrap(), w[1].as_f64().unwrap()];
    let loss = evaluate_loss(&head, &examples, weights).unwrap();
    assert!((loss - log["final_loss"].as_f64().unwrap()).abs() <= 1e-9);
}

#[test]
fn resampling_strategies_balance_counts() {
    let dir = tempfile::tempdir().unwrap();
    let labels = make_corpus(dir.path(), 4, 12, 6.0, 2);
    for strategy in ["smote", "undersample"] {
        let model = dir.path().join(format!("{strategy}.bin"));
        run_ok(&[
            "train", "--labels", p(&labels), "--audio-dir", p(dir.path()),
            "--strategy", strategy, "--epochs", "2", "--out", p(&model),
        ]);
        let log = read_json(&dir.path().join(format!("{strategy}.bin.log.json")));
        let after = &log["counts_after"];
        assert_eq!(after[0], after[1], "{strategy}: {after}");
        assert_eq!(log["class_weights"], serde_json::json!([1.0, 1.0]));
    }
}

#[test]
fn missing_clip_is_named_and_nothing_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let labels = make_corpus(dir.path(), 2, 2, 6.0, 3);
    fs::remove_file(dir.path().join("bg_001.wav")).unwrap();
    let out_dir = dir.path().join("out");
    fs::create_dir(&out_dir).unwrap();
    let out = run(&["train", "--labels", p(&labels), "--audio-dir", p(dir.path()), "--out", p(&out_dir.join("m.bin"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bg_001.wav"));
    assert!(files_in(&out_dir).is_empty());
}

#[test]
fn single_class_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    let labels = make_corpus(dir.path(), 3, 0, 6.0, 4);
    let out = run(&["train", "--labels", p(&labels), "--audio-dir", p(dir.path()), "--out", p(&dir.path().join("m.bin"))]);
    assert!(!out.status.success());
    assert!(!dir.path().join("m.bin").exists());
}

#[test]
fn trigger_from_trace_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    fs::write(&trace, "start_sec,p_c1\n0,0.85\n2,0.75\n4,0.65\n").unwrap();
    let out = dir.path().join("iv.json");
    let stdout = run_ok(&["trigger", "--trace", p(&trace), "--trigger", "hysteresis", "--tau-on", "0.8", "--tau-off", "0.7", "--out", p(&out)]);
    assert_eq!(read_json(&out), serde_json::json!([{"start_sec": 0.0, "stop_sec": 4.0}]));
    assert!(stdout.contains("4.00 s active"), "{stdout}");

    fs::write(&trace, "start_sec,p_c1\n0,0.9\n2,0.1\n4,0.1\n").unwrap();
    run_ok(&["trigger", "--trace", p(&trace), "--out", p(&out)]);
    assert_eq!(read_json(&out), serde_json::json!([{"start_sec": 0.0, "stop_sec": 1.0}]));

    fs::write(&trace, "start_sec,p_c1\n0,0.1\n2,0.3\n4,0.39\n").unwrap();
    run_ok(&["trigger", "--trace", p(&trace), "--tau", "0.4", "--out", p(&out)]);
    assert_eq!(read_json(&out), serde_json::json!([]));
}

#[test]
fn trigger_rejects_conflicting_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("iv.json");
    let both = run(&["trigger", "--model", "m", "--audio", "a.wav", "--trace", "t.csv", "--out", p(&out)]);
    assert_eq!(both.status.code(), Some(2));
    let neither = run(&["trigger", "--out", p(&out)]);
    assert_eq!(neither.status.code(), Some(2));
    let half = run(&["trigger", "--model", "m", "--out", p(&out)]);
    assert_eq!(half.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn gate_reproduces_table_row_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let iv = dir.path().join("iv.json");
    let out = dir.path().join("r.json");
    // 45.61% of a 100 s, 100 fps timeline captured: 54.39% reduction.
    fs::write(&iv, r#"[{"start_sec": 0.0, "stop_sec": 45.61}]"#).unwrap();
    run_ok(&["gate", "--intervals", p(&iv), "--fps", "100", "--duration", "100", "--full-bitrate", "5.47", "--out", p(&out)]);
    let r = read_json(&out);
    assert_eq!(r["frames_total"], 10000);
    assert_eq!(r["frames_captured"], 4561);
    assert!((r["frames_reduced_pct"].as_f64().unwrap() - 54.39).abs() < 1e-9);
    assert!((r["est_bitrate_mbps"].as_f64().unwrap() - 2.50).abs() <= 0.02);

    fs::write(&iv, r#"[{"start_sec": 0.0, "stop_sec": 10.0}]"#).unwrap();
    run_ok(&["gate", "--intervals", p(&iv), "--duration", "10", "--full-bitrate", "1.31", "--out", p(&out)]);
    assert_eq!(read_json(&out)["frames_reduced_pct"], 0.0);

    let bad = run(&["gate", "--intervals", p(&iv), "--duration", "0", "--full-bitrate", "1", "--out", p(&dir.path().join("x.json"))]);
    assert!(!bad.status.success());
    fs::write(&iv, "{not json").unwrap();
    let bad = run(&["gate", "--intervals", p(&iv), "--duration", "10", "--full-bitrate", "1", "--out", p(&dir.path().join("x.json"))]);
    assert!(!bad.status.success());
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn gate_writes_plan_and_blackout() {
    let dir = tempfile::tempdir().unwrap();
    let iv = dir.path().join("iv.json");
    fs::write(&iv, r#"[{"start_sec": 1.0, "stop_sec": 2.5}]"#).unwrap();
    let (out, plan, blk) = (dir.path().join("r.json"), dir.path().join("plan.json"), dir.path().join("blk.txt"));
    run_ok(&[
        "gate", "--intervals", p(&iv), "--fps", "10", "--duration", "4", "--full-bitrate", "2",
        "--out", p(&out), "--plan", p(&plan), "--blackout", p(&blk),
    ]);
    assert_eq!(read_json(&plan)["captured_intervals"], serde_json::json!([[1.0, 2.5]]));
    assert_eq!(read_json(&out)["frames_captured"], 15);
    let expr = fs::read_to_string(&blk).unwrap();
    assert!(expr.contains("between(t,0.000000,1.000000)"), "{expr}");
    assert!(expr.contains("between(t,2.500000,4.000000)"), "{expr}");

    run_ok(&["gate", "--decimate", "5", "--fps", "30", "--duration", "60", "--full-bitrate", "2", "--out", p(&out)]);
    assert_eq!(read_json(&out)["frames_captured"], 12);
}

#[test]
fn power_table_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    fs::write(
        &cfg,
        r#"[{"name": "system", "active_power_w": 4.20, "duty": 1.0},
            {"name": "microphone", "active_power_w": 0.17, "duty": 1.0},
            {"name": "camera", "active_power_w": 0.60, "duty": 1.0}]"#,
    )
    .unwrap();
    let out = dir.path().join("o.json");
    let stdout = run_ok(&["power", "--config", p(&cfg), "--out", p(&out)]);
    assert!(stdout.contains("total 4.97 W"), "{stdout}");
    assert_eq!(read_json(&out)["total_w"], 4.97);

    fs::write(&cfg, r#"[{"name": "camera", "active_power_w": 0.6, "duty": 1.5}]"#).unwrap();
    assert!(!run(&["power", "--config", p(&cfg), "--out", p(&dir.path().join("bad.json"))]).status.success());
}

#[test]
fn report_pools_by_frame_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let iv = dir.path().join("iv.json");
    fs::write(&iv, r#"[{"start_sec": 0.0, "stop_sec": 5.0}]"#).unwrap();
    // 10 s video with 50% captured and 30 s video with 5/30 captured.
    run_ok(&["gate", "--intervals", p(&iv), "--fps", "10", "--duration", "10", "--full-bitrate", "2", "--out", p(&a)]);
    run_ok(&["gate", "--intervals", p(&iv), "--fps", "10", "--duration", "30", "--full-bitrate", "2", "--out", p(&b)]);
    let out = dir.path().join("pooled.json");
    run_ok(&["report", p(&a), p(&b), "--out", p(&out)]);
    let r = read_json(&out);
    assert_eq!(r["frames_total"], 400);
    assert_eq!(r["frames_captured"], 100);
    // hand aggregate: (50 * 100 + (250/3) * 300) / 400 = 75
    assert!((r["frames_reduced_pct"].as_f64().unwrap() - 75.0).abs() < 1e-9);
    assert!((r["est_bitrate_mbps"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn sweep_and_evaluate_on_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let labels = make_corpus(dir.path(), 8, 8, 6.0, 5);
    let model = dir.path().join("m.bin");
    run_ok(&["train", "--labels", p(&labels), "--audio-dir", p(dir.path()), "--epochs", "20", "--out", p(&model)]);
    let sweep = dir.path().join("sweep.csv");
    run_ok(&["sweep", "--model", p(&model), "--labels", p(&labels), "--audio-dir", p(dir.path()), "--out", p(&sweep)]);
    let text = fs::read_to_string(&sweep).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau,precision,recall,f1,fpr");
    assert_eq!(lines.len(), 10);
    let recalls: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(recalls.windows(2).all(|w| w[1] <= w[0]));

    let report = dir.path().join("eval.json");
    run_ok(&[
        "evaluate", "--model", p(&model), "--labels", p(&labels), "--audio-dir", p(dir.path()),
        "--name", "class_weights", "--out", p(&report),
    ]);
    let r = read_json(&report);
    assert_eq!(r["strategy"], "class_weights");
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1]["support"], 16);
    assert!(rows[1]["f1"].as_f64().unwrap() >= 0.9, "{r}");
}

#[test]
fn model_and_audio_trigger_path() {
    let dir = tempfile::tempdir().unwrap();
    let labels = make_corpus(dir.path(), 8, 8, 6.0, 6);
    let model = dir.path().join("m.bin");
    run_ok(&["train", "--labels", p(&labels), "--audio-dir", p(dir.path()), "--epochs", "20", "--out", p(&model)]);
    let rec = dir.path().join("rec.wav");
    make_recording(&rec, &[(false, 12.0), (true, 12.0), (false, 12.0)], 7);
    let trace = dir.path().join("trace.csv");
    run_ok(&["classify", "--model", p(&model), "--audio", p(&rec), "--out", p(&trace)]);
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 1 + 17);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    run_ok(&["trigger", "--model", p(&model), "--audio", p(&rec), "--trigger", "hysteresis", "--out", p(&a)]);
    run_ok(&["trigger", "--trace", p(&trace), "--trigger", "hysteresis", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ivs = read_json(&a);
    let ivs = ivs.as_array().unwrap();
    assert!(!ivs.is_empty());
    assert!(ivs.iter().all(|iv| iv["start_sec"].as_f64().unwrap() >= 8.0 && iv["stop_sec"].as_f64().unwrap() <= 28.0), "{ivs:?}");

    let short = dir.path().join("short.wav");
    common::write_clip(&short, vec![0.1; 16000]);
    let out = run(&["trigger", "--model", p(&model), "--audio", p(&short), "--out", p(&dir.path().join("s.json"))]);
    assert!(!out.status.success());
}
