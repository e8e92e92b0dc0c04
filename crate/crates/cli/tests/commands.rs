//! Behaviour of the `insole` binary: outputs, determinism and exit codes.

use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use insole_core::dataset::read_dataset;
use insole_core::domain::{PhaseSchedule, CHANNELS};
use insole_core::ingest::write_session;
use insole_core::synth::{generate_session, SynthSpec};
use serde_json::Value;

fn insole(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insole"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quiet_spec(noise: f64) -> SynthSpec {
    SynthSpec {
        subject_id: "Q".into(),
        session_index: 1,
        offset: vec![4000.0; CHANNELS],
        response_per_kg: (0..CHANNELS).map(|c| 40.0 + 2.0 * c as f64).collect(),
        saturation_kg: None,
        noise_sigma: noise,
        drift_per_s: 0.0,
        timestamp_jitter_ms: 0,
        seed: 3,
    }
}

/// Two-subject corpus, its dataset and the manifest paths.
fn corpus(dir: &Path) -> (Vec<PathBuf>, PathBuf) {
    let out = insole(&["synth", "--out", s(&dir.join("corpus")), "--subjects", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifests: Vec<PathBuf> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(PathBuf::from)
        .collect();
    let mut args = vec!["preprocess", "--out", s(dir)];
    args.push("--manifest");
    args.extend(manifests.iter().map(|p| s(p)));
    let out = insole(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (manifests, dir.join("dataset.csv"))
}

#[test]
fn every_command_has_help() {
    for cmd in [
        "preprocess",
        "train",
        "evaluate",
        "render-maps",
        "stream",
        "synth",
    ] {
        let out = insole(&[cmd, "--help"]);
        assert_eq!(code(&out), 0, "{cmd}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn preprocess_writes_one_row_per_lift_window_frame() {
    let dir = tempfile::tempdir().unwrap();
    let (manifests, dataset) = corpus(dir.path());
    assert_eq!(manifests.len(), 6);
    let samples = read_dataset(&dataset).unwrap();
    assert_eq!(samples.len(), 6 * 17 * 200);
}

#[test]
fn missing_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = insole(&[
        "preprocess",
        "--manifest",
        "/no/such/session.json",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/no/such/session.json"));
}

#[test]
fn skip_filter_passes_prefiltered_values_through() {
    let dir = tempfile::tempdir().unwrap();
    let spec = quiet_spec(0.0);
    let (rec, truth) = generate_session(&spec, &PhaseSchedule::default(), &[2.0, 2.5]).unwrap();
    let manifest = write_session(&rec, dir.path(), "q").unwrap();
    let out = insole(&[
        "preprocess",
        "--manifest",
        s(&manifest),
        "--out",
        s(dir.path()),
        "--skip-filter",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let samples = read_dataset(&dir.path().join("dataset.csv")).unwrap();
    assert_eq!(samples.len(), 400);
    for (k, chunk) in samples.chunks(200).enumerate() {
        for sample in chunk {
            assert_eq!(sample.features, truth.lift_increment[k]);
        }
    }
}

#[test]
fn train_enet_reports_validation_mae() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = corpus(dir.path());
    let model = dir.path().join("enet.json");
    let out = insole(&[
        "train",
        "--dataset",
        s(&dataset),
        "--model",
        "enet",
        "--out",
        s(&model),
        "--cv",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["report"]["converged"], true);
    let val_mae = summary["val_mae"].as_f64().unwrap();
    assert!(val_mae < 0.5, "validation MAE {val_mae}");
    assert_eq!(summary["cv_mae"].as_array().unwrap().len(), 3);
    assert!(insole_core::regress::load_model(&model).is_ok());
}

#[test]
fn bad_model_name_and_bad_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("d.csv");
    std::fs::write(&dataset, insole_core::dataset::header() + "\n").unwrap();
    let model = dir.path().join("m.json");

    let out = insole(&[
        "train",
        "--dataset",
        s(&dataset),
        "--model",
        "forest",
        "--out",
        s(&model),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("possible values"), "{}", stderr(&out));

    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "cutoff_hz = 10.0\n").unwrap();
    let out = insole(&[
        "train",
        "--dataset",
        s(&dataset),
        "--model",
        "enet",
        "--out",
        s(&model),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cutoff"));

    std::fs::write(&cfg, "cutoff = 0.3\n").unwrap();
    let out = insole(&[
        "train",
        "--dataset",
        s(&dataset),
        "--model",
        "enet",
        "--out",
        s(&model),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown key"));
}

#[test]
fn svr_that_cannot_converge_exits_3_with_kkt_residual() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = corpus(dir.path());
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[svr]\nmax_iter = 3\nepsilon = 0.01\n").unwrap();
    let model = dir.path().join("svr.json");
    let out = insole(&[
        "train",
        "--dataset",
        s(&dataset),
        "--model",
        "svr",
        "--out",
        s(&model),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("KKT residual"), "{}", stderr(&out));
    assert!(!model.exists());
}

#[test]
fn evaluate_is_deterministic_and_compares_every_model_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = corpus(dir.path());
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[mlp]\nmax_epochs = 3\n").unwrap();
    let report = |name: &str| {
        let path = dir.path().join(name);
        let plots = dir.path().join("plots");
        let out = insole(&[
            "evaluate",
            "--dataset",
            s(&dataset),
            "--models",
            "svr",
            "mlp",
            "enet",
            "--report",
            s(&path),
            "--plots",
            s(&plots),
            "--config",
            s(&cfg),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read_to_string(path).unwrap()
    };
    let first = report("a.json");
    assert_eq!(first, report("b.json"));
    assert!(dir.path().join("plots/mae_by_subject.svg").exists());
    assert!(dir.path().join("plots/mae_unseen_loads.svg").exists());

    let r: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(r["unseen_loads_kg"], serde_json::json!([3.0, 6.0, 9.0]));
    let mut per_group = std::collections::BTreeMap::new();
    for t in r["pairwise"].as_array().unwrap() {
        let key = format!("{}/{}", t["grouping"], t["group"]);
        *per_group.entry(key).or_insert(0) += 1;
    }
    // 2 subjects + 3 unseen loads, each with C(3, 2) comparisons
    assert_eq!(per_group.len(), 5);
    assert!(per_group.values().all(|&n| n == 3), "{per_group:?}");
}

#[test]
fn render_maps_reuses_a_saved_scale() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = corpus(dir.path());
    let a = dir.path().join("a");
    let out = insole(&[
        "render-maps",
        "--dataset",
        s(&dataset),
        "--out",
        s(&a),
        "--limit",
        "5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut pngs: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".png"))
        .collect();
    pngs.sort();
    assert_eq!(pngs.len(), 5);
    assert_eq!(pngs[0], "S1_1_17500.png");

    let b = dir.path().join("b");
    let scale = a.join("scale.json");
    let out = insole(&[
        "render-maps",
        "--dataset",
        s(&dataset),
        "--scale-from",
        s(&scale),
        "--maps-out",
        s(&b),
        "--limit",
        "5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in &pngs {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap()
        );
    }
}

#[test]
fn flat_training_data_is_a_degenerate_scale() {
    let dir = tempfile::tempdir().unwrap();
    let spec = quiet_spec(0.0);
    let mut manifests = Vec::new();
    for session in 1..=3 {
        let mut sp = spec.clone();
        sp.session_index = session;
        sp.response_per_kg = vec![0.0; CHANNELS];
        let (rec, _) = generate_session(&sp, &PhaseSchedule::default(), &[2.0]).unwrap();
        manifests.push(write_session(&rec, dir.path(), &format!("q{session}")).unwrap());
    }
    let mut args = vec![
        "preprocess",
        "--skip-filter",
        "--out",
        s(dir.path()),
        "--manifest",
    ];
    args.extend(manifests.iter().map(|p| s(p)));
    assert_eq!(code(&insole(&args)), 0);
    let out = insole(&[
        "render-maps",
        "--dataset",
        s(&dir.path().join("dataset.csv")),
        "--out",
        s(&dir.path().join("maps")),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

/// One-load session and an elastic net trained on a second session.
fn stream_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let (rec, _) = generate_session(&quiet_spec(500.0), &PhaseSchedule::default(), &[2.0]).unwrap();
    let manifest = write_session(&rec, dir, "live").unwrap();
    let mut samples = Vec::new();
    for (k, load) in [2.0, 5.0, 9.0].into_iter().enumerate() {
        let mut sp = quiet_spec(500.0);
        sp.seed = 10 + k as u64;
        let (r, _) = generate_session(&sp, &PhaseSchedule::default(), &[load]).unwrap();
        samples.extend(
            insole_core::ingest::preprocess_session(&r, &Default::default(), false).unwrap(),
        );
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    let (x, y) = insole_core::dataset::design_matrix(&samples, &idx);
    let trained = insole_core::regress::fit_model(
        insole_core::regress::ModelKind::Enet,
        x.view(),
        &y,
        None,
        &Default::default(),
    )
    .unwrap();
    let model = dir.join("model.json");
    insole_core::regress::save_model(&trained, &model).unwrap();
    (manifest, model)
}

#[test]
fn paced_and_unpaced_streams_emit_the_same_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, model) = stream_fixture(dir.path());
    let run = |rate: &str| {
        let out = insole(&[
            "stream",
            "--manifest",
            s(&manifest),
            "--model",
            s(&model),
            "--rate",
            rate,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        String::from_utf8(out.stdout).unwrap()
    };
    let fast = run("max");
    assert_eq!(fast, run("x10"));
    let lines: Vec<Value> = fast
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 90);
    for key in ["t_ms", "load_kg", "window_stats"] {
        assert!(lines[0].get(key).is_some(), "{key}");
    }
    assert!(lines[0]["window_stats"]["min"].as_f64() <= lines[0]["window_stats"]["max"].as_f64());
}

#[test]
fn stream_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, model) = stream_fixture(dir.path());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let reader = std::thread::spawn(move || {
        let (conn, _) = listener.accept().unwrap();
        BufReader::new(conn).lines().count()
    });
    let out = insole(&[
        "stream",
        "--manifest",
        s(&manifest),
        "--model",
        s(&model),
        "--rate",
        "max",
        "--tcp",
        &addr,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    assert_eq!(reader.join().unwrap(), 90);
}

#[test]
fn tcp_peer_disconnect_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, model) = stream_fixture(dir.path());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let closer = std::thread::spawn(move || drop(listener.accept().unwrap()));
    let out = insole(&[
        "stream",
        "--manifest",
        s(&manifest),
        "--model",
        s(&model),
        "--rate",
        "x10",
        "--tcp",
        &addr,
    ]);
    closer.join().unwrap();
    assert_eq!(code(&out), 4, "{}", stderr(&out));

    let out = insole(&[
        "stream",
        "--manifest",
        s(&manifest),
        "--model",
        s(&model),
        "--tcp",
        "127.0.0.1:1",
    ]);
    assert_eq!(code(&out), 4);
}
