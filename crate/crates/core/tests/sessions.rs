//! Session files on disk: parsing, validation diagnostics and
//! preprocessing counts.

use std::fs;

use insole_core::domain::{PhaseSchedule, PipelineConfig, Violation, CHANNELS};
use insole_core::ingest::{preprocess_session, read_session, write_session, IngestError};
use insole_core::stream::stream_session;
use insole_core::synth::{generate_session, SynthSpec};

fn spec(noise: f64) -> SynthSpec {
    SynthSpec {
        subject_id: "P7".into(),
        session_index: 2,
        offset: (0..CHANNELS).map(|c| 3000.0 + 40.0 * c as f64).collect(),
        response_per_kg: (0..CHANNELS).map(|c| 30.0 + c as f64).collect(),
        saturation_kg: None,
        noise_sigma: noise,
        drift_per_s: 0.0,
        timestamp_jitter_ms: 0,
        seed: 5,
    }
}

const LOADS: [f64; 3] = [2.0, 2.5, 3.0];

#[test]
fn three_cycle_session_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (rec, _) = generate_session(&spec(700.0), &PhaseSchedule::default(), &LOADS).unwrap();
    let manifest = write_session(&rec, dir.path(), "p7").unwrap();
    let (m, back) = read_session(&manifest).unwrap();
    assert_eq!(back.frames.len(), 2700);
    assert_eq!(back, rec);
    assert_eq!(m.loads_kg, LOADS);
    assert!(!m.prefiltered);
}

#[test]
fn lift_windows_give_200_samples_per_cycle() {
    let (rec, _) = generate_session(&spec(700.0), &PhaseSchedule::default(), &LOADS).unwrap();
    let samples = preprocess_session(&rec, &PipelineConfig::default(), false).unwrap();
    assert_eq!(samples.len(), 600);
    for (k, chunk) in samples.chunks(200).enumerate() {
        assert!(chunk.iter().all(|s| s.label_kg == Some(LOADS[k])));
    }
    // lift window starts 2.5 s into the lift phase of each 45 s cycle
    assert_eq!(samples[0].frame_timestamp_ms, 15_000 + 2_500);
    assert_eq!(samples[200].frame_timestamp_ms, 45_000 + 17_500);
}

#[test]
fn unfiltered_features_are_the_exact_increment() {
    let s = spec(0.0);
    let (rec, truth) = generate_session(&s, &PhaseSchedule::default(), &LOADS).unwrap();
    let samples = preprocess_session(&rec, &PipelineConfig::default(), true).unwrap();
    for (k, chunk) in samples.chunks(200).enumerate() {
        for sample in chunk {
            for c in 0..CHANNELS {
                assert!((sample.features[c] - truth.lift_increment[k][c]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn empty_frame_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let (rec, _) = generate_session(&spec(0.0), &PhaseSchedule::default(), &[2.0]).unwrap();
    let manifest = write_session(&rec, dir.path(), "s").unwrap();
    fs::write(dir.path().join("s.csv"), "").unwrap();
    match read_session(&manifest) {
        Err(IngestError::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn negative_reading_reports_its_csv_line() {
    let dir = tempfile::tempdir().unwrap();
    let (rec, _) = generate_session(&spec(0.0), &PhaseSchedule::default(), &[2.0]).unwrap();
    let manifest = write_session(&rec, dir.path(), "s").unwrap();
    let csv = dir.path().join("s.csv");
    let mut lines: Vec<String> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    // frame 40 sits on line 42 (header is line 1)
    let mut cells: Vec<String> = lines[41].split(',').map(String::from).collect();
    cells[5] = "-12".into();
    lines[41] = cells.join(",");
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    match read_session(&manifest) {
        Err(IngestError::Validation {
            line, violation, ..
        }) => {
            assert_eq!(line, 42);
            assert_eq!(
                violation,
                Violation::Negative {
                    frame: 40,
                    channel: 4
                }
            );
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn non_numeric_cell_reports_its_csv_line() {
    let dir = tempfile::tempdir().unwrap();
    let (rec, _) = generate_session(&spec(0.0), &PhaseSchedule::default(), &[2.0]).unwrap();
    let manifest = write_session(&rec, dir.path(), "s").unwrap();
    let csv = dir.path().join("s.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let broken = lines[9].replacen(',', ",abc,", 1);
    let broken = broken.rsplit_once(',').unwrap().0.to_string();
    lines[9] = &broken;
    fs::write(&csv, lines.join("\n")).unwrap();
    let err = read_session(&manifest).unwrap_err();
    assert!(err.to_string().contains(":10:"), "{err}");
}

#[test]
fn stream_never_emits_partial_windows() {
    let (rec, _) = generate_session(&spec(300.0), &PhaseSchedule::default(), &[4.0]).unwrap();
    let mut short = rec.clone();
    short.frames.truncate(895);
    let model = insole_core::regress::Model::ElasticNet(insole_core::regress::ElasticNetModel {
        weights: vec![0.01; CHANNELS],
        intercept: 0.5,
        alpha: 0.1,
        l1_ratio: 0.1,
    });
    let cfg = PipelineConfig::default();
    assert_eq!(stream_session(&rec, &model, &cfg, false).unwrap().len(), 90);
    let partial = stream_session(&short, &model, &cfg, false).unwrap();
    assert_eq!(partial.len(), 89);
    assert!(partial.iter().all(|e| e.window_stats.count == 10));
}
