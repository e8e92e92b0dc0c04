//! Session files, timer segmentation and window extraction.
//!
//! A session is described by a JSON manifest pointing at a frame CSV with
//! header `t_ms,ch00,...,ch35`. Sources with a different header are mapped
//! onto the canonical columns through the manifest's `column_map`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_session, Frame, LabeledSample, PhaseKind, PhaseSchedule, PipelineConfig,
    SessionRecording, Violation, CHANNELS, FRAME_INTERVAL_MS, FRAME_JITTER_MS,
};
use crate::dsp::{self, DspError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: invalid manifest: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}:{line}: {violation}", path.display())]
    Validation {
        path: PathBuf,
        line: u64,
        violation: Violation,
    },
    #[error("recording ends at {available_ms} ms but the schedule needs {needed_ms} ms")]
    ScheduleMismatch { needed_ms: i64, available_ms: i64 },
    #[error("schedule has no {0} phase")]
    MissingPhase(PhaseKind),
    #[error(
        "{kind} phase of cycle {cycle} has {phase_frames} frames, window needs {window_frames}"
    )]
    WindowTooLarge {
        kind: PhaseKind,
        cycle: usize,
        phase_frames: usize,
        window_frames: usize,
    },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// On-disk description of one subject-session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub subject_id: String,
    pub session_index: u32,
    pub phase_duration_s: f64,
    pub loads_kg: Vec<f64>,
    /// Frame CSV, relative to the manifest's directory unless absolute.
    pub frames_csv: PathBuf,
    /// Canonical column name (`t_ms`, `ch00`..`ch35`) to source column name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_map: Option<HashMap<String, String>>,
    /// Phase order within one load cycle; defaults to baseline, lift, return.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<PhaseKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_start_ms: Option<i64>,
    /// Set when the source already applied the low-pass filter.
    #[serde(default)]
    pub prefiltered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shoe_size: Option<f64>,
}

impl SessionManifest {
    pub fn schedule(&self) -> PhaseSchedule {
        let mut s = PhaseSchedule {
            phase_duration_s: self.phase_duration_s,
            ..PhaseSchedule::default()
        };
        if let Some(p) = &self.phases {
            s.phases = p.clone();
        }
        if let Some(t) = self.schedule_start_ms {
            s.start_ms = t;
        }
        s
    }
}

pub fn channel_column(c: usize) -> String {
    format!("ch{c:02}")
}

pub fn load_manifest(path: &Path) -> Result<SessionManifest, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: SessionManifest =
        serde_json::from_str(&text).map_err(|e| IngestError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    if !(manifest.phase_duration_s > 0.0) {
        return Err(IngestError::Manifest {
            path: path.to_path_buf(),
            message: "phase_duration_s must be positive".into(),
        });
    }
    Ok(manifest)
}

/// Reads the manifest and its frames, rejecting invalid recordings.
pub fn read_session(
    manifest_path: &Path,
) -> Result<(SessionManifest, SessionRecording), IngestError> {
    let manifest = load_manifest(manifest_path)?;
    let csv_path = if manifest.frames_csv.is_absolute() {
        manifest.frames_csv.clone()
    } else {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&manifest.frames_csv)
    };
    let (frames, lines) = read_frames(&csv_path, manifest.column_map.as_ref())?;
    let rec = SessionRecording {
        subject_id: manifest.subject_id.clone(),
        session_index: manifest.session_index,
        frames,
        schedule: manifest.schedule(),
        load_ladder: manifest.loads_kg.clone(),
    };
    if let Some(violation) = validate_session(&rec).into_iter().next() {
        let (path, line) = match violation.frame() {
            Some(i) => (csv_path, lines[i]),
            None => (manifest_path.to_path_buf(), 1),
        };
        return Err(IngestError::Validation {
            path,
            line,
            violation,
        });
    }
    Ok((manifest, rec))
}

pub fn parse_session(manifest_path: &Path) -> Result<SessionRecording, IngestError> {
    read_session(manifest_path).map(|(_, rec)| rec)
}

/// Parses a frame CSV; returns frames and the source line of each.
pub fn read_frames(
    path: &Path,
    column_map: Option<&HashMap<String, String>>,
) -> Result<(Vec<Frame>, Vec<u64>), IngestError> {
    let parse_err = |line: u64, message: String| IngestError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IngestError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err(1, "empty frame file".into()));
    }
    let source_name = |canonical: &str| -> String {
        column_map
            .and_then(|m| m.get(canonical).cloned())
            .unwrap_or_else(|| canonical.to_string())
    };
    let find = |canonical: &str| -> Result<usize, IngestError> {
        let name = source_name(canonical);
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let t_col = find("t_ms")?;
    let ch_cols = (0..CHANNELS)
        .map(|c| find(&channel_column(c)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut frames = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", headers.len(), record.len()),
            ));
        }
        let num = |col: usize| -> Result<f64, IngestError> {
            record[col]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("not a number: `{}`", &record[col])))
        };
        let t = num(t_col)?;
        if !t.is_finite() || t.fract() != 0.0 {
            return Err(parse_err(
                line,
                format!("timestamp `{}` is not an integer", &record[t_col]),
            ));
        }
        let channels = ch_cols
            .iter()
            .map(|&c| num(c))
            .collect::<Result<Vec<_>, _>>()?;
        frames.push(Frame::new(t as i64, channels));
        lines.push(line);
    }
    if frames.is_empty() {
        return Err(parse_err(2, "frame file has no rows".into()));
    }
    Ok((frames, lines))
}

/// Writes frames in the canonical CSV layout.
pub fn write_frames(path: &Path, frames: &[Frame]) -> Result<(), IngestError> {
    let io = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    let mut header = String::from("t_ms");
    for c in 0..CHANNELS {
        header.push(',');
        header.push_str(&channel_column(c));
    }
    writeln!(w, "{header}").map_err(io)?;
    for f in frames {
        let mut line = f.timestamp_ms.to_string();
        for v in &f.channels {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns the manifest path.
pub fn write_session(
    rec: &SessionRecording,
    dir: &Path,
    stem: &str,
) -> Result<PathBuf, IngestError> {
    let csv_name = format!("{stem}.csv");
    write_frames(&dir.join(&csv_name), &rec.frames)?;
    let default = PhaseSchedule::default();
    let manifest = SessionManifest {
        subject_id: rec.subject_id.clone(),
        session_index: rec.session_index,
        phase_duration_s: rec.schedule.phase_duration_s,
        loads_kg: rec.load_ladder.clone(),
        frames_csv: PathBuf::from(csv_name),
        column_map: None,
        phases: (rec.schedule.phases != default.phases).then(|| rec.schedule.phases.clone()),
        schedule_start_ms: (rec.schedule.start_ms != 0).then_some(rec.schedule.start_ms),
        prefiltered: false,
        body_mass_kg: None,
        shoe_size: None,
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|source| IngestError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// A scheduled phase mapped onto recording frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: PhaseKind,
    /// Ladder load of the cycle the phase belongs to.
    pub load_kg: f64,
    pub cycle: usize,
    pub frames: Range<usize>,
}

/// Splits the recording at the timer boundaries.
pub fn segment_phases(rec: &SessionRecording) -> Result<Vec<Segment>, IngestError> {
    let sched = &rec.schedule;
    let n_phases = rec.load_ladder.len() * sched.cycle_len();
    let needed_ms = sched.boundary_ms(n_phases);
    let available_ms = rec
        .frames
        .last()
        .map(|f| f.timestamp_ms)
        .unwrap_or(i64::MIN);
    let first_ms = rec
        .frames
        .first()
        .map(|f| f.timestamp_ms)
        .unwrap_or(i64::MAX);
    let slack = FRAME_INTERVAL_MS + FRAME_JITTER_MS;
    if available_ms < needed_ms - slack || first_ms > sched.start_ms + slack {
        return Err(IngestError::ScheduleMismatch {
            needed_ms,
            available_ms,
        });
    }
    let index_of = |t: i64| rec.frames.partition_point(|f| f.timestamp_ms < t);
    let mut out = Vec::with_capacity(n_phases);
    for k in 0..n_phases {
        let frames = index_of(sched.boundary_ms(k))..index_of(sched.boundary_ms(k + 1));
        if frames.is_empty() {
            return Err(IngestError::ScheduleMismatch {
                needed_ms,
                available_ms,
            });
        }
        let cycle = k / sched.cycle_len();
        out.push(Segment {
            kind: sched.phases[k % sched.cycle_len()],
            load_kg: rec.load_ladder[cycle],
            cycle,
            frames,
        });
    }
    Ok(out)
}

/// Baseline and lift windows of one load cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub cycle: usize,
    pub load_kg: f64,
    pub baseline: Range<usize>,
    pub lift: Range<usize>,
}

/// Window of `width` frames centred in `phase`, starting at `floor((N - W) / 2)`.
pub fn centered_window(phase: &Range<usize>, width: usize) -> Option<Range<usize>> {
    let n = phase.len();
    if width > n || width == 0 {
        return None;
    }
    let start = phase.start + (n - width) / 2;
    Some(start..start + width)
}

/// Pairs each lift window with the baseline window of the same cycle.
pub fn extract_windows(
    segments: &[Segment],
    cfg: &PipelineConfig,
) -> Result<Vec<WindowPair>, IngestError> {
    let baseline_w = cfg.window_frames(cfg.baseline_window_s);
    let lift_w = cfg.window_frames(cfg.lift_window_s);
    let cycles = segments.iter().map(|s| s.cycle + 1).max().unwrap_or(0);
    let mut out = Vec::with_capacity(cycles);
    for cycle in 0..cycles {
        let find = |kind| {
            segments
                .iter()
                .find(|s| s.cycle == cycle && s.kind == kind)
                .ok_or(IngestError::MissingPhase(kind))
        };
        let base = find(PhaseKind::Baseline)?;
        let lift = find(PhaseKind::Lift)?;
        let window = |seg: &Segment, w: usize| {
            centered_window(&seg.frames, w).ok_or(IngestError::WindowTooLarge {
                kind: seg.kind,
                cycle,
                phase_frames: seg.frames.len(),
                window_frames: w,
            })
        };
        out.push(WindowPair {
            cycle,
            load_kg: lift.load_kg,
            baseline: window(base, baseline_w)?,
            lift: window(lift, lift_w)?,
        });
    }
    Ok(out)
}

/// Filter (unless `prefiltered`), segment, window and difference a session.
pub fn preprocess_session(
    rec: &SessionRecording,
    cfg: &PipelineConfig,
    prefiltered: bool,
) -> Result<Vec<LabeledSample>, IngestError> {
    let frames = if prefiltered {
        dsp::unfiltered_frames(&rec.frames)
    } else {
        let coeffs = dsp::design_butterworth(cfg.cutoff_hz, cfg.sample_rate_hz)?;
        dsp::filter_frames(&rec.frames, &coeffs)
    };
    let segments = segment_phases(rec)?;
    let mut samples = Vec::new();
    for pair in extract_windows(&segments, cfg)? {
        let baseline = dsp::baseline_mean(&frames[pair.baseline.clone()])?;
        let feats = dsp::differential_features(&frames[pair.lift.clone()], &baseline);
        for (i, features) in pair.lift.clone().zip(feats) {
            samples.push(LabeledSample {
                features,
                label_kg: Some(pair.load_kg),
                subject_id: rec.subject_id.clone(),
                session_index: rec.session_index,
                frame_timestamp_ms: rec.frames[i].timestamp_ms,
            });
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recording(loads: Vec<f64>, seconds_per_phase: usize) -> SessionRecording {
        let n = loads.len() * 3 * seconds_per_phase * 20;
        SessionRecording {
            subject_id: "s".into(),
            session_index: 1,
            frames: (0..n)
                .map(|i| Frame::new(i as i64 * 50, vec![100.0; CHANNELS]))
                .collect(),
            schedule: PhaseSchedule {
                phase_duration_s: seconds_per_phase as f64,
                ..Default::default()
            },
            load_ladder: loads,
        }
    }

    #[test]
    fn single_cycle_segments() {
        let rec = recording(vec![2.0], 15);
        let segs = segment_phases(&rec).unwrap();
        let kinds: Vec<_> = segs.iter().map(|s| (s.kind, s.load_kg)).collect();
        assert_eq!(
            kinds,
            vec![
                (PhaseKind::Baseline, 2.0),
                (PhaseKind::Lift, 2.0),
                (PhaseKind::Return, 2.0)
            ]
        );
        assert_eq!(segs[0].frames, 0..300);
        assert_eq!(segs[2].frames, 600..900);
    }

    #[test]
    fn full_ladder_has_51_contiguous_segments() {
        let rec = recording(crate::domain::standard_ladder(), 15);
        let segs = segment_phases(&rec).unwrap();
        assert_eq!(segs.len(), 51);
        let mut next = 0;
        for s in &segs {
            assert_eq!(s.frames.start, next);
            next = s.frames.end;
        }
        assert_eq!(next, rec.frames.len());
    }

    #[test]
    fn truncated_recording_is_rejected() {
        let mut rec = recording(vec![2.0, 2.5, 3.0], 15);
        rec.frames.truncate(1500);
        assert!(matches!(
            segment_phases(&rec),
            Err(IngestError::ScheduleMismatch { .. })
        ));
    }

    #[test]
    fn centered_window_indices() {
        // enumerate every start and keep the one with balanced margins
        let oracle = |n: usize, w: usize| {
            (0..=n - w)
                .filter(|&s| {
                    let left = s;
                    let right = n - w - s;
                    left <= right && right - left <= 1
                })
                .map(|s| s..s + w)
                .next()
                .unwrap()
        };
        assert_eq!(centered_window(&(0..300), 100), Some(100..200));
        assert_eq!(centered_window(&(0..300), 200), Some(50..250));
        for n in 1..40 {
            for w in 1..=n {
                assert_eq!(centered_window(&(0..n), w), Some(oracle(n, w)));
            }
        }
        assert_eq!(centered_window(&(0..80), 100), None);
    }

    #[test]
    fn window_too_large_for_short_phase() {
        let rec = recording(vec![2.0], 4);
        let segs = segment_phases(&rec).unwrap();
        let err = extract_windows(&segs, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, IngestError::WindowTooLarge { .. }));
    }

    #[test]
    fn windows_stay_inside_their_phase() {
        let rec = recording(vec![2.0, 2.5, 3.0, 3.5], 15);
        let segs = segment_phases(&rec).unwrap();
        let pairs = extract_windows(&segs, &PipelineConfig::default()).unwrap();
        assert_eq!(pairs.len(), 4);
        for p in &pairs {
            let base = &segs[3 * p.cycle].frames;
            let lift = &segs[3 * p.cycle + 1].frames;
            assert!(p.baseline.start > base.start && p.baseline.end < base.end);
            assert!(p.lift.start > lift.start && p.lift.end < lift.end);
            assert!(p.baseline.end <= p.lift.start);
            assert_eq!(p.lift.len(), 200);
        }
    }
}
