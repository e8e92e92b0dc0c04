//! Domain types, physical constants and pipeline configuration.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of pressure channels across both insoles.
pub const CHANNELS: usize = 36;
/// Channels per insole; left is `0..18`, right is `18..36`.
pub const CHANNELS_PER_FOOT: usize = 18;
/// Nominal sampling rate of the insoles.
pub const SAMPLE_RATE_HZ: f64 = 20.0;
/// Nominal frame spacing at [`SAMPLE_RATE_HZ`].
pub const FRAME_INTERVAL_MS: i64 = 50;
/// Accepted deviation from [`FRAME_INTERVAL_MS`] between consecutive frames.
pub const FRAME_JITTER_MS: i64 = 20;
/// Per-channel full scale in raw units. One raw unit is one gram-force
/// equivalent, so this is the 70 kg channel rating.
pub const FULL_SCALE_RAW: f64 = 70_000.0;
/// Lightest and heaviest load of the lifting ladder.
pub const MIN_LOAD_KG: f64 = 2.0;
pub const MAX_LOAD_KG: f64 = 10.0;
/// Increment between consecutive ladder loads.
pub const LOAD_STEP_KG: f64 = 0.5;

/// Fixed-size vector holding one value per channel.
pub type ChannelVector = [f64; CHANNELS];

/// One insole sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp_ms: i64,
    pub channels: Vec<f64>,
}

impl Frame {
    pub fn new(timestamp_ms: i64, channels: Vec<f64>) -> Self {
        Self {
            timestamp_ms,
            channels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Baseline,
    Lift,
    Return,
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PhaseKind::Baseline => "baseline",
            PhaseKind::Lift => "lift",
            PhaseKind::Return => "return",
        };
        f.write_str(s)
    }
}

/// Timer schedule of a session: every load of the ladder runs through
/// `phases` in order, each phase lasting `phase_duration_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub phase_duration_s: f64,
    pub phases: Vec<PhaseKind>,
    #[serde(default)]
    pub start_ms: i64,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self {
            phase_duration_s: 15.0,
            phases: vec![PhaseKind::Baseline, PhaseKind::Lift, PhaseKind::Return],
            start_ms: 0,
        }
    }
}

impl PhaseSchedule {
    pub fn phase_duration_ms(&self) -> i64 {
        (self.phase_duration_s * 1000.0).round() as i64
    }

    /// Start time of the `k`-th phase counted from the schedule start.
    pub fn boundary_ms(&self, k: usize) -> i64 {
        self.start_ms + k as i64 * self.phase_duration_ms()
    }

    pub fn cycle_len(&self) -> usize {
        self.phases.len()
    }

    /// Total scheduled span for a ladder of `loads` entries.
    pub fn span_ms(&self, loads: usize) -> i64 {
        (loads * self.cycle_len()) as i64 * self.phase_duration_ms()
    }
}

/// Frames of one subject-session plus the protocol that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecording {
    pub subject_id: String,
    pub session_index: u32,
    pub frames: Vec<Frame>,
    pub schedule: PhaseSchedule,
    pub load_ladder: Vec<f64>,
}

impl SessionRecording {
    /// Channel `c` of every frame as a contiguous series.
    pub fn channel_series(&self, c: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.channels[c]).collect()
    }
}

/// Full 2.0..=10.0 kg ladder in 0.5 kg steps.
pub fn standard_ladder() -> Vec<f64> {
    let steps = ((MAX_LOAD_KG - MIN_LOAD_KG) / LOAD_STEP_KG).round() as usize;
    (0..=steps)
        .map(|i| MIN_LOAD_KG + i as f64 * LOAD_STEP_KG)
        .collect()
}

/// True if `kg` is one of the ladder values.
pub fn is_ladder_load(kg: f64) -> bool {
    let k = (kg - MIN_LOAD_KG) / LOAD_STEP_KG;
    kg.is_finite() && (k - k.round()).abs() < 1e-9 && (-1e-9..=16.0 + 1e-9).contains(&k)
}

/// Differential feature vector of one lift frame with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: ChannelVector,
    /// `None` for baseline-only samples.
    pub label_kg: Option<f64>,
    pub subject_id: String,
    pub session_index: u32,
    pub frame_timestamp_ms: i64,
}

/// Identity of a sample, used for leakage checks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleId {
    pub subject_id: String,
    pub session_index: u32,
    pub frame_timestamp_ms: i64,
}

impl LabeledSample {
    pub fn id(&self) -> SampleId {
        SampleId {
            subject_id: self.subject_id.clone(),
            session_index: self.session_index,
            frame_timestamp_ms: self.frame_timestamp_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cutoff {cutoff_hz} Hz must lie in (0, {nyquist} Hz)")]
    Cutoff { cutoff_hz: f64, nyquist: f64 },
    #[error("only second-order filters are supported, got order {0}")]
    FilterOrder(u32),
    #[error("trim quantiles must satisfy 0 <= low < high <= 1, got ({0}, {1})")]
    TrimQuantiles(f64, f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub sample_rate_hz: f64,
    pub cutoff_hz: f64,
    pub filter_order: u32,
    pub baseline_window_s: f64,
    pub lift_window_s: f64,
    pub aggregation_count: usize,
    pub trim_low: f64,
    pub trim_high: f64,
    pub unseen_loads_kg: Vec<f64>,
    pub split_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: SAMPLE_RATE_HZ,
            cutoff_hz: 0.3,
            filter_order: 2,
            baseline_window_s: 5.0,
            lift_window_s: 10.0,
            aggregation_count: 10,
            trim_low: 0.1,
            trim_high: 0.9,
            unseen_loads_kg: vec![3.0, 6.0, 9.0],
            split_seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(ConfigError::NonPositive("sample_rate_hz"));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return Err(ConfigError::Cutoff {
                cutoff_hz: self.cutoff_hz,
                nyquist,
            });
        }
        if self.filter_order != 2 {
            return Err(ConfigError::FilterOrder(self.filter_order));
        }
        if !(0.0..1.0).contains(&self.trim_low)
            || !(self.trim_high > self.trim_low && self.trim_high <= 1.0)
        {
            return Err(ConfigError::TrimQuantiles(self.trim_low, self.trim_high));
        }
        if !(self.baseline_window_s > 0.0) {
            return Err(ConfigError::NonPositive("baseline_window_s"));
        }
        if !(self.lift_window_s > 0.0) {
            return Err(ConfigError::NonPositive("lift_window_s"));
        }
        if self.aggregation_count == 0 {
            return Err(ConfigError::NonPositive("aggregation_count"));
        }
        Ok(())
    }

    pub fn window_frames(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate_hz).round() as usize
    }

    pub fn is_unseen(&self, kg: f64) -> bool {
        self.unseen_loads_kg.iter().any(|u| (u - kg).abs() < 1e-9)
    }
}

/// A broken session invariant, located at a frame (or ladder entry).
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ChannelCount { frame: usize, found: usize },
    NonFinite { frame: usize, channel: usize },
    Negative { frame: usize, channel: usize },
    AboveFullScale { frame: usize, channel: usize },
    TimestampOrder { frame: usize },
    TimestampSpacing { frame: usize, gap_ms: i64 },
    SessionIndex { found: u32 },
    LadderValue { entry: usize },
    LadderStep { entry: usize },
}

impl Violation {
    /// Frame index the violation refers to, if any.
    pub fn frame(&self) -> Option<usize> {
        match *self {
            Violation::ChannelCount { frame, .. }
            | Violation::NonFinite { frame, .. }
            | Violation::Negative { frame, .. }
            | Violation::AboveFullScale { frame, .. }
            | Violation::TimestampOrder { frame }
            | Violation::TimestampSpacing { frame, .. } => Some(frame),
            _ => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ChannelCount { frame, found } => {
                write!(
                    f,
                    "ChannelCount@frame {frame}: expected {CHANNELS}, found {found}"
                )
            }
            Violation::NonFinite { frame, channel } => {
                write!(f, "NonFinite@frame {frame}: channel {channel}")
            }
            Violation::Negative { frame, channel } => {
                write!(f, "Negative@frame {frame}: channel {channel}")
            }
            Violation::AboveFullScale { frame, channel } => {
                write!(f, "AboveFullScale@frame {frame}: channel {channel}")
            }
            Violation::TimestampOrder { frame } => write!(f, "TimestampOrder@frame {frame}"),
            Violation::TimestampSpacing { frame, gap_ms } => {
                write!(f, "TimestampSpacing@frame {frame}: gap {gap_ms} ms")
            }
            Violation::SessionIndex { found } => {
                write!(f, "SessionIndex: {found} not in 1..=3")
            }
            Violation::LadderValue { entry } => write!(f, "LadderValue@entry {entry}"),
            Violation::LadderStep { entry } => write!(f, "LadderStep@entry {entry}"),
        }
    }
}

/// Checks every [`SessionRecording`] invariant and lists the breaches.
pub fn validate_session(rec: &SessionRecording) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(1..=3).contains(&rec.session_index) {
        out.push(Violation::SessionIndex {
            found: rec.session_index,
        });
    }
    for (i, frame) in rec.frames.iter().enumerate() {
        if frame.channels.len() != CHANNELS {
            out.push(Violation::ChannelCount {
                frame: i,
                found: frame.channels.len(),
            });
        }
        for (c, &v) in frame.channels.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite {
                    frame: i,
                    channel: c,
                });
            } else if v < 0.0 {
                out.push(Violation::Negative {
                    frame: i,
                    channel: c,
                });
            } else if v > FULL_SCALE_RAW {
                out.push(Violation::AboveFullScale {
                    frame: i,
                    channel: c,
                });
            }
        }
        if i > 0 {
            let gap = frame.timestamp_ms - rec.frames[i - 1].timestamp_ms;
            if gap <= 0 {
                out.push(Violation::TimestampOrder { frame: i });
            } else if (gap - FRAME_INTERVAL_MS).abs() > FRAME_JITTER_MS {
                out.push(Violation::TimestampSpacing {
                    frame: i,
                    gap_ms: gap,
                });
            }
        }
    }
    for (k, &kg) in rec.load_ladder.iter().enumerate() {
        if !is_ladder_load(kg) {
            out.push(Violation::LadderValue { entry: k });
        }
        if k > 0 && ((kg - rec.load_ladder[k - 1]) - LOAD_STEP_KG).abs() > 1e-9 {
            out.push(Violation::LadderStep { entry: k });
        }
    }
    out
}
