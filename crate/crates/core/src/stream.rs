//! Frame-by-frame estimation for live or replayed sessions.
//!
//! Each frame is filtered causally, differenced against the most recent
//! completed baseline window, passed through the model and pushed into a
//! tumbling [`Aggregator`]. Windows are located from the timer schedule
//! using the nominal phase length, so on a regular 20 Hz recording the
//! estimates that fall inside lift windows coincide bit-for-bit with the
//! offline pipeline.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregateError, Aggregator, WindowStats};
use crate::domain::{
    ChannelVector, Frame, PhaseKind, PhaseSchedule, PipelineConfig, SessionRecording, CHANNELS,
};
use crate::dsp::{self, Biquad, DspError};
use crate::eval::{aggregate_windows, EvalError, WindowEstimate};
use crate::ingest::{centered_window, preprocess_session, IngestError};
use crate::regress::Model;

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("frame at {t_ms} ms has {found} channels, expected {CHANNELS}")]
    ChannelCount { t_ms: i64, found: usize },
    #[error("model expects {0} features, frames carry {CHANNELS}")]
    FeatureCount(usize),
    #[error("{kind} window of {window} frames does not fit a {phase}-frame phase")]
    WindowTooLarge {
        kind: PhaseKind,
        window: usize,
        phase: usize,
    },
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One emitted estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEstimate {
    /// Timestamp of the last frame of the window.
    pub t_ms: i64,
    pub load_kg: f64,
    pub window_stats: WindowStats,
    /// Phase of the last frame; absent outside the schedule.
    pub phase: Option<PhaseKind>,
    pub cycle: Option<usize>,
    /// Every frame of the window lies in the lift window of one cycle.
    pub in_lift_window: bool,
}

pub struct StreamEstimator<'m> {
    model: &'m Model,
    filters: Option<Vec<Biquad>>,
    schedule: PhaseSchedule,
    n_phases: usize,
    baseline_window: Range<usize>,
    lift_window: Range<usize>,
    current_phase: Option<usize>,
    index_in_phase: usize,
    baseline_buf: Vec<ChannelVector>,
    baseline: Option<ChannelVector>,
    aggregator: Aggregator,
    window_lift_frames: usize,
    window_cycle: Option<usize>,
}

impl<'m> StreamEstimator<'m> {
    /// `ladder_len` bounds the schedule; `prefiltered` skips the low-pass.
    pub fn new(
        model: &'m Model,
        cfg: &PipelineConfig,
        schedule: &PhaseSchedule,
        ladder_len: usize,
        prefiltered: bool,
    ) -> Result<Self, StreamError> {
        if model.n_features() != CHANNELS {
            return Err(StreamError::FeatureCount(model.n_features()));
        }
        let filters = if prefiltered {
            None
        } else {
            let c = dsp::design_butterworth(cfg.cutoff_hz, cfg.sample_rate_hz)?;
            Some((0..CHANNELS).map(|_| Biquad::new(c)).collect())
        };
        let phase_frames = (schedule.phase_duration_s * cfg.sample_rate_hz).round() as usize;
        let window = |kind, seconds| {
            let w = cfg.window_frames(seconds);
            centered_window(&(0..phase_frames), w).ok_or(StreamError::WindowTooLarge {
                kind,
                window: w,
                phase: phase_frames,
            })
        };
        Ok(Self {
            model,
            filters,
            schedule: schedule.clone(),
            n_phases: ladder_len * schedule.cycle_len(),
            baseline_window: window(PhaseKind::Baseline, cfg.baseline_window_s)?,
            lift_window: window(PhaseKind::Lift, cfg.lift_window_s)?,
            current_phase: None,
            index_in_phase: 0,
            baseline_buf: Vec::new(),
            baseline: None,
            aggregator: Aggregator::new(cfg.aggregation_count, cfg.trim_low, cfg.trim_high)?,
            window_lift_frames: 0,
            window_cycle: None,
        })
    }

    fn phase_of(&self, t_ms: i64) -> Option<usize> {
        if t_ms < self.schedule.start_ms {
            return None;
        }
        let k = ((t_ms - self.schedule.start_ms) / self.schedule.phase_duration_ms()) as usize;
        (k < self.n_phases).then_some(k)
    }

    /// Consumes one frame; returns an estimate every `aggregation_count` frames.
    pub fn push(&mut self, frame: &Frame) -> Result<Option<StreamEstimate>, StreamError> {
        if frame.channels.len() != CHANNELS {
            return Err(StreamError::ChannelCount {
                t_ms: frame.timestamp_ms,
                found: frame.channels.len(),
            });
        }
        let mut filtered = [0.0; CHANNELS];
        match self.filters.as_mut() {
            Some(filters) => {
                for (c, (o, f)) in filtered.iter_mut().zip(filters.iter_mut()).enumerate() {
                    *o = f.step(frame.channels[c]);
                }
            }
            None => filtered.copy_from_slice(&frame.channels),
        }

        let phase = self.phase_of(frame.timestamp_ms);
        if phase != self.current_phase {
            self.current_phase = phase;
            self.index_in_phase = 0;
            self.baseline_buf.clear();
        } else {
            self.index_in_phase += 1;
        }
        let cycle_len = self.schedule.cycle_len();
        let kind = phase.map(|k| self.schedule.phases[k % cycle_len]);
        let cycle = phase.map(|k| k / cycle_len);
        let i = self.index_in_phase;

        if kind == Some(PhaseKind::Baseline) && self.baseline_window.contains(&i) {
            self.baseline_buf.push(filtered);
            if i + 1 == self.baseline_window.end {
                self.baseline = Some(dsp::baseline_mean(&self.baseline_buf)?);
            }
        }
        // before the first baseline completes, the first frame is the reference
        let reference = *self.baseline.get_or_insert(filtered);
        let features = dsp::differential(&filtered, &reference);
        let pred = self.model.predict(&features);

        let in_lift = kind == Some(PhaseKind::Lift) && self.lift_window.contains(&i);
        if self.aggregator.pending() == 0 {
            self.window_cycle = cycle;
            self.window_lift_frames = 0;
        }
        if in_lift && cycle == self.window_cycle {
            self.window_lift_frames += 1;
        }
        let Some(est) = self.aggregator.push_with_stats(pred)? else {
            return Ok(None);
        };
        Ok(Some(StreamEstimate {
            t_ms: frame.timestamp_ms,
            load_kg: est.load_kg,
            window_stats: est.stats,
            phase: kind,
            cycle,
            in_lift_window: self.window_lift_frames == self.aggregator.capacity(),
        }))
    }
}

/// Runs a whole recording through a [`StreamEstimator`].
pub fn stream_session(
    rec: &SessionRecording,
    model: &Model,
    cfg: &PipelineConfig,
    prefiltered: bool,
) -> Result<Vec<StreamEstimate>, StreamError> {
    let mut est = StreamEstimator::new(
        model,
        cfg,
        &rec.schedule,
        rec.load_ladder.len(),
        prefiltered,
    )?;
    let mut out = Vec::new();
    for f in &rec.frames {
        if let Some(e) = est.push(f)? {
            out.push(e);
        }
    }
    Ok(out)
}

/// Offline counterpart: preprocess the session, predict every lift-window
/// sample and aggregate per lift window, in time order.
pub fn offline_estimates(
    rec: &SessionRecording,
    model: &Model,
    cfg: &PipelineConfig,
    prefiltered: bool,
) -> Result<Vec<WindowEstimate>, StreamError> {
    let samples = preprocess_session(rec, cfg, prefiltered)?;
    let preds: Vec<f64> = samples.iter().map(|s| model.predict(&s.features)).collect();
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut out = aggregate_windows(
        &samples,
        &idx,
        &preds,
        cfg.aggregation_count,
        cfg.trim_low,
        cfg.trim_high,
    )?;
    out.sort_by_key(|w| w.t_ms);
    Ok(out)
}
