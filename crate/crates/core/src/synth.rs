//! Synthetic sessions with known ground truth.
//!
//! A frame is `offset + response(load) + noise + drift * t`, where the load
//! term is present only during lift phases. Values are clamped to the
//! sensor range `[0, FULL_SCALE_RAW]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    ChannelVector, Frame, PhaseKind, PhaseSchedule, SessionRecording, CHANNELS, FRAME_INTERVAL_MS,
    FRAME_JITTER_MS, FULL_SCALE_RAW, SAMPLE_RATE_HZ,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid synthetic spec: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub subject_id: String,
    pub session_index: u32,
    /// Standing pressure per channel (body weight and shoe fit).
    pub offset: Vec<f64>,
    /// Pressure increment per kg of load, per channel.
    pub response_per_kg: Vec<f64>,
    /// When set, the increment saturates as `s * tanh(load / s)` kg-equivalents.
    pub saturation_kg: Option<f64>,
    /// Standard deviation of white sensor noise, raw units.
    pub noise_sigma: f64,
    /// Linear drift, raw units per second, common to all channels.
    pub drift_per_s: f64,
    /// Uniform timestamp jitter amplitude in ms. Consecutive frames can move
    /// in opposite directions, so at most half the spacing tolerance.
    pub timestamp_jitter_ms: i64,
    pub seed: u64,
}

/// Out-of-band truth for a generated session.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Load carried at each frame (0 outside lift phases).
    pub frame_load_kg: Vec<f64>,
    /// Noise-free lift increment of every cycle.
    pub lift_increment: Vec<ChannelVector>,
}

impl SynthSpec {
    /// Noise-free increment for `load_kg`.
    pub fn increment(&self, load_kg: f64) -> ChannelVector {
        let effective = match self.saturation_kg {
            Some(s) => s * (load_kg / s).tanh(),
            None => load_kg,
        };
        let mut out = [0.0; CHANNELS];
        for (o, r) in out.iter_mut().zip(&self.response_per_kg) {
            *o = r * effective;
        }
        out
    }

    pub fn validate(&self, schedule: &PhaseSchedule, ladder: &[f64]) -> Result<(), InvalidSpec> {
        let bad = |m: String| Err(InvalidSpec(m));
        if self.offset.len() != CHANNELS || self.response_per_kg.len() != CHANNELS {
            return bad(format!(
                "offset and response need {CHANNELS} channels, got {} and {}",
                self.offset.len(),
                self.response_per_kg.len()
            ));
        }
        let numbers = self
            .offset
            .iter()
            .chain(&self.response_per_kg)
            .chain([&self.noise_sigma, &self.drift_per_s]);
        if numbers.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if self.noise_sigma < 0.0 {
            return bad(format!("noise sigma {} is negative", self.noise_sigma));
        }
        if let Some(s) = self.saturation_kg {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("saturation {s} must be positive"));
            }
        }
        if !(0..=FRAME_JITTER_MS / 2).contains(&self.timestamp_jitter_ms) {
            return bad(format!(
                "timestamp jitter {} ms must lie in 0..={} ms",
                self.timestamp_jitter_ms,
                FRAME_JITTER_MS / 2
            ));
        }
        let span_s = schedule.span_ms(ladder.len()) as f64 / 1000.0;
        let drift_lo = (self.drift_per_s * span_s).min(0.0);
        let drift_hi = (self.drift_per_s * span_s).max(0.0);
        for &load in ladder.iter().chain([&0.0]) {
            let inc = self.increment(load);
            for c in 0..CHANNELS {
                let v = self.offset[c] + inc[c];
                if v + drift_lo < 0.0 || v + drift_hi > FULL_SCALE_RAW {
                    return bad(format!(
                        "channel {c} leaves the sensor range at {load} kg ({v:.1} raw)"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Generates one session following `schedule` over `ladder`.
pub fn generate_session(
    spec: &SynthSpec,
    schedule: &PhaseSchedule,
    ladder: &[f64],
) -> Result<(SessionRecording, GroundTruth), InvalidSpec> {
    spec.validate(schedule, ladder)?;
    let frames_per_phase =
        (schedule.phase_duration_ms() as f64 / FRAME_INTERVAL_MS as f64).round() as usize;
    let cycle = schedule.cycle_len();
    let n = ladder.len() * cycle * frames_per_phase;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| InvalidSpec(e.to_string()))?;
    let increments: Vec<ChannelVector> = ladder.iter().map(|&l| spec.increment(l)).collect();
    let mut frames = Vec::with_capacity(n);
    let mut frame_load_kg = Vec::with_capacity(n);
    for i in 0..n {
        let phase = i / frames_per_phase;
        let load_cycle = phase / cycle;
        let lifting = schedule.phases[phase % cycle] == PhaseKind::Lift;
        let nominal = schedule.start_ms + i as i64 * FRAME_INTERVAL_MS;
        let jitter = if spec.timestamp_jitter_ms > 0 && i > 0 {
            rng.random_range(-spec.timestamp_jitter_ms..=spec.timestamp_jitter_ms)
        } else {
            0
        };
        let t_s = i as f64 / SAMPLE_RATE_HZ;
        let channels = (0..CHANNELS)
            .map(|c| {
                let mut v = spec.offset[c] + spec.drift_per_s * t_s;
                if lifting {
                    v += increments[load_cycle][c];
                }
                if spec.noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                v.clamp(0.0, FULL_SCALE_RAW)
            })
            .collect();
        frames.push(Frame::new(nominal + jitter, channels));
        frame_load_kg.push(if lifting { ladder[load_cycle] } else { 0.0 });
    }
    let rec = SessionRecording {
        subject_id: spec.subject_id.clone(),
        session_index: spec.session_index,
        frames,
        schedule: schedule.clone(),
        load_ladder: ladder.to_vec(),
    };
    Ok((
        rec,
        GroundTruth {
            frame_load_kg,
            lift_increment: increments,
        },
    ))
}

/// Parameters of the default synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusParams {
    pub subjects: usize,
    pub sessions: u32,
    /// Mean per-channel response, raw units per kg.
    pub response_scale: f64,
    pub offset_range: (f64, f64),
    pub noise_sigma: f64,
    pub drift_per_s: f64,
    pub saturation_kg: Option<f64>,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            subjects: 5,
            sessions: 3,
            response_scale: 65.0,
            offset_range: (2500.0, 5000.0),
            noise_sigma: 0.01 * FULL_SCALE_RAW,
            drift_per_s: 0.1,
            saturation_kg: None,
            seed: 7,
        }
    }
}

/// Subject archetypes sharing one load response and differing in their
/// standing pressure, each with `sessions` sessions.
pub fn corpus_specs(p: &CorpusParams) -> Vec<SynthSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let response: Vec<f64> = (0..CHANNELS)
        .map(|_| p.response_scale * rng.random_range(0.2..1.8))
        .collect();
    let mut specs = Vec::new();
    for s in 0..p.subjects {
        let offset: Vec<f64> = (0..CHANNELS)
            .map(|_| rng.random_range(p.offset_range.0..p.offset_range.1))
            .collect();
        for session in 1..=p.sessions {
            specs.push(SynthSpec {
                subject_id: format!("S{}", s + 1),
                session_index: session,
                offset: offset.clone(),
                response_per_kg: response.clone(),
                saturation_kg: p.saturation_kg,
                noise_sigma: p.noise_sigma,
                drift_per_s: p.drift_per_s,
                timestamp_jitter_ms: 0,
                seed: rng.random(),
            });
        }
    }
    specs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{standard_ladder, validate_session};

    fn quiet() -> SynthSpec {
        SynthSpec {
            subject_id: "A".into(),
            session_index: 1,
            offset: vec![3000.0; CHANNELS],
            response_per_kg: (0..CHANNELS).map(|c| 20.0 + c as f64).collect(),
            saturation_kg: None,
            noise_sigma: 0.0,
            drift_per_s: 0.0,
            timestamp_jitter_ms: 0,
            seed: 1,
        }
    }

    #[test]
    fn single_load_lasts_45_seconds() {
        let (rec, truth) = generate_session(&quiet(), &PhaseSchedule::default(), &[2.0]).unwrap();
        assert_eq!(rec.frames.len(), 900);
        assert_eq!(
            rec.frames.last().unwrap().timestamp_ms + FRAME_INTERVAL_MS,
            45_000
        );
        assert_eq!(truth.frame_load_kg[299], 0.0);
        assert_eq!(truth.frame_load_kg[300], 2.0);
        assert_eq!(truth.frame_load_kg[600], 0.0);
    }

    #[test]
    fn noisy_sessions_are_valid_and_seeded() {
        let specs = corpus_specs(&CorpusParams::default());
        assert_eq!(specs.len(), 15);
        let ladder = standard_ladder();
        let (a, _) = generate_session(&specs[0], &PhaseSchedule::default(), &ladder).unwrap();
        let (b, _) = generate_session(&specs[0], &PhaseSchedule::default(), &ladder).unwrap();
        assert_eq!(a, b);
        assert!(validate_session(&a).is_empty());
        let mut jittery = specs[1].clone();
        jittery.timestamp_jitter_ms = 10;
        let (c, _) = generate_session(&jittery, &PhaseSchedule::default(), &ladder).unwrap();
        assert!(validate_session(&c).is_empty());
    }

    #[test]
    fn rejects_out_of_range_response() {
        let mut s = quiet();
        s.response_per_kg[3] = -2000.0;
        assert!(generate_session(&s, &PhaseSchedule::default(), &[2.0, 2.5]).is_err());
        let mut s = quiet();
        s.offset.pop();
        assert!(generate_session(&s, &PhaseSchedule::default(), &[2.0]).is_err());
        let mut s = quiet();
        s.noise_sigma = -1.0;
        assert!(generate_session(&s, &PhaseSchedule::default(), &[2.0]).is_err());
    }

    #[test]
    fn saturating_response_is_sublinear() {
        let mut s = quiet();
        s.saturation_kg = Some(20.0);
        let ten = s.increment(10.0)[0];
        let two = s.increment(2.0)[0];
        assert!(ten < 5.0 * two);
        assert!(ten > 0.9 * 10.0 * 20.0);
    }
}
