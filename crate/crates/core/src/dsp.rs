//! Low-pass filtering and baseline-differential features.

use std::f64::consts::{PI, SQRT_2};

use crate::domain::{ChannelVector, Frame, CHANNELS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({nyquist_hz} Hz)")]
    InvalidCutoff { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("window contains no frames")]
    EmptyWindow,
}

/// Normalised biquad: `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiquadCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadCoefficients {
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// `|H(e^{jw})|` at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b0 + self.b1 * c1 + self.b2 * c2,
            self.b1 * s1 + self.b2 * s2,
        );
        let den = (
            1.0 + self.a1 * c1 + self.a2 * c2,
            self.a1 * s1 + self.a2 * s2,
        );
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    /// Largest pole modulus; the filter is stable iff this is below 1.
    pub fn max_pole_radius(&self) -> f64 {
        // z^2 + a1 z + a2 = 0
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            // complex pair, |z|^2 = a2
            self.a2.sqrt()
        } else {
            let r = disc.sqrt();
            ((-self.a1 + r) / 2.0)
                .abs()
                .max(((-self.a1 - r) / 2.0).abs())
        }
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }
}

/// Second-order Butterworth low-pass via the bilinear transform with the
/// cutoff prewarped onto the analog axis.
pub fn design_butterworth(
    cutoff_hz: f64,
    sample_rate_hz: f64,
) -> Result<BiquadCoefficients, DspError> {
    let nyquist_hz = sample_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
        return Err(DspError::InvalidCutoff {
            cutoff_hz,
            nyquist_hz,
        });
    }
    let k = (PI * cutoff_hz / sample_rate_hz).tan();
    let k2 = k * k;
    let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
    let b0 = k2 * norm;
    Ok(BiquadCoefficients {
        b0,
        b1: 2.0 * b0,
        b2: b0,
        a1: 2.0 * (k2 - 1.0) * norm,
        a2: (1.0 - SQRT_2 * k + k2) * norm,
    })
}

/// Direct-form-II-transposed biquad state for sample-by-sample use.
#[derive(Debug, Clone)]
pub struct Biquad {
    coeffs: BiquadCoefficients,
    z1: f64,
    z2: f64,
    primed: bool,
}

impl Biquad {
    pub fn new(coeffs: BiquadCoefficients) -> Self {
        Self {
            coeffs,
            z1: 0.0,
            z2: 0.0,
            primed: false,
        }
    }

    /// Loads the steady state of a constant input `x`.
    pub fn prime(&mut self, x: f64) {
        let c = &self.coeffs;
        self.z1 = (1.0 - c.b0) * x;
        self.z2 = (c.b2 - c.a2) * x;
        self.primed = true;
    }

    /// Filters one sample. The first sample primes the state when the
    /// filter has not been primed explicitly.
    pub fn step(&mut self, x: f64) -> f64 {
        if !self.primed {
            self.prime(x);
        }
        self.step_raw(x)
    }

    /// Filters one sample without step-matching; the state starts at zero.
    pub fn step_raw(&mut self, x: f64) -> f64 {
        self.primed = true;
        let c = &self.coeffs;
        let y = c.b0 * x + self.z1;
        self.z1 = c.b1 * x - c.a1 * y + self.z2;
        self.z2 = c.b2 * x - c.a2 * y;
        y
    }
}

/// Causal filtering of one channel, primed with the first sample so a
/// constant signal passes through unchanged.
pub fn filter_channel(signal: &[f64], coeffs: &BiquadCoefficients) -> Vec<f64> {
    let mut f = Biquad::new(*coeffs);
    signal.iter().map(|&x| f.step(x)).collect()
}

/// Channel-by-channel filtering of a frame sequence.
///
/// Frames are expected to carry [`CHANNELS`] values (a validated recording).
pub fn filter_frames(frames: &[Frame], coeffs: &BiquadCoefficients) -> Vec<ChannelVector> {
    let mut filters: Vec<Biquad> = (0..CHANNELS).map(|_| Biquad::new(*coeffs)).collect();
    frames
        .iter()
        .map(|frame| {
            let mut out = [0.0; CHANNELS];
            for (c, (o, f)) in out.iter_mut().zip(filters.iter_mut()).enumerate() {
                *o = f.step(frame.channels[c]);
            }
            out
        })
        .collect()
}

/// Copies frame channels into fixed vectors without filtering.
pub fn unfiltered_frames(frames: &[Frame]) -> Vec<ChannelVector> {
    frames
        .iter()
        .map(|frame| {
            let mut out = [0.0; CHANNELS];
            out.copy_from_slice(&frame.channels[..CHANNELS]);
            out
        })
        .collect()
}

/// Per-channel mean over a baseline window.
pub fn baseline_mean(window: &[ChannelVector]) -> Result<ChannelVector, DspError> {
    if window.is_empty() {
        return Err(DspError::EmptyWindow);
    }
    let mut acc = [0.0; CHANNELS];
    for frame in window {
        for (a, v) in acc.iter_mut().zip(frame) {
            *a += v;
        }
    }
    let n = window.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}

/// Subtracts `baseline` from every lift frame.
pub fn differential_features(
    lift: &[ChannelVector],
    baseline: &ChannelVector,
) -> Vec<ChannelVector> {
    lift.iter()
        .map(|frame| differential(frame, baseline))
        .collect()
}

pub fn differential(frame: &ChannelVector, baseline: &ChannelVector) -> ChannelVector {
    let mut out = [0.0; CHANNELS];
    for ((o, v), b) in out.iter_mut().zip(frame).zip(baseline) {
        *o = v - b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coeffs() -> BiquadCoefficients {
        design_butterworth(0.3, 20.0).unwrap()
    }

    #[test]
    fn unit_dc_gain_and_stable() {
        let c = coeffs();
        assert!((c.dc_gain() - 1.0).abs() < 1e-9);
        assert!(c.is_stable());
        assert!((c.magnitude_at(0.0, 20.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_power_at_cutoff() {
        // prewarping places the -3 dB point exactly on the cutoff
        let m = coeffs().magnitude_at(0.3, 20.0);
        assert!((m - 1.0 / SQRT_2).abs() < 1e-9, "{m}");
    }

    #[test]
    fn strong_attenuation_at_5hz() {
        let db = 20.0 * coeffs().magnitude_at(5.0, 20.0).log10();
        // analog prototype gives 10*log10(1 + (5/0.3)^4) ~ 48.9 dB
        let analog = -10.0 * (1.0 + (5.0f64 / 0.3).powi(4)).log10();
        assert!(db <= -40.0, "{db}");
        assert!(
            db < analog,
            "bilinear warping only adds attenuation: {db} vs {analog}"
        );
    }

    #[test]
    fn invalid_cutoffs() {
        assert!(matches!(
            design_butterworth(10.0, 20.0),
            Err(DspError::InvalidCutoff { .. })
        ));
        assert!(design_butterworth(0.0, 20.0).is_err());
        assert!(design_butterworth(-1.0, 20.0).is_err());
    }

    #[test]
    fn constant_and_zero_signals_pass_through() {
        let c = coeffs();
        for y in filter_channel(&[1234.5; 500], &c) {
            assert!((y - 1234.5).abs() < 1e-9);
        }
        assert!(filter_channel(&[0.0; 50], &c).iter().all(|&y| y == 0.0));
        assert!(filter_channel(&[], &c).is_empty());
    }

    #[test]
    fn step_response_settles() {
        // reference: the difference equation written out with explicit
        // input/output history rather than the transposed state form
        let c = coeffs();
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { 1.0 }).collect();
        let mut y_ref = vec![0.0; n];
        for i in 0..n {
            let xm1 = if i >= 1 { x[i - 1] } else { 0.0 };
            let xm2 = if i >= 2 { x[i - 2] } else { 0.0 };
            let ym1 = if i >= 1 { y_ref[i - 1] } else { 0.0 };
            let ym2 = if i >= 2 { y_ref[i - 2] } else { 0.0 };
            y_ref[i] = c.b0 * x[i] + c.b1 * xm1 + c.b2 * xm2 - c.a1 * ym1 - c.a2 * ym2;
        }
        let y = filter_channel(&x, &c);
        for (a, b) in y.iter().zip(&y_ref) {
            assert!((a - b).abs() < 1e-12);
        }
        // The step error of a second-order Butterworth decays inside the
        // envelope sqrt(2) exp(-wc t / sqrt(2)); it drops below 1e-3 at
        // about 5.44 s, a few samples after 10 / wc = 5.31 s.
        let wc = 2.0 * PI * 0.3;
        let t_settle = (2f64.sqrt() / 1e-3).ln() * 2f64.sqrt() / wc;
        assert!(t_settle > 10.0 / wc && t_settle < 10.0 / wc + 0.2);
        let settle = (t_settle * 20.0).ceil() as usize + 1;
        for &v in &y[settle..] {
            assert!((v - 1.0).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn bounded_for_a_million_samples() {
        let c = coeffs();
        let mut f = Biquad::new(c);
        let mut peak: f64 = 0.0;
        for i in 0..1_000_000u64 {
            // full-scale square wave at 0.25 Hz plus alternating spikes
            let x = if (i / 40) % 2 == 0 { 70_000.0 } else { 0.0 };
            peak = peak.max(f.step(x).abs());
        }
        assert!(peak < 2.0 * 70_000.0, "{peak}");
    }

    #[test]
    fn baseline_mean_cases() {
        assert_eq!(baseline_mean(&[]), Err(DspError::EmptyWindow));
        let v = [3.0; CHANNELS];
        assert_eq!(baseline_mean(&[v, v, v]).unwrap(), v);
        let m = baseline_mean(&[[0.0; CHANNELS], [2.0; CHANNELS]]).unwrap();
        assert_eq!(m, [1.0; CHANNELS]);
    }

    #[test]
    fn baseline_mean_matches_naive_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let window: Vec<ChannelVector> = (0..100)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..70_000.0)))
            .collect();
        let m = baseline_mean(&window).unwrap();
        for c in 0..CHANNELS {
            let mut s = 0.0f64;
            for row in &window {
                s += row[c];
            }
            assert!(((s / 100.0) - m[c]).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn differential_identity_cases() {
        let v: ChannelVector = std::array::from_fn(|i| i as f64);
        assert_eq!(differential_features(&[v], &v), vec![[0.0; CHANNELS]]);
        assert_eq!(differential_features(&[v], &[0.0; CHANNELS]), vec![v]);
    }

    proptest! {
        #[test]
        fn filter_is_linear(
            xs in proptest::collection::vec(0.0f64..1000.0, 1..200),
            ys in proptest::collection::vec(0.0f64..1000.0, 200),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let c = coeffs();
            let ys = &ys[..xs.len()];
            let mix: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| a * x + b * y).collect();
            let fx = filter_channel(&xs, &c);
            let fy = filter_channel(ys, &c);
            let fm = filter_channel(&mix, &c);
            for i in 0..xs.len() {
                prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }

        #[test]
        fn differential_is_translation_invariant(
            base in proptest::collection::vec(0.0f64..5000.0, CHANNELS * 4),
            lift in proptest::collection::vec(0.0f64..5000.0, CHANNELS * 3),
            k in -1000.0f64..1000.0,
        ) {
            let rows = |v: &[f64]| -> Vec<ChannelVector> {
                v.chunks(CHANNELS).map(|c| std::array::from_fn(|i| c[i])).collect()
            };
            let shift = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x + k).collect() };
            let d0 = differential_features(&rows(&lift), &baseline_mean(&rows(&base)).unwrap());
            let d1 = differential_features(
                &rows(&shift(&lift)),
                &baseline_mean(&rows(&shift(&base))).unwrap(),
            );
            for (r0, r1) in d0.iter().zip(&d1) {
                for (a, b) in r0.iter().zip(r1) {
                    prop_assert!((a - b).abs() < 1e-8);
                }
            }
        }
    }
}
