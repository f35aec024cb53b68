//! Heterodyne detection and digital down-conversion.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::trace::{TimeTrace, TraceKind};
use crate::error::{CeoError, Result};
use crate::model::TWO_PI;

/// Minimum ratio of sample rate to intermediate frequency.
const MIN_SAMPLES_PER_IF: f64 = 10.0;

/// Detector and down-conversion settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Intermediate frequency, rad/s.
    pub if_freq: f64,
    /// Samples per second.
    pub sample_rate: f64,
    pub gain: f64,
    /// Additive Gaussian noise on the detector current.
    pub noise_std: f64,
    pub seed: u64,
    /// Down-conversion averaging window, s.
    pub window: f64,
    pub n_repeats: usize,
}

impl Default for Detection {
    fn default() -> Self {
        Detection {
            if_freq: TWO_PI * 40e6,
            sample_rate: 1e9,
            gain: 1.0,
            noise_std: 0.0,
            seed: 0,
            window: 100e-9,
            n_repeats: 1,
        }
    }
}

/// Detector noise giving `snr_db` for a tone of envelope amplitude `amplitude`.
pub fn noise_std_for_snr(gain: f64, amplitude: f64, snr_db: f64) -> f64 {
    gain * amplitude / std::f64::consts::SQRT_2 * 10f64.powf(-snr_db / 20.0)
}

/// Detector current `I(t) = gain Re[a_out(t) e^{-i w_IF t}] + noise`, resampled
/// onto the detector clock.
pub fn heterodyne_signal(
    envelope: &TimeTrace,
    if_freq: f64,
    sample_rate: f64,
    gain: f64,
    noise_std: f64,
    seed: u64,
) -> Result<TimeTrace> {
    envelope.expect_complex()?;
    if !(if_freq > 0.0) || !(sample_rate > 0.0) {
        return Err(CeoError::Config("IF frequency and sample rate must be > 0".into()));
    }
    if sample_rate < MIN_SAMPLES_PER_IF * if_freq / TWO_PI {
        return Err(CeoError::Config(format!(
            "sample rate {sample_rate:e} S/s is below {MIN_SAMPLES_PER_IF} x IF ({:e} Hz)",
            if_freq / TWO_PI
        )));
    }
    if !(noise_std >= 0.0) {
        return Err(CeoError::Config(format!("noise_std must be >= 0 (got {noise_std})")));
    }
    let dt = 1.0 / sample_rate;
    let span = envelope.t(envelope.len() - 1) - envelope.t0;
    let n = (span / dt).floor() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| CeoError::Config(format!("noise distribution: {e}")))?;
    let mut v = Vec::with_capacity(n);
    for k in 0..n {
        let t = envelope.t0 + k as f64 * dt;
        let a = envelope.interp_complex(t)?;
        let clean = gain * (a * Complex64::from_polar(1.0, -if_freq * t)).re;
        let noise = if noise_std > 0.0 { rng.sample(normal) } else { 0.0 };
        v.push(clean + noise);
    }
    TimeTrace::real(envelope.t0, dt, v, TraceKind::DetectorCurrent)
}

/// Averaged RF power `P(t) = 2 |<I e^{+i w_IF t}>_window|^2`, averaged over `traces`.
/// Output samples sit at window centres ("valid" convolution).
pub fn digital_downconvert(traces: &[TimeTrace], if_freq: f64, window: f64) -> Result<TimeTrace> {
    let first = traces
        .first()
        .ok_or_else(|| CeoError::Config("no traces to down-convert".into()))?;
    if !(if_freq > 0.0) {
        return Err(CeoError::Config("IF frequency must be > 0".into()));
    }
    let period = TWO_PI / if_freq;
    if !(window >= period) {
        return Err(CeoError::Config(format!(
            "window {window:e} s is shorter than one IF period ({period:e} s)"
        )));
    }
    let dt = first.dt;
    let len = first.len();
    for tr in traces {
        tr.expect_real()?;
        if tr.len() != len || (tr.dt - dt).abs() > 1e-12 * dt || (tr.t0 - first.t0).abs() > 1e-12 * dt.max(1.0) {
            return Err(CeoError::Config("repeated traces must share one time grid".into()));
        }
    }
    let w = (window / dt).round() as usize;
    if w == 0 || w > len {
        return Err(CeoError::Config(format!(
            "window of {w} samples does not fit a trace of {len} samples"
        )));
    }
    let out_len = len - w + 1;
    let mut power = vec![0.0; out_len];
    let mut prefix = vec![Complex64::new(0.0, 0.0); len + 1];
    for tr in traces {
        let v = tr.as_real().unwrap_or_default();
        for k in 0..len {
            let t = tr.t(k);
            prefix[k + 1] = prefix[k] + v[k] * Complex64::from_polar(1.0, if_freq * t);
        }
        for (k, p) in power.iter_mut().enumerate() {
            let y = (prefix[k + w] - prefix[k]) / w as f64;
            *p += 2.0 * y.norm_sqr();
        }
    }
    let n = traces.len() as f64;
    power.iter_mut().for_each(|p| *p /= n);
    let t0 = first.t0 + 0.5 * (w - 1) as f64 * dt;
    TimeTrace::real(t0, dt, power, TraceKind::Power)
}

/// `R(t) = P(t) / mean(P over baseline window)`.
pub fn temporal_normalized_reflection(power: &TimeTrace, baseline: (f64, f64)) -> Result<TimeTrace> {
    let v = power.expect_real()?;
    let b = power.window_mean(baseline.0, baseline.1)?;
    if !(b > 0.0) {
        return Err(CeoError::ZeroReference {
            probe: "baseline".into(),
            omega: 0.0,
        });
    }
    let r = v.iter().map(|p| p / b).collect();
    TimeTrace::real(power.t0, power.dt, r, TraceKind::Reflection)
}

/// Heterodyne + down-conversion of an output envelope with `det.n_repeats`
/// independently seeded detector traces.
pub fn measure_power(envelope: &TimeTrace, det: &Detection) -> Result<TimeTrace> {
    let repeats = det.n_repeats.max(1);
    let traces = (0..repeats)
        .map(|r| {
            heterodyne_signal(
                envelope,
                det.if_freq,
                det.sample_rate,
                det.gain,
                det.noise_std,
                det.seed.wrapping_add(r as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    digital_downconvert(&traces, det.if_freq, det.window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(amplitude: f64, n: usize) -> TimeTrace {
        TimeTrace::complex(0.0, 1e-9, vec![Complex64::new(amplitude, 0.0); n], TraceKind::ComplexEnvelope).unwrap()
    }

    #[test]
    fn pure_tone_recovers_half_square_amplitude() {
        let det = Detection::default();
        let a = 0.7;
        let i = heterodyne_signal(&tone(a, 2000), det.if_freq, det.sample_rate, 1.0, 0.0, 0).unwrap();
        let peak = i.as_real().unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((peak - a).abs() < 1e-9);
        let p = digital_downconvert(&[i], det.if_freq, 250e-9).unwrap();
        for v in p.as_real().unwrap() {
            assert!((v / (a * a / 2.0) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_input_gives_zero_power() {
        let det = Detection::default();
        let i = heterodyne_signal(&tone(0.0, 500), det.if_freq, det.sample_rate, 1.0, 0.0, 0).unwrap();
        let p = digital_downconvert(&[i], det.if_freq, 100e-9).unwrap();
        assert!(p.as_real().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sampling_and_window_violations() {
        let det = Detection::default();
        assert!(matches!(
            heterodyne_signal(&tone(1.0, 10), det.if_freq, 3e8, 1.0, 0.0, 0),
            Err(CeoError::Config(_))
        ));
        let i = heterodyne_signal(&tone(1.0, 500), det.if_freq, det.sample_rate, 1.0, 0.0, 0).unwrap();
        assert!(matches!(digital_downconvert(&[i], det.if_freq, 20e-9), Err(CeoError::Config(_))));
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let det = Detection::default();
        let a = heterodyne_signal(&tone(1.0, 300), det.if_freq, det.sample_rate, 1.0, 0.1, 42).unwrap();
        let b = heterodyne_signal(&tone(1.0, 300), det.if_freq, det.sample_rate, 1.0, 0.1, 42).unwrap();
        let c = heterodyne_signal(&tone(1.0, 300), det.if_freq, det.sample_rate, 1.0, 0.1, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn baseline_normalization() {
        let p = TimeTrace::real(0.0, 1.0, vec![2.0, 2.0, 4.0, 1.0], TraceKind::Power).unwrap();
        let r = temporal_normalized_reflection(&p, (0.0, 1.0)).unwrap();
        assert_eq!(r.as_real().unwrap(), &[1.0, 1.0, 2.0, 0.5]);
        let z = TimeTrace::real(0.0, 1.0, vec![0.0, 0.0, 1.0], TraceKind::Power).unwrap();
        assert!(temporal_normalized_reflection(&z, (0.0, 1.0)).is_err());
    }
}
