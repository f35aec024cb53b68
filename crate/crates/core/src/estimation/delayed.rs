//! Bounce time and exponential recovery of the post-pulse microwave response.

use serde::{Deserialize, Serialize};

use super::lm::{least_squares, FitProblem, FitResult, ParamSpec};
use super::LmOptions;
use crate::error::{CeoError, Result};
use crate::time_domain::TimeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayedOptions {
    /// Moving-average window for bounce detection, s.
    pub smoothing: f64,
    /// Time after the pulse end excluded from the bounce search, s.
    pub guard: f64,
    /// Deviations `|R - 1|` below this count as flat.
    pub flat_threshold: f64,
    pub lm: LmOptions,
}

impl Default for DelayedOptions {
    fn default() -> Self {
        DelayedOptions {
            smoothing: 100e-9,
            guard: 0.5e-6,
            flat_threshold: 1e-3,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BounceStatus {
    /// Interior extremum found; `t_ex` and `tau_ex` are defined.
    Bounce,
    /// Monotone recovery; only `tau_ex` is defined.
    NoBounce,
    /// No departure from unity.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedFit {
    pub status: BounceStatus,
    /// Bounce delay after the pulse end, s.
    pub t_ex: Option<f64>,
    /// Recovery time constant, s.
    pub tau_ex: Option<f64>,
    pub tau_ex_ci: Option<f64>,
    /// Amplitude `A` of `A exp(-(t - t_b)/tau) + 1`.
    pub amplitude: Option<f64>,
    pub result: Option<FitResult>,
    pub warnings: Vec<String>,
}

/// Centered moving average; the window shrinks at the edges.
pub(crate) fn moving_average(v: &[f64], half: usize) -> Vec<f64> {
    let mut prefix = vec![0.0; v.len() + 1];
    for (k, x) in v.iter().enumerate() {
        prefix[k + 1] = prefix[k] + x;
    }
    (0..v.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(v.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Index of the strongest 5-point local extremum of `s - 1` in `range`.
fn strongest_extremum(s: &[f64], range: std::ops::Range<usize>) -> Option<usize> {
    range
        .filter(|&k| k >= 2 && k + 2 < s.len())
        .filter(|&k| {
            let c = s[k];
            let nb = [s[k - 2], s[k - 1], s[k + 1], s[k + 2]];
            nb.iter().all(|&x| c > x) || nb.iter().all(|&x| c < x)
        })
        .max_by(|&a, &b| (s[a] - 1.0).abs().total_cmp(&(s[b] - 1.0).abs()))
}

/// Fits `A exp(-(t - t_b)/tau) + 1` to samples `k_b..`.
fn fit_recovery(t: &[f64], v: &[f64], t_b: f64, opts: &LmOptions) -> Result<FitResult> {
    let a0 = v[0] - 1.0;
    let target = a0 / std::f64::consts::E;
    let tau0 = t
        .iter()
        .zip(v)
        .find(|(_, &y)| (y - 1.0).abs() <= target.abs())
        .map(|(&ti, _)| ti - t_b)
        .filter(|x| *x > 0.0)
        .unwrap_or((t[t.len() - 1] - t_b) / 5.0);
    let params = vec![
        ParamSpec::unbounded("amplitude", a0).with_scale(a0.abs().max(1e-6)),
        ParamSpec::new("tau", tau0, 1e-3 * tau0, f64::INFINITY).with_scale(tau0),
    ];
    let problem = FitProblem::new(params, |p: &[f64]| {
        Ok(t.iter().zip(v).map(|(&ti, &y)| y - 1.0 - p[0] * (-(ti - t_b) / p[1]).exp()).collect())
    })?;
    least_squares(&problem, opts)
}

/// Locates the bounce after `t_pulse_end` and fits the recovery that follows it.
pub fn delayed_backaction_fit(trace: &TimeTrace, t_pulse_end: f64, options: &DelayedOptions) -> Result<DelayedFit> {
    let v = trace.expect_real()?;
    if !(options.smoothing >= 0.0) || !(options.guard >= 0.0) {
        return Err(CeoError::Fit("smoothing and guard must be >= 0".into()));
    }
    let t = trace.times();
    let start = t.partition_point(|&x| x < t_pulse_end + options.guard);
    if v.len().saturating_sub(start) < 10 {
        return Err(CeoError::Fit("fewer than 10 samples after the pulse".into()));
    }
    let half = ((options.smoothing / trace.dt) / 2.0).round() as usize;
    let s = moving_average(v, half);
    let max_dev = s[start..].iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs()));
    let mut warnings = Vec::new();
    if max_dev < options.flat_threshold {
        return Ok(DelayedFit {
            status: BounceStatus::Flat,
            t_ex: None,
            tau_ex: None,
            tau_ex_ci: None,
            amplitude: None,
            result: None,
            warnings,
        });
    }
    let bounce = strongest_extremum(&s, start..v.len())
        .filter(|&k| (s[k] - 1.0).abs() >= options.flat_threshold && (s[k] - 1.0).abs() >= 0.5 * max_dev);
    let (status, k_b) = match bounce {
        Some(k) => (BounceStatus::Bounce, k),
        None => (BounceStatus::NoBounce, start),
    };
    let t_b = t[k_b];
    let result = fit_recovery(&t[k_b..], &v[k_b..], t_b, &options.lm)?;
    let tau = result.estimates[1];
    if t[t.len() - 1] - t_b < 5.0 * tau {
        warnings.push(format!(
            "trace covers {:.2} recovery times after the bounce; 5 are needed for a reliable tau",
            (t[t.len() - 1] - t_b) / tau
        ));
    }
    Ok(DelayedFit {
        status,
        t_ex: (status == BounceStatus::Bounce).then_some(t_b - t_pulse_end),
        tau_ex: Some(tau),
        tau_ex_ci: Some(result.ci_half_widths[1]),
        amplitude: Some(result.estimates[0]),
        result: Some(result),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time_domain::TraceKind;

    fn trace(f: impl Fn(f64) -> f64) -> TimeTrace {
        let dt = 2e-9;
        let v = (0..10_000).map(|k| f(k as f64 * dt)).collect();
        TimeTrace::real(0.0, dt, v, TraceKind::Reflection).unwrap()
    }

    #[test]
    fn moving_average_of_constant() {
        assert_eq!(moving_average(&[2.0; 7], 2), vec![2.0; 7]);
        assert_eq!(moving_average(&[0.0, 3.0, 0.0], 1), vec![1.5, 1.0, 1.5]);
    }

    #[test]
    fn bounce_then_exponential() {
        let (end, t_ex, tau) = (1e-6, 4e-6, 2e-6);
        let tr = trace(|t| {
            let tb = end + t_ex;
            if t < end {
                1.0
            } else if t < tb {
                1.0 - 0.2 * (std::f64::consts::FRAC_PI_2 * (t - end) / t_ex).sin().powi(2)
            } else {
                1.0 - 0.2 * (-(t - tb) / tau).exp()
            }
        });
        let f = delayed_backaction_fit(&tr, end, &DelayedOptions::default()).unwrap();
        assert_eq!(f.status, BounceStatus::Bounce);
        assert!((f.t_ex.unwrap() / t_ex - 1.0).abs() < 0.02);
        assert!((f.tau_ex.unwrap() / tau - 1.0).abs() < 0.02);
    }

    #[test]
    fn flat_and_monotone() {
        let f = delayed_backaction_fit(&trace(|_| 1.0), 1e-6, &DelayedOptions::default()).unwrap();
        assert_eq!(f.status, BounceStatus::Flat);
        assert!(f.t_ex.is_none() && f.tau_ex.is_none());
        let tau = 3e-6;
        let tr = trace(|t| if t < 1e-6 { 1.0 } else { 1.0 + 0.3 * (-(t - 1e-6) / tau).exp() });
        let f = delayed_backaction_fit(&tr, 1e-6, &DelayedOptions::default()).unwrap();
        assert_eq!(f.status, BounceStatus::NoBounce);
        assert!(f.t_ex.is_none());
        assert!((f.tau_ex.unwrap() / tau - 1.0).abs() < 1e-4);
    }
}
