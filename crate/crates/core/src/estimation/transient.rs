//! Time-sliced cooperativity and microwave detuning extraction.

use serde::{Deserialize, Serialize};

use super::joint::{c_grid, optical_model, spectrum_cost};
use super::lm::{FitProblem, FitResult, FitStatus, ParamSpec};
use super::{r_values, solve, FitOptions};
use crate::error::{CeoError, Result};
use crate::freq_response::Spectrum;
use crate::model::{validate_config, ModeLabel, SystemConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientFit {
    pub times: Vec<f64>,
    pub cooperativity: Vec<f64>,
    pub cooperativity_ci: Vec<f64>,
    /// Microwave frequency offset `delta = Omega_e - FSR`, rad/s; enters the
    /// model as a microwave detuning of `-delta`.
    pub delta: Vec<f64>,
    pub delta_ci: Vec<f64>,
    pub status: Vec<Option<FitStatus>>,
    /// Slices whose fit failed or did not converge.
    pub flagged: Vec<bool>,
}

fn with_delta(base: &SystemConfig, delta: f64) -> SystemConfig {
    let mut cfg = base.clone();
    cfg.microwave.detuning = base.microwave.detuning - delta;
    cfg
}

fn fit_slice(
    spectrum: &Spectrum,
    r: &[f64],
    base: &SystemConfig,
    probe: ModeLabel,
    start: (f64, f64),
    offset: usize,
    options: &FitOptions,
) -> Result<FitResult> {
    let scale = base.microwave.kappa_total;
    let params = vec![
        ParamSpec::new("c", start.0, 0.0, f64::INFINITY).with_scale(0.1),
        ParamSpec::unbounded("delta", start.1).with_scale(scale),
    ];
    solve(options, r, offset, |w| {
        FitProblem::new(params.clone(), move |p: &[f64]| {
            let cfg = with_delta(base, p[1]);
            spectrum
                .frequencies
                .iter()
                .zip(r)
                .enumerate()
                .map(|(k, (&x, &y))| Ok(w.residual(offset + k, y, optical_model(&cfg, p[0], probe, x)?)))
                .collect()
        })
    })
}

/// Fits `(C, delta)` slice by slice, warm-starting from the previous slice.
/// Static parameters come from `stationary`. A failed slice is flagged and
/// reported as NaN; the sweep continues.
pub fn transient_fit(
    slices: &[(f64, Spectrum)],
    stationary: &SystemConfig,
    probe: ModeLabel,
    options: &FitOptions,
) -> Result<TransientFit> {
    if slices.is_empty() {
        return Err(CeoError::Fit("no time slices".into()));
    }
    if !matches!(probe, ModeLabel::Stokes | ModeLabel::AntiStokes) {
        return Err(CeoError::Fit(format!("transient fit needs an optical probe (got {probe})")));
    }
    validate_config(stationary).into_result()?;
    let data: Vec<Vec<f64>> = slices.iter().map(|(_, s)| r_values(s)).collect::<Result<_>>()?;
    options.weighting.check(data.iter().map(Vec::len).sum())?;
    let grid = c_grid();
    let n = slices.len();
    let mut out = TransientFit {
        times: slices.iter().map(|s| s.0).collect(),
        cooperativity: vec![f64::NAN; n],
        cooperativity_ci: vec![f64::NAN; n],
        delta: vec![f64::NAN; n],
        delta_ci: vec![f64::NAN; n],
        status: vec![None; n],
        flagged: vec![true; n],
    };
    let mut warm: Option<(f64, f64)> = None;
    let mut offset = 0;
    for (i, ((_, s), r)) in slices.iter().zip(&data).enumerate() {
        let c_start = grid
            .iter()
            .map(|&c| (c, spectrum_cost(stationary, c, probe, s, r)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|v| v.0)
            .unwrap_or(0.0);
        let mut starts = vec![(c_start, 0.0)];
        if let Some(w) = warm {
            starts.insert(0, w);
        }
        let best = starts
            .into_iter()
            .filter_map(|st| fit_slice(s, r, stationary, probe, st, offset, options).ok())
            .min_by(|a, b| a.cost.total_cmp(&b.cost));
        offset += r.len();
        match best {
            Some(f) => {
                out.cooperativity[i] = f.estimates[0];
                out.delta[i] = f.estimates[1];
                out.cooperativity_ci[i] = f.ci_half_widths[0];
                out.delta_ci[i] = f.ci_half_widths[1];
                out.flagged[i] = f.status != FitStatus::Converged;
                out.status[i] = Some(f.status);
                warm = if f.status == FitStatus::Converged {
                    Some((f.estimates[0], f.estimates[1]))
                } else {
                    Some((f.estimates[0], 0.0))
                };
            }
            None => warm = None,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_response::linear_grid;
    use crate::model::{hz, Configuration, ModeSpec};

    fn template() -> SystemConfig {
        let optical = ModeSpec::from_hz(ModeLabel::Stokes, 26e6, 10e6, 0.0).unwrap();
        let mw = ModeSpec::from_hz(ModeLabel::Microwave, 10e6, 4e6, 0.0).unwrap();
        SystemConfig::uniform(Configuration::StokesCase, optical, hz(7.6e6), mw, hz(30.0), hz(26e6) * 1e3)
    }

    #[test]
    fn recovers_cooperativity_and_offset_per_slice() {
        let cfg = template();
        let w = linear_grid(hz(-60e6), hz(60e6), 81);
        let truth = [(0.0, 0.0), (0.1, hz(0.5e6)), (0.3, hz(1e6)), (0.3, 0.0)];
        let slices: Vec<(f64, Spectrum)> = truth
            .iter()
            .enumerate()
            .map(|(k, &(c, d))| {
                let m = with_delta(&cfg, d);
                let r = w.iter().map(|&x| optical_model(&m, c, ModeLabel::Stokes, x).unwrap()).collect();
                (k as f64 * 1e-7, Spectrum::from_r(w.clone(), r).unwrap())
            })
            .collect();
        let f = transient_fit(&slices, &cfg, ModeLabel::Stokes, &FitOptions::default()).unwrap();
        assert!(f.cooperativity[0].abs() < 1e-6);
        for k in 1..truth.len() {
            assert!((f.cooperativity[k] - truth[k].0).abs() < 1e-6);
            assert!((f.delta[k] - truth[k].1).abs() < hz(1e3));
            assert!(!f.flagged[k]);
        }
    }
}
