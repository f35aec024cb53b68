//! End-to-end pulse experiments and their quasi-static reference.

use rayon::prelude::*;

use super::detection::{measure_power, temporal_normalized_reflection, Detection};
use super::propagate::{propagate_timeline, PropagateOptions, ProbeTone, Propagation, Timeline};
use super::trace::{TimeTrace, TraceKind};
use crate::error::{CeoError, Result};
use crate::freq_response::matrix::effective_chi_unchecked;
use crate::freq_response::reflection;
use crate::model::{validate_config, ModeLabel, SystemConfig};

/// Normalized reflection predicted by the stationary model at each sample of `g(t)`.
pub fn quasi_static_reflection(cfg: &SystemConfig, coupling: &TimeTrace, omega: f64, probe: ModeLabel) -> Result<TimeTrace> {
    validate_config(cfg).into_result()?;
    let g = coupling.expect_real()?;
    let m = cfg.mode(probe);
    let s_off = reflection(effective_chi_unchecked(cfg, 0.0, omega, probe)?, m.kappa_total, m.kappa_ext);
    if s_off.norm() < 1e-12 {
        return Err(CeoError::ZeroReference {
            probe: probe.name().into(),
            omega,
        });
    }
    let r = g
        .par_iter()
        .map(|&gk| {
            let s = reflection(effective_chi_unchecked(cfg, gk, omega, probe)?, m.kappa_total, m.kappa_ext);
            Ok((s / s_off).norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?;
    TimeTrace::real(coupling.t0, coupling.dt, r, TraceKind::Reflection)
}

/// Noise-free `R(t) = |a_out(t)|^2 / <|a_out|^2>_baseline` from a propagation.
pub fn envelope_reflection(prop: &Propagation, baseline: (f64, f64)) -> Result<TimeTrace> {
    let out = prop.output_envelope()?;
    let p: Vec<f64> = out.expect_complex()?.iter().map(|z| z.norm_sqr()).collect();
    let power = TimeTrace::real(out.t0, out.dt, p, TraceKind::Power)?;
    temporal_normalized_reflection(&power, baseline)
}

/// Propagate, detect, down-convert and normalize one probe tone.
pub fn measured_reflection(
    timeline: &Timeline,
    probe: ProbeTone,
    det: &Detection,
    baseline: (f64, f64),
) -> Result<TimeTrace> {
    let prop = propagate_timeline(timeline, probe, PropagateOptions::default())?;
    let env = prop.output_envelope()?;
    let power = measure_power(&env, det)?;
    temporal_normalized_reflection(&power, baseline)
}

/// `R(omega_k, t)` for every probe detuning, noise free; rows follow `omegas`.
pub fn reflection_map(
    timeline: &Timeline,
    probe: ModeLabel,
    omegas: &[f64],
    baseline: (f64, f64),
) -> Result<Vec<TimeTrace>> {
    omegas
        .par_iter()
        .enumerate()
        .map(|(index, &w)| {
            propagate_timeline(timeline, ProbeTone::new(probe, w), PropagateOptions::default())
                .and_then(|p| envelope_reflection(&p, baseline))
                .map_err(|e| CeoError::AtGridPoint {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hz, Configuration, ModeSpec};
    use crate::time_domain::pulse::{coupling_trace, power_for_cooperativity, pump_loading, PulseShape, PulseSpec};
    use crate::time_domain::trace::TimeGrid;

    #[test]
    fn stokes_probe_dip_recovers_after_pulse() {
        let optical = ModeSpec::from_hz(ModeLabel::Stokes, 26e6, 10e6, 0.0).unwrap();
        let mw = ModeSpec::from_hz(ModeLabel::Microwave, 10e6, 4e6, 0.0).unwrap();
        let cfg = SystemConfig::uniform(Configuration::StokesCase, optical, hz(7.6e6), mw, hz(30.0), hz(26e6) * 10.0);
        let power = power_for_cooperativity(&cfg, 0.2, 1550e-9).unwrap();
        let pulse = PulseSpec::new(1e-6, power, 30e-9, PulseShape::SmoothedRectangular, 100e-9).unwrap();
        let grid = TimeGrid::span(0.0, 1.5e-6, 2.5e-10).unwrap();
        let g = coupling_trace(&cfg, &pump_loading(&cfg, &pulse, &grid).unwrap()).unwrap();
        let tl = Timeline::new(cfg.clone(), g.clone()).unwrap();
        let prop = propagate_timeline(&tl, ProbeTone::new(ModeLabel::Stokes, 0.0), PropagateOptions::default()).unwrap();
        let r = envelope_reflection(&prop, (0.0, 90e-9)).unwrap();
        let qs = quasi_static_reflection(&cfg, &g, 0.0, ModeLabel::Stokes).unwrap();
        let mid = 600e-9;
        assert!(r.interp_real(mid).unwrap() < 0.1);
        assert!((r.interp_real(mid).unwrap() - qs.interp_real(mid).unwrap()).abs() < 0.01);
        // recovery is limited by the slower (microwave) amplitude decay
        let v = r.as_real().unwrap();
        let k_end = ((pulse.t_end() - r.t0) / r.dt).ceil() as usize;
        assert!(v[k_end..].windows(2).all(|w| w[1] >= w[0] - 1e-9));
        let k_rec = ((pulse.t_end() + 10.0 / cfg.microwave.kappa_total - r.t0) / r.dt) as usize;
        assert!(v[k_rec..].iter().all(|x| (x - 1.0).abs() < 0.01));
    }
}
