//! Shared-parameter fits over pump-power sweeps.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{FitProblem, FitResult, ParamSpec};
use super::{propagate_variance, r_values, solve, FitOptions};
use crate::error::{CeoError, Result};
use crate::freq_response::{closed_form_chi_o, reflection, ResponseParams, Spectrum};
use crate::model::{validate_config, ModeLabel, SystemConfig};

/// Normalized microwave reflection of a mode whose frequency and linewidth are
/// shifted by `(d_omega, d_kappa)`; the off state is the unshifted mode.
pub fn microwave_shift_model(kappa: f64, kappa_ext: f64, d_omega: f64, d_kappa: f64, omega: f64) -> Result<f64> {
    let off = 1.0 - kappa_ext / Complex64::new(0.5 * kappa, -omega);
    if off.norm() < 1e-12 {
        return Err(CeoError::ZeroReference {
            probe: ModeLabel::Microwave.name().into(),
            omega,
        });
    }
    let on = 1.0 - kappa_ext / Complex64::new(0.5 * (kappa + d_kappa), -(omega - d_omega));
    Ok((on / off).norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub delta_omega: f64,
    pub delta_kappa: f64,
    pub delta_omega_ci: f64,
    pub delta_kappa_ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrowaveJointFit {
    pub kappa_e: f64,
    pub kappa_e_ext: f64,
    pub kappa_e_ci: f64,
    pub kappa_e_ext_ci: f64,
    pub shifts: Vec<ShiftEstimate>,
    pub result: FitResult,
}

/// Starting `d_kappa` from the on-resonance value, assuming no frequency shift.
fn initial_width_change(kappa: f64, kappa_ext: f64, spectrum: &Spectrum, r: &[f64]) -> f64 {
    let k = spectrum
        .frequencies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let reference = (1.0 - 2.0 * kappa_ext / kappa).abs();
    let amp = r[k].max(0.0).sqrt() * reference;
    // The on-resonance value fixes |S| only; the branch and a coarse width scan
    // are ranked against the whole spectrum.
    let misfit = |d: f64| -> f64 {
        spectrum
            .frequencies
            .iter()
            .zip(r)
            .map(|(&x, &y)| microwave_shift_model(kappa, kappa_ext, 0.0, d, x).map_or(f64::INFINITY, |m| ((m - y) / m).powi(2)))
            .sum()
    };
    let scan = (0..=80).map(|k| kappa * (0.02 * 200f64.powf(k as f64 / 80.0) - 1.0));
    [amp, -amp]
        .iter()
        .filter(|s| **s < 1.0)
        .map(|s| 2.0 * kappa_ext / (1.0 - s) - kappa)
        .chain(scan)
        .filter(|d| kappa + d > 0.0)
        .min_by(|a, b| misfit(*a).total_cmp(&misfit(*b)))
        .unwrap_or(0.0)
}

/// Joint fit of normalized microwave spectra: shared `(kappa_e, kappa_e_ext)`
/// starting from `initial`, one `(d_omega, d_kappa)` pair per spectrum.
pub fn joint_stationary_microwave_fit(
    spectra: &[Spectrum],
    initial: (f64, f64),
    options: &FitOptions,
) -> Result<MicrowaveJointFit> {
    if spectra.len() < 2 {
        return Err(CeoError::Fit("joint fit needs at least two spectra".into()));
    }
    let (k0, kx0) = initial;
    if !(k0 > 0.0) || !(kx0 > 0.0) || kx0 > k0 {
        return Err(CeoError::Fit("initial microwave rates need 0 < kappa_ext <= kappa".into()));
    }
    let data: Vec<Vec<f64>> = spectra.iter().map(r_values).collect::<Result<_>>()?;
    let n_points: usize = data.iter().map(Vec::len).sum();
    options.weighting.check(n_points)?;
    let mut params = vec![
        ParamSpec::new("kappa_e", k0, 1e-3 * k0, f64::INFINITY).with_scale(k0).shared(),
        ParamSpec::new("kappa_e_ext", kx0, 1e-3 * kx0, f64::INFINITY).with_scale(kx0).shared(),
    ];
    for (i, (s, r)) in spectra.iter().zip(&data).enumerate() {
        let dk = initial_width_change(k0, kx0, s, r);
        params.push(ParamSpec::unbounded(format!("d_omega_{i}"), 0.0).with_scale(k0));
        params.push(ParamSpec::new(format!("d_kappa_{i}"), dk, -k0, f64::INFINITY).with_scale(k0));
    }
    let flat: Vec<f64> = data.concat();
    let data = &data;
    let result = solve(options, &flat, 0, |w| {
        FitProblem::new(params.clone(), move |p: &[f64]| {
            let (kappa, kx) = (p[0], p[1]);
            if kx >= kappa {
                return Err(CeoError::Fit("kappa_ext >= kappa".into()));
            }
            let mut out = Vec::with_capacity(n_points);
            for (i, (s, r)) in spectra.iter().zip(data).enumerate() {
                let (dw, dk) = (p[2 + 2 * i], p[3 + 2 * i]);
                if kappa + dk <= 0.0 {
                    return Err(CeoError::Fit("shifted linewidth is not positive".into()));
                }
                for (&x, &y) in s.frequencies.iter().zip(r) {
                    let m = microwave_shift_model(kappa, kx, dw, dk, x)?;
                    out.push(w.residual(out.len(), y, m));
                }
            }
            Ok(out)
        })
    })?;
    let shifts = (0..spectra.len())
        .map(|i| ShiftEstimate {
            delta_omega: result.estimates[2 + 2 * i],
            delta_kappa: result.estimates[3 + 2 * i],
            delta_omega_ci: result.ci_half_widths[2 + 2 * i],
            delta_kappa_ci: result.ci_half_widths[3 + 2 * i],
        })
        .collect();
    Ok(MicrowaveJointFit {
        kappa_e: result.estimates[0],
        kappa_e_ext: result.estimates[1],
        kappa_e_ci: result.ci_half_widths[0],
        kappa_e_ext_ci: result.ci_half_widths[1],
        shifts,
        result,
    })
}

/// Normalized optical reflection from the closed-form effective susceptibility.
pub fn optical_model(cfg: &SystemConfig, c: f64, probe: ModeLabel, omega: f64) -> Result<f64> {
    let mode = cfg.mode(probe);
    let on = ResponseParams::from_config(cfg, cfg.g_for_cooperativity(c));
    let off = ResponseParams { g: 0.0, ..on };
    let s_on = reflection(closed_form_chi_o(cfg.configuration, probe, &on, omega)?, mode.kappa_total, mode.kappa_ext);
    let s_off = reflection(closed_form_chi_o(cfg.configuration, probe, &off, omega)?, mode.kappa_total, mode.kappa_ext);
    if s_off.norm() < 1e-12 {
        return Err(CeoError::ZeroReference {
            probe: probe.name().into(),
            omega,
        });
    }
    Ok((s_on / s_off).norm_sqr())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalJointOptions {
    pub probe: ModeLabel,
    /// Optical TE modes whose detuning is fitted; defaults to the probe alone.
    pub free_detunings: Vec<ModeLabel>,
    /// Pump powers per spectrum; when given, starting cooperativities are linear in power.
    pub powers: Option<Vec<f64>>,
    pub fit: FitOptions,
}

impl OpticalJointOptions {
    pub fn new(probe: ModeLabel) -> Self {
        OpticalJointOptions {
            probe,
            free_detunings: vec![probe],
            powers: None,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalJointFit {
    pub kappa_o: f64,
    pub kappa_o_ext: f64,
    pub detunings: Vec<(ModeLabel, f64)>,
    pub cooperativities: Vec<f64>,
    pub cooperativity_ci: Vec<f64>,
    /// Template with the fitted optical parameters applied.
    pub config: SystemConfig,
    pub result: FitResult,
}

fn apply_optical(template: &SystemConfig, kappa: f64, kappa_ext: f64, detunings: &[(ModeLabel, f64)]) -> SystemConfig {
    let mut cfg = template.clone();
    for label in [ModeLabel::Stokes, ModeLabel::AntiStokes] {
        let m = cfg.mode_mut(label);
        m.kappa_total = kappa;
        m.kappa_ext = kappa_ext;
    }
    for &(label, d) in detunings {
        cfg.mode_mut(label).detuning = d;
    }
    cfg
}

pub(crate) fn spectrum_cost(cfg: &SystemConfig, c: f64, probe: ModeLabel, s: &Spectrum, r: &[f64]) -> f64 {
    s.frequencies
        .iter()
        .zip(r)
        .map(|(&x, &y)| optical_model(cfg, c, probe, x).map_or(f64::INFINITY, |m| (y - m).powi(2)))
        .sum()
}

/// Coarse cooperativity grid used for starting points.
pub(crate) fn c_grid() -> Vec<f64> {
    (0..=120).map(|k| 0.0125 * k as f64).collect()
}

/// Joint fit of normalized optical spectra: shared optical rates and detunings,
/// one cooperativity per spectrum. Other parameters come from `template`.
pub fn joint_stationary_optical_fit(
    spectra: &[Spectrum],
    template: &SystemConfig,
    options: &OpticalJointOptions,
) -> Result<OpticalJointFit> {
    if spectra.len() < 2 {
        return Err(CeoError::Fit("joint fit needs at least two spectra".into()));
    }
    let probe = options.probe;
    if !matches!(probe, ModeLabel::Stokes | ModeLabel::AntiStokes) {
        return Err(CeoError::Fit(format!("optical joint fit needs an optical probe (got {probe})")));
    }
    if let Some(p) = &options.powers {
        if p.len() != spectra.len() {
            return Err(CeoError::Fit("one power per spectrum required".into()));
        }
    }
    if options
        .free_detunings
        .iter()
        .any(|l| !matches!(l, ModeLabel::Stokes | ModeLabel::AntiStokes))
    {
        return Err(CeoError::Fit("only optical TE detunings can be fitted".into()));
    }
    validate_config(template).into_result()?;
    let data: Vec<Vec<f64>> = spectra.iter().map(r_values).collect::<Result<_>>()?;
    let n_points: usize = data.iter().map(Vec::len).sum();
    options.fit.weighting.check(n_points)?;
    let mode = template.mode(probe);
    let (k0, kx0) = (mode.kappa_total, mode.kappa_ext);
    let grid = c_grid();
    let c0: Vec<f64> = match &options.powers {
        Some(powers) => {
            let p_max = powers.iter().cloned().fold(0.0f64, f64::max);
            let p_max = if p_max > 0.0 { p_max } else { 1.0 };
            let best = grid
                .par_iter()
                .map(|&c_top| {
                    let cost: f64 = spectra
                        .iter()
                        .zip(&data)
                        .zip(powers)
                        .map(|((s, r), p)| spectrum_cost(template, c_top * p / p_max, probe, s, r))
                        .sum();
                    (c_top, cost)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|v| v.0)
                .unwrap_or(0.0);
            powers.iter().map(|p| best * p / p_max).collect()
        }
        None => spectra
            .par_iter()
            .zip(&data)
            .map(|(s, r)| {
                grid.iter()
                    .map(|&c| (c, spectrum_cost(template, c, probe, s, r)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|v| v.0)
                    .unwrap_or(0.0)
            })
            .collect(),
    };
    let mut params = vec![
        ParamSpec::new("kappa_o", k0, 1e-3 * k0, f64::INFINITY).with_scale(k0).shared(),
        ParamSpec::new("kappa_o_ext", kx0, 1e-3 * kx0, f64::INFINITY).with_scale(kx0).shared(),
    ];
    for &label in &options.free_detunings {
        params.push(
            ParamSpec::unbounded(format!("delta_{}", label.name()), template.mode(label).detuning)
                .with_scale(k0)
                .shared(),
        );
    }
    let n_det = options.free_detunings.len();
    for (i, &c) in c0.iter().enumerate() {
        params.push(ParamSpec::new(format!("c_{i}"), c, 0.0, f64::INFINITY).with_scale(0.1));
    }
    let labels = &options.free_detunings;
    let offsets: Vec<usize> = data
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d.len();
            Some(o)
        })
        .collect();
    let flat: Vec<f64> = data.concat();
    let (data, offsets) = (&data, &offsets);
    let result = solve(&options.fit, &flat, 0, |w| {
        FitProblem::new(params.clone(), move |p: &[f64]| {
        if p[1] >= p[0] {
            return Err(CeoError::Fit("kappa_ext >= kappa".into()));
        }
        let dets: Vec<(ModeLabel, f64)> = labels.iter().cloned().zip(p[2..2 + n_det].iter().cloned()).collect();
        let cfg = apply_optical(template, p[0], p[1], &dets);
        let parts: Vec<Result<Vec<f64>>> = spectra
            .par_iter()
            .zip(data)
            .enumerate()
            .map(|(i, (s, r))| {
                let c = p[2 + n_det + i];
                s.frequencies
                    .iter()
                    .zip(r)
                    .enumerate()
                    .map(|(k, (&x, &y))| Ok(w.residual(offsets[i] + k, y, optical_model(&cfg, c, probe, x)?)))
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(n_points);
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
        })
    })?;
    let e = &result.estimates;
    let detunings: Vec<(ModeLabel, f64)> = labels.iter().cloned().zip(e[2..2 + n_det].iter().cloned()).collect();
    let config = apply_optical(template, e[0], e[1], &detunings);
    Ok(OpticalJointFit {
        kappa_o: e[0],
        kappa_o_ext: e[1],
        detunings,
        cooperativities: e[2 + n_det..].to_vec(),
        cooperativity_ci: result.ci_half_widths[2 + n_det..].to_vec(),
        config,
        result,
    })
}

/// Cooperativity at which the on-resonance Stokes reflection vanishes,
/// `1 - 2 kappa_ext / kappa`, with its 95 % half-width.
pub fn eoia_zero_cooperativity(fit: &OpticalJointFit) -> (f64, f64) {
    let (k, kx) = (fit.kappa_o, fit.kappa_o_ext);
    let value = 1.0 - 2.0 * kx / k;
    let var = propagate_variance(&fit.result, "kappa_o", "kappa_o_ext", 2.0 * kx / (k * k), -2.0 / k);
    (value, super::t_factor(fit.result.dof) * var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_response::{linear_grid, normalized_reflection};
    use crate::model::{hz, Configuration, ModeSpec};

    fn shift_spectrum(dw: f64, dk: f64) -> Spectrum {
        let (k, kx) = (hz(10e6), hz(4e6));
        let w = linear_grid(-3.0 * k, 3.0 * k, 121);
        let r = w.iter().map(|&x| microwave_shift_model(k, kx, dw, dk, x).unwrap()).collect();
        Spectrum::from_r(w, r).unwrap()
    }

    #[test]
    fn shift_model_matches_onres_formula() {
        let (k, kx) = (hz(10e6), hz(4e6));
        let a = microwave_shift_model(k, kx, 0.0, -0.5 * k, 0.0).unwrap();
        let b = crate::freq_response::onres_microwave_r(0.0, -0.5 * k, k, kx).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - 9.0).abs() < 1e-12);
    }

    #[test]
    fn microwave_joint_noiseless() {
        let k = hz(10e6);
        let truth = [(0.0, 0.0), (0.02 * k, -0.2 * k), (-0.05 * k, -0.4 * k)];
        let spectra: Vec<Spectrum> = truth.iter().map(|&(a, b)| shift_spectrum(a, b)).collect();
        let f = joint_stationary_microwave_fit(&spectra, (1.1 * k, 0.9 * hz(4e6)), &FitOptions::default()).unwrap();
        assert!((f.kappa_e / k - 1.0).abs() < 1e-6);
        assert!((f.kappa_e_ext / hz(4e6) - 1.0).abs() < 1e-6);
        for (s, t) in f.shifts.iter().zip(&truth) {
            assert!((s.delta_omega - t.0).abs() < 1e-6 * k);
            assert!((s.delta_kappa - t.1).abs() < 1e-6 * k);
        }
    }

    #[test]
    fn duplicated_datasets_give_same_estimates() {
        let k = hz(10e6);
        let a = shift_spectrum(0.01 * k, -0.1 * k);
        let b = shift_spectrum(-0.03 * k, -0.3 * k);
        let init = (1.05 * k, hz(4.1e6));
        let once = joint_stationary_microwave_fit(&[a.clone(), b.clone()], init, &FitOptions::default()).unwrap();
        let twice = joint_stationary_microwave_fit(&[a.clone(), b.clone(), a, b], init, &FitOptions::default()).unwrap();
        assert!((once.kappa_e / twice.kappa_e - 1.0).abs() < 1e-8);
        assert!((once.kappa_e_ext / twice.kappa_e_ext - 1.0).abs() < 1e-8);
        assert!((once.shifts[1].delta_kappa - twice.shifts[3].delta_kappa).abs() < 1e-8 * k);
    }

    fn stokes_template() -> SystemConfig {
        let optical = ModeSpec::from_hz(ModeLabel::Stokes, 26e6, 10e6, 0.0).unwrap();
        let mw = ModeSpec::from_hz(ModeLabel::Microwave, 10e6, 4e6, 0.0).unwrap();
        SystemConfig::uniform(Configuration::StokesCase, optical, hz(7.6e6), mw, hz(30.0), hz(26e6) * 1e3)
    }

    #[test]
    fn optical_model_matches_matrix_solver() {
        let cfg = stokes_template();
        for &w in &[-3e7, 0.0, 5e7] {
            let a = optical_model(&cfg, 0.3, ModeLabel::Stokes, w).unwrap();
            let b = normalized_reflection(&cfg, cfg.g_for_cooperativity(0.3), w, ModeLabel::Stokes).unwrap();
            assert!((a / b - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn optical_joint_noiseless() {
        let truth = stokes_template();
        let mut truth_cfg = truth.clone();
        truth_cfg.stokes.detuning = hz(0.3e6);
        let cs = [0.0, 0.15, 0.3, 0.45];
        let w = linear_grid(hz(-60e6), hz(60e6), 121);
        let spectra: Vec<Spectrum> = cs
            .iter()
            .map(|&c| {
                let r = w.iter().map(|&x| optical_model(&truth_cfg, c, ModeLabel::Stokes, x).unwrap()).collect();
                Spectrum::from_r(w.clone(), r).unwrap()
            })
            .collect();
        let mut template = truth.clone();
        template.stokes.kappa_total *= 1.05;
        template.anti_stokes.kappa_total *= 1.05;
        let opts = OpticalJointOptions {
            powers: Some(cs.to_vec()),
            ..OpticalJointOptions::new(ModeLabel::Stokes)
        };
        let f = joint_stationary_optical_fit(&spectra, &template, &opts).unwrap();
        assert!((f.kappa_o / hz(26e6) - 1.0).abs() < 1e-6);
        assert!((f.kappa_o_ext / hz(10e6) - 1.0).abs() < 1e-6);
        assert!((f.detunings[0].1 - hz(0.3e6)).abs() < 1e-6 * hz(26e6));
        for (a, b) in f.cooperativities.iter().zip(&cs) {
            assert!((a - b).abs() < 1e-6);
        }
        let (zero, _) = eoia_zero_cooperativity(&f);
        assert!((zero - (1.0 - 2.0 * 10.0 / 26.0)).abs() < 1e-6);
    }
}
