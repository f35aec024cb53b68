//! Single-mode reflection fit.
//!
//! `|S|^2` is symmetric under `eta -> 1 - eta`; estimates are reported on the
//! under-coupled branch `eta <= 1/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lm::{FitProblem, FitResult, ParamSpec};
use super::{power_values, propagate_variance, solve, FitOptions};
use crate::error::{CeoError, Result};
use crate::freq_response::Spectrum;
use crate::model::{ModeLabel, ModeSpec};

/// `scale |1 - kappa_ext / (kappa/2 - i(omega - center))|^2`.
pub fn lorentzian_model(kappa: f64, kappa_ext: f64, center: f64, scale: f64, omega: f64) -> f64 {
    let s = 1.0 - kappa_ext / Complex64::new(0.5 * kappa, -(omega - center));
    scale * s.norm_sqr()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    /// Mode with `detuning = -center`.
    pub mode: ModeSpec,
    pub kappa: f64,
    pub kappa_ext: f64,
    pub center: f64,
    pub scale: f64,
    pub kappa_ci: f64,
    pub kappa_ext_ci: f64,
    pub center_ci: f64,
    pub result: FitResult,
}

/// Dip-based starting point `(kappa, eta, center, scale)`.
pub(crate) fn initial_guess(omega: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = y.len();
    let edge = (n / 10).max(1);
    let mut outer: Vec<f64> = y[..edge].iter().chain(&y[n - edge..]).cloned().collect();
    outer.sort_by(f64::total_cmp);
    let bg = outer[outer.len() / 2].max(f64::MIN_POSITIVE);
    let (k_min, y_min) = y
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, bg));
    let depth = (1.0 - y_min / bg).clamp(0.0, 1.0);
    let eta = 0.5 * (1.0 - (1.0 - depth).sqrt());
    let half = 0.5 * (bg + y_min);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = k_min;
        for k in range {
            if y[k] >= half {
                let (y0, y1) = (y[prev], y[k]);
                let f = if y1 != y0 { (half - y0) / (y1 - y0) } else { 0.0 };
                return Some(omega[prev] + f * (omega[k] - omega[prev]));
            }
            prev = k;
        }
        None
    };
    let left = crossing(&mut (0..k_min).rev());
    let right = crossing(&mut (k_min + 1..n));
    let span = omega[n - 1] - omega[0];
    let c = omega[k_min];
    let kappa = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (c - l),
        (None, Some(r)) => 2.0 * (r - c),
        (None, None) if depth > 0.2 => 2.0 * span,
        (None, None) => span / 10.0,
    };
    let kappa = if kappa > 0.0 { kappa } else { span / 10.0 };
    (kappa, eta, c, bg)
}

/// Fits `(kappa, eta, center, scale)` to `|S|^2` of a single dip.
pub fn lorentzian_reflection_fit(spectrum: &Spectrum, options: &FitOptions) -> Result<LorentzianFit> {
    let y = power_values(spectrum)?;
    let omega = spectrum.frequencies.clone();
    if y.len() < 5 {
        return Err(CeoError::Fit("lorentzian fit needs at least 5 points".into()));
    }
    options.weighting.check(y.len())?;
    let (k0, eta0, c0, bg0) = initial_guess(&omega, &y);
    let span = omega[omega.len() - 1] - omega[0];
    if eta0 > 0.05 && span < 3.0 * k0 {
        return Err(CeoError::Fit(format!(
            "spectrum spans {:.3} linewidths; at least 3 are required",
            span / k0
        )));
    }
    let params = vec![
        ParamSpec::new("kappa", k0, 1e-6 * k0, f64::INFINITY).with_scale(k0),
        ParamSpec::new("eta", eta0, 0.0, 0.5).with_scale(0.1),
        ParamSpec::unbounded("center", c0).with_scale(k0),
        ParamSpec::new("scale", bg0, 0.0, f64::INFINITY).with_scale(bg0),
    ];
    let (omega, y) = (&omega, &y);
    let result = solve(options, y, 0, |w| {
        FitProblem::new(params.clone(), move |p: &[f64]| {
            Ok(omega
                .iter()
                .zip(y)
                .enumerate()
                .map(|(i, (&x, &yi))| w.residual(i, yi, lorentzian_model(p[0], p[1] * p[0], p[2], p[3], x)))
                .collect())
        })
    })?;
    let kappa = result.estimates[0];
    let eta = result.estimates[1];
    let center = result.estimates[2];
    let kappa_ext = eta * kappa;
    let var_ext = propagate_variance(&result, "kappa", "eta", eta, kappa);
    let t = if result.std_errors[0] > 0.0 {
        result.ci_half_widths[0] / result.std_errors[0]
    } else {
        super::t_factor(result.dof)
    };
    let mode = ModeSpec {
        kappa_total: kappa,
        kappa_ext,
        detuning: -center,
        label: ModeLabel::Stokes,
    };
    Ok(LorentzianFit {
        mode,
        kappa,
        kappa_ext,
        center,
        scale: result.estimates[3],
        kappa_ci: result.ci_half_widths[0],
        kappa_ext_ci: t * var_ext.sqrt(),
        center_ci: result.ci_half_widths[2],
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::lm::FitStatus;
    use crate::freq_response::{linear_grid, Frame};
    use crate::model::hz;

    fn spectrum(kappa: f64, kappa_ext: f64, center: f64, scale: f64) -> Spectrum {
        let w = linear_grid(hz(-80e6), hz(80e6), 401);
        let y = w.iter().map(|&x| lorentzian_model(kappa, kappa_ext, center, scale, x)).collect();
        Spectrum::new(w, None, Some(y), Frame::RotatingProbe).unwrap()
    }

    #[test]
    fn noiseless_recovery() {
        let s = spectrum(hz(26e6), hz(10e6), hz(3e6), 0.8);
        let f = lorentzian_reflection_fit(&s, &FitOptions::default()).unwrap();
        assert!((f.kappa / hz(26e6) - 1.0).abs() < 1e-6);
        assert!((f.kappa_ext / hz(10e6) - 1.0).abs() < 1e-6);
        assert!((f.center - hz(3e6)).abs() < 1e-6 * hz(26e6));
        assert!((f.scale - 0.8).abs() < 1e-8);
        assert_eq!(f.mode.detuning, -f.center);
    }

    #[test]
    fn overcoupled_data_maps_to_undercoupled_branch() {
        let k = hz(26e6);
        for x in linear_grid(-k, k, 11) {
            let a = lorentzian_model(k, 0.3 * k, 0.0, 1.0, x);
            let b = lorentzian_model(k, 0.7 * k, 0.0, 1.0, x);
            assert!((a - b).abs() < 1e-12);
        }
        let f = lorentzian_reflection_fit(&spectrum(k, 0.7 * k, 0.0, 1.0), &FitOptions::default()).unwrap();
        assert!((f.kappa_ext / (0.3 * k) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_spectrum_is_not_identifiable() {
        let w = linear_grid(hz(-80e6), hz(80e6), 201);
        let s = Spectrum::from_r(w, vec![1.0; 201]).unwrap();
        let f = lorentzian_reflection_fit(&s, &FitOptions::default()).unwrap();
        assert_ne!(f.result.status, FitStatus::Converged);
    }

    #[test]
    fn narrow_window_rejected() {
        let w = linear_grid(hz(-10e6), hz(10e6), 101);
        let y = w.iter().map(|&x| lorentzian_model(hz(26e6), hz(10e6), 0.0, 1.0, x)).collect();
        assert!(lorentzian_reflection_fit(&Spectrum::from_r(w, y).unwrap(), &FitOptions::default()).is_err());
    }
}
