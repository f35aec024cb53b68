//! Reflection coefficients, normalized reflection and sampled spectra.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::effective_chi_unchecked;
use crate::error::{CeoError, Result};
use crate::model::{validate_config, ModeLabel, SystemConfig};

/// Amplitude reflection `S = 1 - eta kappa chi_eff = 1 - kappa_ext chi_eff`.
#[inline]
pub fn reflection(chi_eff: Complex64, kappa_total: f64, kappa_ext: f64) -> Complex64 {
    let eta = kappa_ext / kappa_total;
    1.0 - eta * kappa_total * chi_eff
}

/// Reflection `S_jj(W)` of a probed mode from the full matrix model.
pub fn probe_reflection(cfg: &SystemConfig, g: f64, omega: f64, probe: ModeLabel) -> Result<Complex64> {
    validate_config(cfg).into_result()?;
    reflection_unchecked(cfg, g, omega, probe)
}

fn reflection_unchecked(cfg: &SystemConfig, g: f64, omega: f64, probe: ModeLabel) -> Result<Complex64> {
    let chi = effective_chi_unchecked(cfg, g, omega, probe)?;
    let m = cfg.mode(probe);
    Ok(reflection(chi, m.kappa_total, m.kappa_ext))
}

/// Returns `(S_on, S_off, R)` where `S_off` is evaluated with `g = 0`.
fn normalized_unchecked(cfg: &SystemConfig, g: f64, omega: f64, probe: ModeLabel) -> Result<(Complex64, f64)> {
    let s_on = reflection_unchecked(cfg, g, omega, probe)?;
    let s_off = reflection_unchecked(cfg, 0.0, omega, probe)?;
    if s_off.norm() < 1e-12 {
        return Err(CeoError::ZeroReference {
            probe: probe.name().to_string(),
            omega,
        });
    }
    Ok((s_on, (s_on / s_off).norm_sqr()))
}

/// Normalized reflection `R = |S_on / S_off|^2` between pump on (`g`) and off.
pub fn normalized_reflection(cfg: &SystemConfig, g: f64, omega: f64, probe: ModeLabel) -> Result<f64> {
    validate_config(cfg).into_result()?;
    Ok(normalized_unchecked(cfg, g, omega, probe)?.1)
}

/// On-resonance microwave normalized reflection for a mode whose linewidth and
/// frequency are shifted by `delta_kappa_e` and `delta_omega_e`.
pub fn onres_microwave_r(delta_omega_e: f64, delta_kappa_e: f64, kappa_e: f64, kappa_e_ext: f64) -> Result<f64> {
    let width = kappa_e + delta_kappa_e;
    if !(width > 0.0) {
        return Err(CeoError::Singular {
            probe: ModeLabel::Microwave.name().to_string(),
            omega: 0.0,
        });
    }
    let reference = 1.0 - 2.0 * kappa_e_ext / kappa_e;
    if reference.abs() < 1e-12 {
        return Err(CeoError::ZeroReference {
            probe: ModeLabel::Microwave.name().to_string(),
            omega: 0.0,
        });
    }
    let s = 1.0 - kappa_e_ext / Complex64::new(width / 2.0, delta_omega_e);
    Ok(s.norm_sqr() / (reference * reference))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Offset from the probed mode's rotating frame.
    RotatingProbe,
    Lab,
}

/// A sampled response on a strictly increasing angular-frequency axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub s_complex: Option<Vec<Complex64>>,
    pub r_values: Option<Vec<f64>>,
    pub frame: Frame,
}

impl Spectrum {
    pub fn new(
        frequencies: Vec<f64>,
        s_complex: Option<Vec<Complex64>>,
        r_values: Option<Vec<f64>>,
        frame: Frame,
    ) -> Result<Self> {
        check_grid(&frequencies)?;
        let n = frequencies.len();
        if s_complex.as_ref().is_some_and(|s| s.len() != n) || r_values.as_ref().is_some_and(|r| r.len() != n) {
            return Err(CeoError::Config("spectrum arrays must match the frequency axis length".into()));
        }
        Ok(Spectrum {
            frequencies,
            s_complex,
            r_values,
            frame,
        })
    }

    /// Spectrum holding only normalized reflection values.
    pub fn from_r(frequencies: Vec<f64>, r_values: Vec<f64>) -> Result<Self> {
        Spectrum::new(frequencies, None, Some(r_values), Frame::RotatingProbe)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// `|S|^2` when complex reflection is present.
    pub fn power(&self) -> Option<Vec<f64>> {
        self.s_complex.as_ref().map(|s| s.iter().map(|z| z.norm_sqr()).collect())
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(CeoError::Config("frequency grid is empty".into()));
    }
    if grid.iter().any(|w| !w.is_finite()) {
        return Err(CeoError::Config("frequency grid contains non-finite values".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CeoError::Config("frequency grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Complex reflection and normalized reflection of `probe` over `omega_grid`.
pub fn spectrum_sweep(cfg: &SystemConfig, g: f64, omega_grid: &[f64], probe: ModeLabel) -> Result<Spectrum> {
    validate_config(cfg).into_result()?;
    check_grid(omega_grid)?;
    if !probe.is_probe() {
        return Err(CeoError::Domain(format!("{probe} is not a probe mode")));
    }
    let points: Vec<Result<(Complex64, f64)>> = omega_grid
        .par_iter()
        .map(|&w| normalized_unchecked(cfg, g, w, probe))
        .collect();
    let mut s = Vec::with_capacity(points.len());
    let mut r = Vec::with_capacity(points.len());
    for (index, p) in points.into_iter().enumerate() {
        let (si, ri) = p.map_err(|e| CeoError::AtGridPoint {
            index,
            source: Box::new(e),
        })?;
        s.push(si);
        r.push(ri);
    }
    Spectrum::new(omega_grid.to_vec(), Some(s), Some(r), Frame::RotatingProbe)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}
