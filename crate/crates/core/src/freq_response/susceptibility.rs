//! Bare and effective mode susceptibilities in closed form.
//!
//! The general expressions below are obtained by eliminating the TM partners
//! and the off-probe modes from the 10x10 response matrix (see
//! [`super::matrix`]). They use the same detuning convention as the matrix:
//! the annihilation row of a mode with detuning `d` carries `kappa/2 - i(Omega + d)`
//! and its creation-operator row carries `kappa/2 - i(Omega - d)`.

use num_complex::Complex64;

use crate::error::{CeoError, Result};
use crate::model::{Configuration, ModeLabel, SystemConfig};

/// `1 / (kappa/2 - i omega)`.
#[inline]
pub fn bare_susceptibility(kappa: f64, omega: f64) -> Complex64 {
    inverse_susceptibility(kappa, omega).inv()
}

/// `kappa/2 - i omega`.
#[inline]
pub fn inverse_susceptibility(kappa: f64, omega: f64) -> Complex64 {
    Complex64::new(0.5 * kappa, -omega)
}

/// Flat parameter set consumed by the closed-form expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseParams {
    pub g: f64,
    pub kappa_e: f64,
    pub kappa_s: f64,
    pub kappa_as: f64,
    pub kappa_s_tm: f64,
    pub kappa_as_tm: f64,
    pub j_s: f64,
    pub j_as: f64,
    pub delta_e: f64,
    pub delta_s: f64,
    pub delta_as: f64,
    pub delta_s_tm: f64,
    pub delta_as_tm: f64,
}

impl ResponseParams {
    pub fn from_config(cfg: &SystemConfig, g: f64) -> Self {
        ResponseParams {
            g,
            kappa_e: cfg.microwave.kappa_total,
            kappa_s: cfg.stokes.kappa_total,
            kappa_as: cfg.anti_stokes.kappa_total,
            kappa_s_tm: cfg.stokes_tm.kappa_total,
            kappa_as_tm: cfg.anti_stokes_tm.kappa_total,
            j_s: cfg.j_s,
            j_as: cfg.j_as,
            delta_e: cfg.microwave.detuning,
            delta_s: cfg.stokes.detuning,
            delta_as: cfg.anti_stokes.detuning,
            delta_s_tm: cfg.stokes_tm.detuning,
            delta_as_tm: cfg.anti_stokes_tm.detuning,
        }
    }

    /// Zeroes the TM coupling that `case` declares absent.
    pub fn for_case(mut self, case: Configuration) -> Self {
        match case {
            Configuration::Symmetric => {
                self.j_s = 0.0;
                self.j_as = 0.0;
            }
            Configuration::StokesCase => self.j_s = 0.0,
            Configuration::AntiStokesCase => self.j_as = 0.0,
        }
        self
    }

    fn check(&self) -> Result<()> {
        let rates = [
            ("kappa_e", self.kappa_e),
            ("kappa_s", self.kappa_s),
            ("kappa_as", self.kappa_as),
            ("kappa_s_tm", self.kappa_s_tm),
            ("kappa_as_tm", self.kappa_as_tm),
        ];
        for (name, k) in rates {
            if !(k > 0.0) {
                return Err(CeoError::Domain(format!("{name} must be > 0 (got {k})")));
            }
        }
        Ok(())
    }

    /// Stokes branch seen through the conjugate Stokes amplitude, including its
    /// TM partner: `chi_s(W - d_s) / (1 + J_s^2 chi_s(W - d_s) chi_stm(W - d_stm))`.
    fn stokes_conjugate_branch(&self, omega: f64) -> Complex64 {
        let chi = bare_susceptibility(self.kappa_s, omega - self.delta_s);
        let chi_tm = bare_susceptibility(self.kappa_s_tm, omega - self.delta_s_tm);
        chi / (1.0 + self.j_s * self.j_s * chi * chi_tm)
    }

    /// Anti-Stokes branch on its annihilation row.
    fn anti_stokes_branch(&self, omega: f64) -> Complex64 {
        let chi = bare_susceptibility(self.kappa_as, omega + self.delta_as);
        let chi_tm = bare_susceptibility(self.kappa_as_tm, omega + self.delta_as_tm);
        chi / (1.0 + self.j_as * self.j_as * chi * chi_tm)
    }

    /// Anti-Stokes branch seen through its conjugate amplitude.
    fn anti_stokes_conjugate_branch(&self, omega: f64) -> Complex64 {
        let chi = bare_susceptibility(self.kappa_as, omega - self.delta_as);
        let chi_tm = bare_susceptibility(self.kappa_as_tm, omega - self.delta_as_tm);
        chi / (1.0 + self.j_as * self.j_as * chi * chi_tm)
    }
}

/// Scattering rate ratio `r(W) = [1 + J^2 chi_o(W) chi_tm(W)]^-1`.
pub fn scattering_ratio(j: f64, kappa_o: f64, kappa_tm: f64, omega: f64) -> Complex64 {
    (1.0 + j * j * bare_susceptibility(kappa_o, omega) * bare_susceptibility(kappa_tm, omega)).inv()
}

/// Effective microwave susceptibility with finite TM coupling and detunings.
pub fn closed_form_chi_e(case: Configuration, params: &ResponseParams, omega: f64) -> Result<Complex64> {
    params.check()?;
    let p = params.for_case(case);
    let g2 = p.g * p.g;
    let inv = inverse_susceptibility(p.kappa_e, omega + p.delta_e) - g2 * p.stokes_conjugate_branch(omega)
        + g2 * p.anti_stokes_branch(omega);
    Ok(inv.inv())
}

/// Effective optical susceptibility seen by a probe on the Stokes or anti-Stokes mode.
pub fn closed_form_chi_o(
    case: Configuration,
    probe: ModeLabel,
    params: &ResponseParams,
    omega: f64,
) -> Result<Complex64> {
    params.check()?;
    let p = params.for_case(case);
    let g2 = p.g * p.g;
    let inv = match probe {
        ModeLabel::Stokes => {
            let tm = p.j_s * p.j_s * bare_susceptibility(p.kappa_s_tm, omega + p.delta_s_tm);
            let mw = inverse_susceptibility(p.kappa_e, omega - p.delta_e) + g2 * p.anti_stokes_conjugate_branch(omega);
            inverse_susceptibility(p.kappa_s, omega + p.delta_s) + tm - g2 / mw
        }
        ModeLabel::AntiStokes => {
            let tm = p.j_as * p.j_as * bare_susceptibility(p.kappa_as_tm, omega + p.delta_as_tm);
            let mw = inverse_susceptibility(p.kappa_e, omega + p.delta_e) - g2 * p.stokes_conjugate_branch(omega);
            inverse_susceptibility(p.kappa_as, omega + p.delta_as) + tm + g2 / mw
        }
        other => {
            return Err(CeoError::Domain(format!(
                "optical probe must be stokes or anti_stokes (got {other})"
            )))
        }
    };
    Ok(inv.inv())
}

/// Microwave susceptibility at ideal detuning and complete suppression of the
/// inactive sideband: `1 / (chi_e^-1 -+ g^2 chi_o)`; unchanged in the symmetric case.
pub fn ideal_chi_e(case: Configuration, g: f64, kappa_e: f64, kappa_o: f64, omega: f64) -> Complex64 {
    let g2 = g * g;
    let inv_e = inverse_susceptibility(kappa_e, omega);
    let chi_o = bare_susceptibility(kappa_o, omega);
    match case {
        Configuration::Symmetric => inv_e.inv(),
        Configuration::StokesCase => (inv_e - g2 * chi_o).inv(),
        Configuration::AntiStokesCase => (inv_e + g2 * chi_o).inv(),
    }
}

/// Optical counterpart of [`ideal_chi_e`]. In the symmetric case both sidebands
/// feed the microwave mode: `1 / (chi_o^-1 -+ g^2 / (chi_e^-1 +- g^2 chi_o))`.
pub fn ideal_chi_o(
    case: Configuration,
    probe: ModeLabel,
    g: f64,
    kappa_e: f64,
    kappa_o: f64,
    omega: f64,
) -> Result<Complex64> {
    let g2 = g * g;
    let inv_o = inverse_susceptibility(kappa_o, omega);
    let inv_e = inverse_susceptibility(kappa_e, omega);
    let chi_e = inv_e.inv();
    let chi_o = inv_o.inv();
    let inv = match (case, probe) {
        (Configuration::Symmetric, ModeLabel::Stokes) => inv_o - g2 / (inv_e + g2 * chi_o),
        (Configuration::Symmetric, ModeLabel::AntiStokes) => inv_o + g2 / (inv_e - g2 * chi_o),
        (Configuration::StokesCase, ModeLabel::Stokes) => inv_o - g2 * chi_e,
        (Configuration::AntiStokesCase, ModeLabel::AntiStokes) => inv_o + g2 * chi_e,
        (case, probe) => {
            return Err(CeoError::Domain(format!(
                "no fully suppressed closed form for {probe} probe in {}",
                case.name()
            )))
        }
    };
    Ok(inv.inv())
}
