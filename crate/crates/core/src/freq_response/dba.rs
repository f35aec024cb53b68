//! Analytic dynamical back-action on the microwave mode.
//!
//! The shifts are read off the effective inverse susceptibility at `W = 0`:
//! `chi_e,eff^-1(0) = (kappa_e + d_kappa_e)/2 + i d_Omega_e`. Each expression has a
//! resonant-branch Lorentzian term and a TM-suppressed branch term. TM partners
//! are taken at their TE partner's detuning.

use serde::{Deserialize, Serialize};

use crate::error::{CeoError, Result};
use crate::model::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbaShift {
    /// Microwave frequency shift, rad/s.
    pub delta_omega_e: f64,
    /// Microwave linewidth change, rad/s.
    pub delta_kappa_e: f64,
}

/// `(d_Omega, d_kappa)` of the TM-hybridized branch with detuning `d`, per unit `g^2`.
fn suppressed_branch(kappa_o: f64, kappa_tm: f64, j: f64, d: f64) -> (f64, f64) {
    let (j2, d2) = (j * j, d * d);
    let den = 8.0 * j2 * (kappa_o * kappa_tm - 4.0 * d2)
        + (kappa_o * kappa_o + 4.0 * d2) * (kappa_tm * kappa_tm + 4.0 * d2)
        + 16.0 * j2 * j2;
    let dw = 4.0 * d * (kappa_tm * kappa_tm - 4.0 * j2 + 4.0 * d2) / den;
    let dk = 4.0 * (kappa_tm * (kappa_o * kappa_tm + 4.0 * j2) + 4.0 * d2 * kappa_o) / den;
    (dw, dk)
}

/// `(d_Omega, d_kappa)` of a bare optical branch with detuning `d`, per unit `g^2`.
fn resonant_branch(kappa_o: f64, d: f64) -> (f64, f64) {
    let den = kappa_o * kappa_o + 4.0 * d * d;
    (4.0 * d / den, 4.0 * kappa_o / den)
}

/// Microwave frequency and linewidth change for the Stokes or anti-Stokes case.
///
/// `delta_s` and `delta_as` follow the mode detuning convention of
/// [`super::matrix`]: the Stokes branch is sampled at `-delta_s`, the
/// anti-Stokes branch at `+delta_as`.
pub fn dba_shifts(
    case: Configuration,
    g: f64,
    kappa_o: f64,
    kappa_o_tm: f64,
    j: f64,
    delta_s: f64,
    delta_as: f64,
) -> Result<DbaShift> {
    if !(kappa_o > 0.0) || !(kappa_o_tm > 0.0) {
        return Err(CeoError::Domain("optical loss rates must be positive".into()));
    }
    let g2 = g * g;
    let (dw, dk) = match case {
        Configuration::StokesCase => {
            let (rw, rk) = resonant_branch(kappa_o, -delta_s);
            let (sw, sk) = suppressed_branch(kappa_o, kappa_o_tm, j, delta_as);
            (-rw + sw, -rk + sk)
        }
        Configuration::AntiStokesCase => {
            let (rw, rk) = resonant_branch(kappa_o, delta_as);
            let (sw, sk) = suppressed_branch(kappa_o, kappa_o_tm, j, -delta_s);
            (rw - sw, rk - sk)
        }
        Configuration::Symmetric => {
            return Err(CeoError::Domain(
                "dba_shifts requires stokes_case or anti_stokes_case".into(),
            ))
        }
    };
    Ok(DbaShift {
        delta_omega_e: g2 * dw,
        delta_kappa_e: g2 * dk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_response::susceptibility::{closed_form_chi_e, ResponseParams};
    use crate::model::{cooperativity, hz};
    use approx::assert_relative_eq;

    fn params(g: f64, ko: f64, ktm: f64, j: f64, ds: f64, das: f64) -> ResponseParams {
        ResponseParams {
            g,
            kappa_e: hz(10e6),
            kappa_s: ko,
            kappa_as: ko,
            kappa_s_tm: ktm,
            kappa_as_tm: ktm,
            j_s: j,
            j_as: j,
            delta_e: 0.0,
            delta_s: ds,
            delta_as: das,
            delta_s_tm: ds,
            delta_as_tm: das,
        }
    }

    #[test]
    fn full_suppression_limit() {
        let (ko, ke) = (hz(26e6), hz(10e6));
        for c in [0.1, 0.3, 0.5] {
            let g = (c * ko * ke).sqrt() / 2.0;
            let s = dba_shifts(Configuration::StokesCase, g, ko, hz(7.6e6), 1e6 * ko, 0.0, 0.0).unwrap();
            assert_relative_eq!(s.delta_kappa_e, -c * ke, max_relative = 1e-9);
            assert!(s.delta_omega_e.abs() < 1e-9 * ke);
            let a = dba_shifts(Configuration::AntiStokesCase, g, ko, hz(7.6e6), 1e6 * ko, 0.0, 0.0).unwrap();
            assert_relative_eq!(a.delta_kappa_e, c * ke, max_relative = 1e-9);
            assert_relative_eq!(cooperativity(g, ko, ke).unwrap(), c, max_relative = 1e-12);
        }
    }

    #[test]
    fn frequency_shift_is_odd_in_detuning() {
        let ko = hz(26e6);
        let g = hz(3e6);
        for case in [Configuration::StokesCase, Configuration::AntiStokesCase] {
            let (ds, das) = (hz(0.4e6), hz(-0.3e6));
            let p = dba_shifts(case, g, ko, hz(7.6e6), hz(26e6), ds, das).unwrap();
            let m = dba_shifts(case, g, ko, hz(7.6e6), hz(26e6), -ds, -das).unwrap();
            assert_relative_eq!(p.delta_omega_e, -m.delta_omega_e, max_relative = 1e-12);
            assert_relative_eq!(p.delta_kappa_e, m.delta_kappa_e, max_relative = 1e-12);
        }
        let a = dba_shifts(Configuration::StokesCase, g, ko, hz(7.6e6), 1e9 * ko, hz(1e6), 0.0).unwrap();
        let b = dba_shifts(Configuration::StokesCase, g, ko, hz(7.6e6), 1e9 * ko, hz(-1e6), 0.0).unwrap();
        assert!(a.delta_omega_e * b.delta_omega_e < 0.0);
    }

    #[test]
    fn sub_mhz_anti_stokes_detuning_shifts_frequency_linearly() {
        let (ko, ke) = (hz(26e6), hz(10e6));
        let c = 0.2;
        let g = (c * ko * ke).sqrt() / 2.0;
        for das in [hz(0.1e6), hz(0.3e6), hz(0.9e6)] {
            let s = dba_shifts(Configuration::AntiStokesCase, g, ko, hz(7.6e6), 1e9 * ko, 0.0, das).unwrap();
            assert_relative_eq!(s.delta_omega_e.abs(), c * ke * das / ko, max_relative = 5e-3);
        }
    }

    #[test]
    fn matches_closed_form_on_resonance() {
        let ko = hz(26e6);
        let ktm = hz(7.6e6);
        let g = hz(2.5e6);
        for case in [Configuration::StokesCase, Configuration::AntiStokesCase] {
            for (ds, das, j) in [
                (0.0, 0.0, hz(26e6)),
                (hz(0.5e6), hz(-0.4e6), hz(13e6)),
                (hz(-2e6), hz(1.5e6), hz(10e6)),
            ] {
                let p = params(g, ko, ktm, j, ds, das);
                let inv = closed_form_chi_e(case, &p, 0.0).unwrap().inv();
                let s = dba_shifts(case, g, ko, ktm, j, ds, das).unwrap();
                let scale = g * g / ko;
                assert!((inv.re - (p.kappa_e + s.delta_kappa_e) / 2.0).abs() < 1e-10 * scale);
                assert!((inv.im - s.delta_omega_e).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn symmetric_is_rejected() {
        assert!(dba_shifts(Configuration::Symmetric, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }
}
