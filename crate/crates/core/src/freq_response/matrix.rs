//! Full linear response of the five-mode system.
//!
//! Amplitude ordering (rows of `M`, entries of `D`):
//!
//! | index | amplitude            |
//! |-------|----------------------|
//! | 0, 1  | a_s, a_s^+           |
//! | 2, 3  | a_as, a_as^+         |
//! | 4, 5  | a_s,tm, a_s,tm^+     |
//! | 6, 7  | a_as,tm, a_as,tm^+   |
//! | 8, 9  | b, b^+               |
//!
//! Input ports (columns of `L`): s_in, s_in^+, s_0, s_0^+, as_in, as_in^+,
//! as_0, as_0^+, s_tm_vac, s_tm_vac^+, as_tm_vac, as_tm_vac^+, b_in, b_in^+,
//! b_0, b_0^+.
//!
//! In Fourier space `M(W) D = L D_in`, and `M(W) = M(0) - i W 1`.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{CeoError, Result};
use crate::model::{validate_config, ModeLabel, SystemConfig};

pub type SystemMatrix = SMatrix<Complex64, 10, 10>;
pub type InputMatrix = SMatrix<Complex64, 10, 16>;
pub type StateVector = SVector<Complex64, 10>;
pub type InputVector = SVector<Complex64, 16>;

pub const IDX_S: usize = 0;
pub const IDX_AS: usize = 2;
pub const IDX_S_TM: usize = 4;
pub const IDX_AS_TM: usize = 6;
pub const IDX_B: usize = 8;

pub const PORT_S_IN: usize = 0;
pub const PORT_AS_IN: usize = 4;
pub const PORT_B_IN: usize = 12;

/// Pivot ratio below which the response matrix is reported singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-13;

/// Inverse susceptibility entry `kappa/2 - i x`.
#[inline]
fn inv_chi(kappa: f64, x: f64) -> Complex64 {
    Complex64::new(0.5 * kappa, -x)
}

/// Row index of the annihilation amplitude of a probed mode.
pub fn probe_row(probe: ModeLabel) -> Result<usize> {
    match probe {
        ModeLabel::Stokes => Ok(IDX_S),
        ModeLabel::AntiStokes => Ok(IDX_AS),
        ModeLabel::Microwave => Ok(IDX_B),
        other => Err(CeoError::Domain(format!("{other} is not a probe mode"))),
    }
}

/// External input port of a probed mode.
pub fn probe_port(probe: ModeLabel) -> Result<usize> {
    match probe {
        ModeLabel::Stokes => Ok(PORT_S_IN),
        ModeLabel::AntiStokes => Ok(PORT_AS_IN),
        ModeLabel::Microwave => Ok(PORT_B_IN),
        other => Err(CeoError::Domain(format!("{other} is not a probe mode"))),
    }
}

fn ensure_valid(cfg: &SystemConfig) -> Result<()> {
    validate_config(cfg).into_result()
}

/// `M(W)` without validating `cfg`; used on hot paths after a single validation.
pub(crate) fn system_matrix_unchecked(cfg: &SystemConfig, g: f64, omega: f64) -> SystemMatrix {
    let i = Complex64::i();
    let ig = i * g;
    let ijs = i * cfg.j_s;
    let ijas = i * cfg.j_as;
    let (ko, ds) = (cfg.stokes.kappa_total, cfg.stokes.detuning);
    let (kas, das) = (cfg.anti_stokes.kappa_total, cfg.anti_stokes.detuning);
    let (kstm, dstm) = (cfg.stokes_tm.kappa_total, cfg.stokes_tm.detuning);
    let (kastm, dastm) = (cfg.anti_stokes_tm.kappa_total, cfg.anti_stokes_tm.detuning);
    let (ke, de) = (cfg.microwave.kappa_total, cfg.microwave.detuning);

    let mut m = SystemMatrix::zeros();
    // a_s
    m[(0, 0)] = inv_chi(ko, omega + ds);
    m[(0, 4)] = -ijs;
    m[(0, 9)] = ig;
    // a_s^+
    m[(1, 1)] = inv_chi(ko, omega - ds);
    m[(1, 5)] = ijs;
    m[(1, 8)] = -ig;
    // a_as
    m[(2, 2)] = inv_chi(kas, omega + das);
    m[(2, 6)] = -ijas;
    m[(2, 8)] = ig;
    // a_as^+
    m[(3, 3)] = inv_chi(kas, omega - das);
    m[(3, 7)] = ijas;
    m[(3, 9)] = -ig;
    // TM partners
    m[(4, 0)] = -ijs;
    m[(4, 4)] = inv_chi(kstm, omega + dstm);
    m[(5, 1)] = ijs;
    m[(5, 5)] = inv_chi(kstm, omega - dstm);
    m[(6, 2)] = -ijas;
    m[(6, 6)] = inv_chi(kastm, omega + dastm);
    m[(7, 3)] = ijas;
    m[(7, 7)] = inv_chi(kastm, omega - dastm);
    // b, b^+
    m[(8, 1)] = ig;
    m[(8, 2)] = ig;
    m[(8, 8)] = inv_chi(ke, omega + de);
    m[(9, 0)] = -ig;
    m[(9, 3)] = -ig;
    m[(9, 9)] = inv_chi(ke, omega - de);
    m
}

/// Response matrix `M(W)` for pump-enhanced coupling `g`.
pub fn build_system_matrix(cfg: &SystemConfig, g: f64, omega: f64) -> Result<SystemMatrix> {
    ensure_valid(cfg)?;
    if !(g >= 0.0) || !g.is_finite() {
        return Err(CeoError::Domain(format!("g must be finite and >= 0 (got {g})")));
    }
    Ok(system_matrix_unchecked(cfg, g, omega))
}

/// Input coupling matrix `L` (10 x 16): square roots of the port rates.
pub fn build_input_matrix(cfg: &SystemConfig) -> Result<InputMatrix> {
    ensure_valid(cfg)?;
    Ok(input_matrix_unchecked(cfg))
}

pub(crate) fn input_matrix_unchecked(cfg: &SystemConfig) -> InputMatrix {
    let c = |x: f64| Complex64::new(x.sqrt(), 0.0);
    let mut l = InputMatrix::zeros();
    let s_ex = c(cfg.stokes.kappa_ext);
    let s_0 = c(cfg.stokes.kappa_intrinsic());
    let as_ex = c(cfg.anti_stokes.kappa_ext);
    let as_0 = c(cfg.anti_stokes.kappa_intrinsic());
    let stm = c(cfg.stokes_tm.kappa_total);
    let astm = c(cfg.anti_stokes_tm.kappa_total);
    let e_ex = c(cfg.microwave.kappa_ext);
    let e_0 = c(cfg.microwave.kappa_intrinsic());
    for k in 0..2 {
        l[(k, k)] = s_ex;
        l[(k, 2 + k)] = s_0;
        l[(2 + k, 4 + k)] = as_ex;
        l[(2 + k, 6 + k)] = as_0;
        l[(4 + k, 8 + k)] = stm;
        l[(6 + k, 10 + k)] = astm;
        l[(8 + k, 12 + k)] = e_ex;
        l[(8 + k, 14 + k)] = e_0;
    }
    l
}

/// Solves `M x = rhs` by LU with partial pivoting, rejecting (near-)singular systems.
pub(crate) fn solve_checked(m: &SystemMatrix, rhs: &StateVector, probe: ModeLabel, omega: f64) -> Result<StateVector> {
    let singular = || CeoError::Singular {
        probe: probe.name().to_string(),
        omega,
    };
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(singular());
    }
    let scaled = m.unscale(scale);
    let lu = scaled.lu();
    let u = lu.u();
    let mut pmax = 0.0f64;
    let mut pmin = f64::INFINITY;
    for k in 0..10 {
        let p = u[(k, k)].norm();
        pmax = pmax.max(p);
        pmin = pmin.min(p);
    }
    if lu.determinant().norm() < 1e-300 || pmin < PIVOT_RATIO_FLOOR * pmax {
        return Err(singular());
    }
    let x = lu.solve(&rhs.unscale(scale)).ok_or_else(singular)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(singular());
    }
    Ok(x)
}

/// Intracavity response of every amplitude to a unit coherent tone on the probe's external port.
pub(crate) fn probe_response_unchecked(cfg: &SystemConfig, g: f64, omega: f64, probe: ModeLabel) -> Result<StateVector> {
    let port = probe_port(probe)?;
    let m = system_matrix_unchecked(cfg, g, omega);
    let rhs = input_matrix_unchecked(cfg).column(port).into_owned();
    solve_checked(&m, &rhs, probe, omega)
}

pub(crate) fn effective_chi_unchecked(cfg: &SystemConfig, g: f64, omega: f64, probe: ModeLabel) -> Result<Complex64> {
    let row = probe_row(probe)?;
    let kex = cfg.mode(probe).kappa_ext;
    if !(kex > 0.0) {
        return Err(CeoError::Domain(format!(
            "{probe} has no external coupling; its reflection cannot be probed"
        )));
    }
    let d = probe_response_unchecked(cfg, g, omega, probe)?;
    Ok(d[row] / kex.sqrt())
}

/// Effective susceptibility of `probe` from a direct dense solve of the full
/// system: `a_probe = sqrt(kappa_ex) chi_eff a_in`.
pub fn effective_susceptibility_matrix(cfg: &SystemConfig, g: f64, omega: f64, probe: ModeLabel) -> Result<Complex64> {
    ensure_valid(cfg)?;
    if !probe.is_probe() {
        return Err(CeoError::Domain(format!("{probe} is not a probe mode")));
    }
    effective_chi_unchecked(cfg, g, omega, probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_response::susceptibility::{bare_susceptibility, closed_form_chi_e, ResponseParams};
    use crate::model::{hz, Configuration, ModeSpec};

    fn cfg(configuration: Configuration) -> SystemConfig {
        let optical = ModeSpec::from_hz(ModeLabel::Stokes, 26e6, 10e6, 0.0).unwrap();
        let mw = ModeSpec::from_hz(ModeLabel::Microwave, 10e6, 4e6, 0.0).unwrap();
        SystemConfig::uniform(configuration, optical, hz(7.6e6), mw, hz(30.0), hz(26e6))
    }

    #[test]
    fn uncoupled_matrix_is_diagonal() {
        let m = build_system_matrix(&cfg(Configuration::Symmetric), 0.0, 1.3e7).unwrap();
        for r in 0..10 {
            for c in 0..10 {
                if r != c {
                    assert_eq!(m[(r, c)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn frequency_enters_only_on_diagonal() {
        let mut c = cfg(Configuration::StokesCase);
        c.stokes.detuning = hz(0.3e6);
        c.anti_stokes.detuning = hz(-0.2e6);
        c.microwave.detuning = hz(0.05e6);
        let g = hz(5e6);
        let m0 = build_system_matrix(&c, g, 0.0).unwrap();
        for w in [-2.1e8, -3.3e6, 4.4e7, 9.0e8] {
            let m = build_system_matrix(&c, g, w).unwrap();
            let d = m - m0;
            for r in 0..10 {
                for k in 0..10 {
                    let expect = if r == k { Complex64::new(0.0, -w) } else { Complex64::new(0.0, 0.0) };
                    assert!((d[(r, k)] - expect).norm() <= 1e-15 * w.abs().max(1.0) * 4.0);
                }
            }
        }
    }

    #[test]
    fn coupling_pattern() {
        let mut c = cfg(Configuration::StokesCase);
        c.j_s = hz(3e6); // not a valid case, only the layout is inspected
        let g = 2.0;
        let m = system_matrix_unchecked(&c, g, 0.0);
        let i = Complex64::i();
        let (js, jas) = (c.j_s, c.j_as);
        // (row, col) in 1-based indexing of the amplitude ordering
        let expected = [
            ((1, 5), -i * js),
            ((1, 10), i * g),
            ((2, 6), i * js),
            ((2, 9), -i * g),
            ((3, 7), -i * jas),
            ((3, 9), i * g),
            ((4, 8), i * jas),
            ((4, 10), -i * g),
            ((5, 1), -i * js),
            ((6, 2), i * js),
            ((7, 3), -i * jas),
            ((8, 4), i * jas),
            ((9, 2), i * g),
            ((9, 3), i * g),
            ((10, 1), -i * g),
            ((10, 4), -i * g),
        ];
        let mut seen = 0;
        for r in 0..10 {
            for k in 0..10 {
                if r == k {
                    continue;
                }
                match expected.iter().find(|((er, ec), _)| *er == r + 1 && *ec == k + 1) {
                    Some((_, v)) => {
                        assert_eq!(m[(r, k)], *v, "entry ({}, {})", r + 1, k + 1);
                        seen += 1;
                    }
                    None => assert_eq!(m[(r, k)], Complex64::new(0.0, 0.0), "entry ({}, {})", r + 1, k + 1),
                }
            }
        }
        assert_eq!(seen, expected.len());
        assert_eq!(m[(0, 8)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn input_matrix_structure() {
        let mut c = cfg(Configuration::AntiStokesCase);
        c.anti_stokes.kappa_ext = hz(7e6);
        c.microwave.kappa_ext = hz(3e6);
        let l = build_input_matrix(&c).unwrap();
        for r in 0..10 {
            let nz = (0..16).filter(|&k| l[(r, k)].norm() > 0.0).count();
            if (4..8).contains(&r) {
                assert_eq!(nz, 1, "TM row {r}");
            } else {
                assert!(nz <= 2);
            }
        }
        assert_eq!(l[(0, 0)].re, c.stokes.kappa_ext.sqrt());
        assert_eq!(l[(1, 3)].re, c.stokes.kappa_intrinsic().sqrt());
        assert_eq!(l[(3, 5)].re, c.anti_stokes.kappa_ext.sqrt());
        assert_eq!(l[(2, 6)].re, c.anti_stokes.kappa_intrinsic().sqrt());
        assert_eq!(l[(5, 9)].re, c.stokes_tm.kappa_total.sqrt());
        assert_eq!(l[(7, 11)].re, c.anti_stokes_tm.kappa_total.sqrt());
        assert_eq!(l[(8, 12)].re, c.microwave.kappa_ext.sqrt());
        assert_eq!(l[(9, 15)].re, c.microwave.kappa_intrinsic().sqrt());

        c.stokes.kappa_ext = c.stokes.kappa_total;
        c.anti_stokes.kappa_ext = c.anti_stokes.kappa_total;
        c.microwave.kappa_ext = c.microwave.kappa_total;
        let l = build_input_matrix(&c).unwrap();
        for (r, k) in [(0, 2), (1, 3), (2, 6), (3, 7), (8, 14), (9, 15)] {
            assert_eq!(l[(r, k)].norm(), 0.0);
        }
    }

    #[test]
    fn decoupled_limit_equals_bare() {
        let mut c = cfg(Configuration::Symmetric);
        c.stokes.detuning = hz(1e6);
        for probe in [ModeLabel::Stokes, ModeLabel::AntiStokes, ModeLabel::Microwave] {
            for w in [-5e7, 0.0, 2e7] {
                let chi = effective_susceptibility_matrix(&c, 0.0, w, probe).unwrap();
                let m = c.mode(probe);
                let bare = bare_susceptibility(m.kappa_total, w + m.detuning);
                assert!((chi - bare).norm() / bare.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_point_is_reported() {
        let c = cfg(Configuration::StokesCase);
        // inv(g) = inv0 - g^2 x is linear in g^2; locate its zero at W = 0
        let g_ref = c.g_for_cooperativity(1.0);
        let p = ResponseParams::from_config(&c, g_ref);
        let inv_ref = closed_form_chi_e(Configuration::StokesCase, &p, 0.0).unwrap().inv();
        let inv0 = c.microwave.kappa_total / 2.0;
        let x = (inv0 - inv_ref.re) / (g_ref * g_ref);
        let g2 = inv0 / x;
        let err = effective_susceptibility_matrix(&c, g2.sqrt(), 0.0, ModeLabel::Microwave).unwrap_err();
        assert!(matches!(err, CeoError::Singular { .. }), "{err:?}");
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = cfg(Configuration::Symmetric);
        c.j_s = 1.0;
        assert!(build_system_matrix(&c, 0.0, 0.0).is_err());
        assert!(build_input_matrix(&c).is_err());
        let c = cfg(Configuration::Symmetric);
        assert!(effective_susceptibility_matrix(&c, 0.0, 0.0, ModeLabel::Pump).is_err());
    }
}
