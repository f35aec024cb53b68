//! Mode and system descriptions shared by every other module.
//!
//! All rates and frequencies are stored as angular quantities (rad/s). Files and
//! the command line speak ordinary frequency (Hz, i.e. `kappa / 2pi`); use
//! [`hz`] and [`to_hz`] at the boundary.
//!
//! Detuning convention: a mode with detuning `delta` has inverse susceptibility
//! `kappa/2 - i(Omega + delta)` on its annihilation row of the response matrix,
//! so `delta` is the offset of the rotating frame (sideband or probe) from the
//! mode resonance.

use serde::{Deserialize, Serialize};

use crate::error::{CeoError, Result};

pub const TWO_PI: f64 = std::f64::consts::TAU;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts an ordinary frequency in Hz to an angular rate in rad/s.
#[inline]
pub fn hz(nu: f64) -> f64 {
    TWO_PI * nu
}

/// Converts an angular rate in rad/s to Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    Stokes,
    Pump,
    AntiStokes,
    StokesTm,
    AntiStokesTm,
    Microwave,
}

impl ModeLabel {
    pub fn name(self) -> &'static str {
        match self {
            ModeLabel::Stokes => "stokes",
            ModeLabel::Pump => "pump",
            ModeLabel::AntiStokes => "anti_stokes",
            ModeLabel::StokesTm => "stokes_tm",
            ModeLabel::AntiStokesTm => "anti_stokes_tm",
            ModeLabel::Microwave => "microwave",
        }
    }

    /// True for the three externally probed modes.
    pub fn is_probe(self) -> bool {
        matches!(
            self,
            ModeLabel::Stokes | ModeLabel::AntiStokes | ModeLabel::Microwave
        )
    }
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One resonator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Total loss rate, rad/s.
    pub kappa_total: f64,
    /// External (port) coupling rate, rad/s. Any spatial-overlap factor is folded in here.
    pub kappa_ext: f64,
    /// Frame-minus-mode offset, rad/s.
    pub detuning: f64,
    pub label: ModeLabel,
}

impl ModeSpec {
    /// Builds a mode and checks `0 <= kappa_ext <= kappa_total`, `kappa_total > 0`.
    pub fn new(label: ModeLabel, kappa_total: f64, kappa_ext: f64, detuning: f64) -> Result<Self> {
        let m = ModeSpec {
            kappa_total,
            kappa_ext,
            detuning,
            label,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks the rate invariants of an existing mode.
    pub fn validate(&self) -> Result<()> {
        let problems = self.violations();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CeoError::Validation(problems))
        }
    }

    /// Same as [`ModeSpec::new`] with arguments in Hz.
    pub fn from_hz(label: ModeLabel, kappa_hz: f64, kappa_ext_hz: f64, detuning_hz: f64) -> Result<Self> {
        Self::new(label, hz(kappa_hz), hz(kappa_ext_hz), hz(detuning_hz))
    }

    /// Intrinsic loss rate `kappa_total - kappa_ext`.
    pub fn kappa_intrinsic(&self) -> f64 {
        (self.kappa_total - self.kappa_ext).max(0.0)
    }

    /// External coupling efficiency `eta = kappa_ext / kappa_total`.
    pub fn eta(&self) -> f64 {
        self.kappa_ext / self.kappa_total
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let name = self.label.name();
        if !self.kappa_total.is_finite() || self.kappa_total <= 0.0 {
            v.push(format!("{name}.kappa_total must be > 0 (got {})", self.kappa_total));
        }
        if !self.kappa_ext.is_finite() || self.kappa_ext < 0.0 {
            v.push(format!("{name}.kappa_ext must be >= 0 (got {})", self.kappa_ext));
        }
        if self.kappa_ext > self.kappa_total {
            v.push(format!(
                "{name}.kappa_ext ({}) exceeds kappa_total ({})",
                self.kappa_ext, self.kappa_total
            ));
        }
        if !self.detuning.is_finite() {
            v.push(format!("{name}.detuning must be finite"));
        }
        v
    }
}

/// Which optical sideband is left free to scatter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    /// Both sidebands active, no TE-TM hybridization.
    Symmetric,
    /// Anti-Stokes branch suppressed by its TM partner (`j_s = 0`, `j_as > 0`).
    StokesCase,
    /// Stokes branch suppressed by its TM partner (`j_as = 0`, `j_s > 0`).
    AntiStokesCase,
}

impl Configuration {
    pub fn name(self) -> &'static str {
        match self {
            Configuration::Symmetric => "symmetric",
            Configuration::StokesCase => "stokes_case",
            Configuration::AntiStokesCase => "anti_stokes_case",
        }
    }
}

/// Classical pump drive. `g_enhanced = g0 * sqrt(photon_number)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpDrive {
    /// Peak input power, W. Zero when the photon number was supplied directly.
    pub peak_power: f64,
    /// Vacuum wavelength, m.
    pub wavelength: f64,
    pub photon_number: f64,
    /// Pump-enhanced coupling rate, rad/s.
    pub g_enhanced: f64,
}

impl PumpDrive {
    pub fn from_photon_number(g0: f64, photon_number: f64) -> Result<Self> {
        if !(photon_number >= 0.0) {
            return Err(CeoError::Domain(format!(
                "photon number must be >= 0 (got {photon_number})"
            )));
        }
        Ok(PumpDrive {
            peak_power: 0.0,
            wavelength: 0.0,
            photon_number,
            g_enhanced: g0 * photon_number.sqrt(),
        })
    }

    /// Loads the pump mode of `cfg` on resonance with `power` watts.
    pub fn from_power(cfg: &SystemConfig, power: f64, wavelength: f64) -> Result<Self> {
        let pm = &cfg.pump_mode;
        let n = intracavity_pump_photons(power, wavelength, pm.kappa_total, pm.kappa_ext)?;
        Ok(PumpDrive {
            peak_power: power,
            wavelength,
            photon_number: n,
            g_enhanced: cfg.g0 * n.sqrt(),
        })
    }

    /// Drive that realizes cooperativity `c` for `cfg` (photon number back-computed from g0).
    pub fn from_cooperativity(cfg: &SystemConfig, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(CeoError::Domain(format!("cooperativity must be >= 0 (got {c})")));
        }
        let g = cfg.g_for_cooperativity(c);
        let n = if cfg.g0 > 0.0 { (g / cfg.g0).powi(2) } else { 0.0 };
        Ok(PumpDrive {
            peak_power: 0.0,
            wavelength: 0.0,
            photon_number: n,
            g_enhanced: g,
        })
    }
}

/// The five optical modes, the microwave mode and their couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub stokes: ModeSpec,
    pub pump_mode: ModeSpec,
    pub anti_stokes: ModeSpec,
    /// Dark TM partner of the Stokes mode; only `kappa_total` and `detuning` are used.
    pub stokes_tm: ModeSpec,
    pub anti_stokes_tm: ModeSpec,
    pub microwave: ModeSpec,
    /// Vacuum electro-optic coupling, rad/s.
    pub g0: f64,
    pub j_s: f64,
    pub j_as: f64,
    pub configuration: Configuration,
    /// Optional operating point, used for the instability warning.
    #[serde(default)]
    pub pump: Option<PumpDrive>,
}

impl SystemConfig {
    /// Optical mode whose loss enters the cooperativity for this configuration.
    pub fn reference_optical(&self) -> &ModeSpec {
        match self.configuration {
            Configuration::AntiStokesCase => &self.anti_stokes,
            Configuration::Symmetric | Configuration::StokesCase => &self.stokes,
        }
    }

    pub fn cooperativity_at(&self, g: f64) -> Result<f64> {
        cooperativity(g, self.reference_optical().kappa_total, self.microwave.kappa_total)
    }

    /// Inverse of [`SystemConfig::cooperativity_at`]: `g = sqrt(C kappa_o kappa_e) / 2`.
    pub fn g_for_cooperativity(&self, c: f64) -> f64 {
        (c.max(0.0) * self.reference_optical().kappa_total * self.microwave.kappa_total).sqrt() / 2.0
    }

    pub fn mode(&self, label: ModeLabel) -> &ModeSpec {
        match label {
            ModeLabel::Stokes => &self.stokes,
            ModeLabel::Pump => &self.pump_mode,
            ModeLabel::AntiStokes => &self.anti_stokes,
            ModeLabel::StokesTm => &self.stokes_tm,
            ModeLabel::AntiStokesTm => &self.anti_stokes_tm,
            ModeLabel::Microwave => &self.microwave,
        }
    }

    pub fn mode_mut(&mut self, label: ModeLabel) -> &mut ModeSpec {
        match label {
            ModeLabel::Stokes => &mut self.stokes,
            ModeLabel::Pump => &mut self.pump_mode,
            ModeLabel::AntiStokes => &mut self.anti_stokes,
            ModeLabel::StokesTm => &mut self.stokes_tm,
            ModeLabel::AntiStokesTm => &mut self.anti_stokes_tm,
            ModeLabel::Microwave => &mut self.microwave,
        }
    }

    /// Builds a configuration where every optical TE mode shares `optical`
    /// (relabelled), TM partners sit at their TE partner's detuning.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        configuration: Configuration,
        optical: ModeSpec,
        tm_kappa: f64,
        microwave: ModeSpec,
        g0: f64,
        j: f64,
    ) -> Self {
        let (j_s, j_as) = match configuration {
            Configuration::Symmetric => (0.0, 0.0),
            Configuration::StokesCase => (0.0, j),
            Configuration::AntiStokesCase => (j, 0.0),
        };
        let relabel = |label| ModeSpec { label, ..optical };
        let tm = |label, detuning| ModeSpec {
            kappa_total: tm_kappa,
            kappa_ext: 0.0,
            detuning,
            label,
        };
        SystemConfig {
            stokes: relabel(ModeLabel::Stokes),
            pump_mode: ModeSpec {
                detuning: 0.0,
                ..relabel(ModeLabel::Pump)
            },
            anti_stokes: relabel(ModeLabel::AntiStokes),
            stokes_tm: tm(ModeLabel::StokesTm, optical.detuning),
            anti_stokes_tm: tm(ModeLabel::AntiStokesTm, optical.detuning),
            microwave: ModeSpec {
                label: ModeLabel::Microwave,
                ..microwave
            },
            g0,
            j_s,
            j_as,
            configuration,
            pump: None,
        }
    }
}

/// Multiphoton cooperativity `4 g^2 / (kappa_o kappa_e)` with `g = sqrt(n_p) g0`.
pub fn cooperativity(g: f64, kappa_o: f64, kappa_e: f64) -> Result<f64> {
    if !(kappa_o > 0.0) || !(kappa_e > 0.0) {
        return Err(CeoError::Domain(format!(
            "loss rates must be positive (kappa_o = {kappa_o}, kappa_e = {kappa_e})"
        )));
    }
    Ok(4.0 * g * g / (kappa_o * kappa_e))
}

/// Mean intracavity photon number of an on-resonance pump in steady state,
/// `n_p = 4 kappa_ext P / (hbar omega_p kappa_total^2)`.
pub fn intracavity_pump_photons(power: f64, wavelength: f64, kappa_total: f64, kappa_ext: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(CeoError::Domain(format!("wavelength must be > 0 (got {wavelength})")));
    }
    if !(kappa_total > 0.0) {
        return Err(CeoError::Domain(format!("kappa_total must be > 0 (got {kappa_total})")));
    }
    if !(power >= 0.0) {
        return Err(CeoError::Domain(format!("power must be >= 0 (got {power})")));
    }
    if !(0.0..=kappa_total).contains(&kappa_ext) {
        return Err(CeoError::Domain(format!(
            "kappa_ext must lie in [0, kappa_total] (got {kappa_ext})"
        )));
    }
    let omega_p = TWO_PI * SPEED_OF_LIGHT / wavelength;
    Ok(4.0 * kappa_ext * power / (HBAR * omega_p * kappa_total * kappa_total))
}

/// Outcome of [`validate_config`]. Empty `violations` means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(CeoError::Validation(self.violations))
        }
    }
}

/// Lists every violated invariant of `cfg`.
pub fn validate_config(cfg: &SystemConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    for m in [
        &cfg.stokes,
        &cfg.pump_mode,
        &cfg.anti_stokes,
        &cfg.stokes_tm,
        &cfg.anti_stokes_tm,
        &cfg.microwave,
    ] {
        report.violations.extend(m.violations());
    }
    for (label, m) in [
        (ModeLabel::Stokes, &cfg.stokes),
        (ModeLabel::Pump, &cfg.pump_mode),
        (ModeLabel::AntiStokes, &cfg.anti_stokes),
        (ModeLabel::StokesTm, &cfg.stokes_tm),
        (ModeLabel::AntiStokesTm, &cfg.anti_stokes_tm),
        (ModeLabel::Microwave, &cfg.microwave),
    ] {
        if m.label != label {
            report
                .violations
                .push(format!("{} slot holds a mode labelled {}", label, m.label));
        }
    }
    for m in [&cfg.stokes_tm, &cfg.anti_stokes_tm] {
        if m.kappa_ext != 0.0 {
            report
                .violations
                .push(format!("{}.kappa_ext must be 0 (TM modes are dark)", m.label));
        }
    }
    for (name, v) in [("g0", cfg.g0), ("j_s", cfg.j_s), ("j_as", cfg.j_as)] {
        if !v.is_finite() || v < 0.0 {
            report.violations.push(format!("{name} must be >= 0 (got {v})"));
        }
    }
    match cfg.configuration {
        Configuration::Symmetric => {
            if cfg.j_s != 0.0 || cfg.j_as != 0.0 {
                report
                    .violations
                    .push("symmetric configuration requires j_s = j_as = 0".into());
            }
        }
        Configuration::StokesCase => {
            if cfg.j_s != 0.0 {
                report.violations.push("stokes_case requires j_s = 0".into());
            }
            if !(cfg.j_as > 0.0) {
                report.violations.push("stokes_case requires j_as > 0".into());
            }
        }
        Configuration::AntiStokesCase => {
            if cfg.j_as != 0.0 {
                report.violations.push("anti_stokes_case requires j_as = 0".into());
            }
            if !(cfg.j_s > 0.0) {
                report.violations.push("anti_stokes_case requires j_s > 0".into());
            }
        }
    }
    if let Some(p) = &cfg.pump {
        if !(p.photon_number >= 0.0) {
            report
                .violations
                .push(format!("pump.photon_number must be >= 0 (got {})", p.photon_number));
        }
        if cfg.configuration == Configuration::StokesCase && report.violations.is_empty() {
            if let Ok(c) = cfg.cooperativity_at(p.g_enhanced) {
                if c >= 1.0 {
                    report.warnings.push(format!(
                        "parametric instability: stokes_case cooperativity C = {c:.4} >= 1"
                    ));
                }
            }
        }
    }
    report
}
