use serde::{Deserialize, Serialize};

use super::trace::{TimeGrid, TimeTrace, TraceKind};
use crate::error::{CeoError, Result};
use crate::model::{SystemConfig, HBAR, SPEED_OF_LIGHT, TWO_PI};

pub const DEFAULT_RISE_TIME: f64 = 30e-9;
pub const DEFAULT_WAVELENGTH: f64 = 1550e-9;

/// Largest loading step relative to the pump-mode decay time.
const MAX_LOADING_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    Rectangular,
    /// Raised-cosine edges of length `rise_time` inside the pulse duration.
    #[default]
    SmoothedRectangular,
}

fn default_rise() -> f64 {
    DEFAULT_RISE_TIME
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}

/// Optical pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    /// Seconds.
    pub duration: f64,
    /// Watts.
    pub peak_power: f64,
    #[serde(default = "default_rise")]
    pub rise_time: f64,
    #[serde(default)]
    pub shape: PulseShape,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
}

impl PulseSpec {
    pub fn new(duration: f64, peak_power: f64, rise_time: f64, shape: PulseShape, t_start: f64) -> Result<Self> {
        let p = PulseSpec {
            duration,
            peak_power,
            rise_time,
            shape,
            t_start,
            wavelength: DEFAULT_WAVELENGTH,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.duration > 0.0) {
            v.push(format!("pulse.duration must be > 0 (got {})", self.duration));
        }
        if !(self.peak_power >= 0.0) {
            v.push(format!("pulse.peak_power must be >= 0 (got {})", self.peak_power));
        }
        if !(self.rise_time >= 0.0) {
            v.push(format!("pulse.rise_time must be >= 0 (got {})", self.rise_time));
        } else if !(self.rise_time < self.duration / 2.0) {
            v.push(format!(
                "pulse.rise_time must be < duration/2 (got {} for duration {})",
                self.rise_time, self.duration
            ));
        }
        if !(self.wavelength > 0.0) {
            v.push(format!("pulse.wavelength must be > 0 (got {})", self.wavelength));
        }
        if !self.t_start.is_finite() {
            v.push("pulse.t_start must be finite".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(CeoError::Validation(v))
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    /// Normalized power envelope in `[0, 1]`.
    pub fn envelope(&self, t: f64) -> f64 {
        let x = t - self.t_start;
        if x < 0.0 || x >= self.duration {
            return 0.0;
        }
        let r = self.rise_time;
        match self.shape {
            PulseShape::Rectangular => 1.0,
            PulseShape::SmoothedRectangular if r <= 0.0 => 1.0,
            PulseShape::SmoothedRectangular => {
                let edge = x.min(self.duration - x);
                if edge >= r {
                    1.0
                } else {
                    0.5 * (1.0 - (std::f64::consts::PI * edge / r).cos())
                }
            }
        }
    }

    /// Instantaneous input power, W.
    pub fn power(&self, t: f64) -> f64 {
        self.peak_power * self.envelope(t)
    }

    /// Input photon flux, 1/s.
    pub fn photon_flux(&self, t: f64) -> f64 {
        let omega_p = TWO_PI * SPEED_OF_LIGHT / self.wavelength;
        self.power(t) / (HBAR * omega_p)
    }
}

/// Peak input power that loads the pump mode to the photon number realizing cooperativity `c`.
pub fn power_for_cooperativity(cfg: &SystemConfig, c: f64, wavelength: f64) -> Result<f64> {
    if !(cfg.g0 > 0.0) {
        return Err(CeoError::Domain("g0 must be > 0 to convert cooperativity into power".into()));
    }
    if !(wavelength > 0.0) {
        return Err(CeoError::Domain(format!("wavelength must be > 0 (got {wavelength})")));
    }
    let pm = &cfg.pump_mode;
    if !(pm.kappa_ext > 0.0) {
        return Err(CeoError::Domain("pump mode has no external coupling".into()));
    }
    let n = (cfg.g_for_cooperativity(c) / cfg.g0).powi(2);
    let omega_p = TWO_PI * SPEED_OF_LIGHT / wavelength;
    Ok(n * HBAR * omega_p * pm.kappa_total.powi(2) / (4.0 * pm.kappa_ext))
}

/// Intracavity pump photon number `|a_p(t)|^2` from first-order cavity loading,
/// `da_p/dt = -(kappa/2) a_p + sqrt(kappa_ext) s_in(t)`, starting empty.
pub fn pump_loading(cfg: &SystemConfig, pulse: &PulseSpec, grid: &TimeGrid) -> Result<TimeTrace> {
    pulse.validate()?;
    let pm = &cfg.pump_mode;
    pm.validate()?;
    let kappa = pm.kappa_total;
    if grid.dt > MAX_LOADING_STEP / kappa {
        return Err(CeoError::Config(format!(
            "time step {:e} s under-resolves the pump mode (need dt <= {:e} s)",
            grid.dt,
            MAX_LOADING_STEP / kappa
        )));
    }
    let sk = pm.kappa_ext.sqrt();
    let f = |t: f64, a: f64| -0.5 * kappa * a + sk * pulse.photon_flux(t).sqrt();
    let h = grid.dt;
    let mut a = 0.0f64;
    let mut n = Vec::with_capacity(grid.n);
    for k in 0..grid.n {
        let t = grid.t(k);
        if k > 0 {
            let t0 = t - h;
            let k1 = f(t0, a);
            let k2 = f(t0 + h / 2.0, a + h / 2.0 * k1);
            let k3 = f(t0 + h / 2.0, a + h / 2.0 * k2);
            let k4 = f(t, a + h * k3);
            a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        n.push(a * a);
    }
    TimeTrace::real(grid.t0, grid.dt, n, TraceKind::PhotonNumber)
}

/// `g(t) = g0 sqrt(n_p(t))`.
pub fn coupling_trace(cfg: &SystemConfig, photons: &TimeTrace) -> Result<TimeTrace> {
    let n = photons.expect_real()?;
    let g: Vec<f64> = n.iter().map(|&x| cfg.g0 * x.max(0.0).sqrt()).collect();
    TimeTrace::real(photons.t0, photons.dt, g, TraceKind::Coupling)
}

/// Constant coupling `g` on `grid`.
pub fn constant_coupling(g: f64, grid: &TimeGrid) -> Result<TimeTrace> {
    TimeTrace::real(grid.t0, grid.dt, vec![g; grid.n], TraceKind::Coupling)
}
