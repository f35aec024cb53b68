//! Run configuration: Hz on disk, rad/s in memory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sha256_hex;
use crate::error::{CeoError, Result};
use crate::freq_response::linear_grid;
use crate::model::{hz, to_hz, validate_config, Configuration, ModeLabel, ModeSpec, SystemConfig, TWO_PI};
use crate::time_domain::pulse::{DEFAULT_RISE_TIME, DEFAULT_WAVELENGTH};
use crate::time_domain::{Detection, PulseShape, PulseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeFile {
    pub kappa_hz: f64,
    pub kappa_ext_hz: f64,
    #[serde(default)]
    pub detuning_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmModeFile {
    pub kappa_hz: f64,
    #[serde(default)]
    pub detuning_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub configuration: Configuration,
    pub stokes: ModeFile,
    pub pump: ModeFile,
    pub anti_stokes: ModeFile,
    pub stokes_tm: TmModeFile,
    pub anti_stokes_tm: TmModeFile,
    pub microwave: ModeFile,
    pub g0_hz: f64,
    #[serde(default)]
    pub j_s_hz: f64,
    #[serde(default)]
    pub j_as_hz: f64,
    /// Optical free spectral range; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fsr_hz: Option<f64>,
}

fn default_rise() -> f64 {
    DEFAULT_RISE_TIME
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_power_w: Option<f64>,
    #[serde(default = "default_rise")]
    pub rise_time_s: f64,
    #[serde(default)]
    pub shape: PulseShape,
    #[serde(default)]
    pub t_start_s: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub probe: ModeLabel,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_points: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub powers_w: Vec<f64>,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

fn default_if() -> f64 {
    40e6
}
fn default_rate() -> f64 {
    1e9
}
fn one() -> f64 {
    1.0
}
fn default_window() -> f64 {
    100e-9
}
fn one_repeat() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    #[serde(default = "default_if")]
    pub if_hz: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window_s: f64,
    #[serde(default = "one_repeat")]
    pub n_repeats: usize,
}

impl Default for DetectionFile {
    fn default() -> Self {
        DetectionFile {
            if_hz: default_if(),
            sample_rate_hz: default_rate(),
            gain: 1.0,
            noise_std: 0.0,
            seed: 0,
            window_s: default_window(),
            n_repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeFile {
    pub t_stop_s: f64,
    pub dt_s: f64,
    pub probe: ModeLabel,
    pub probe_offsets_hz: Vec<f64>,
    /// Baseline window for temporal normalization; defaults to the span before the pulse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_s: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

/// On-disk run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub system: SystemFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputsFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub probe: ModeLabel,
    /// Probe detunings, rad/s.
    pub omegas: Vec<f64>,
    pub cooperativities: Vec<f64>,
    pub powers: Vec<f64>,
    pub wavelength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_stop: f64,
    pub dt: f64,
    pub probe: ModeLabel,
    /// Probe detunings, rad/s.
    pub probe_offsets: Vec<f64>,
    pub baseline: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub prefix: String,
}

/// Validated run configuration in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub fsr: Option<f64>,
    pub pulse: Option<PulseSpec>,
    pub sweep: Option<SweepConfig>,
    pub detection: Detection,
    pub time: Option<TimeConfig>,
    pub outputs: OutputConfig,
    /// SHA-256 of the configuration text.
    pub digest: String,
}

fn mode(label: ModeLabel, m: &ModeFile) -> ModeSpec {
    ModeSpec {
        kappa_total: hz(m.kappa_hz),
        kappa_ext: hz(m.kappa_ext_hz),
        detuning: hz(m.detuning_hz),
        label,
    }
}

fn tm_mode(label: ModeLabel, m: &TmModeFile) -> ModeSpec {
    ModeSpec {
        kappa_total: hz(m.kappa_hz),
        kappa_ext: 0.0,
        detuning: hz(m.detuning_hz),
        label,
    }
}

impl SystemFile {
    pub fn to_system(&self) -> SystemConfig {
        SystemConfig {
            stokes: mode(ModeLabel::Stokes, &self.stokes),
            pump_mode: mode(ModeLabel::Pump, &self.pump),
            anti_stokes: mode(ModeLabel::AntiStokes, &self.anti_stokes),
            stokes_tm: tm_mode(ModeLabel::StokesTm, &self.stokes_tm),
            anti_stokes_tm: tm_mode(ModeLabel::AntiStokesTm, &self.anti_stokes_tm),
            microwave: mode(ModeLabel::Microwave, &self.microwave),
            g0: hz(self.g0_hz),
            j_s: hz(self.j_s_hz),
            j_as: hz(self.j_as_hz),
            configuration: self.configuration,
            pump: None,
        }
    }

    pub fn from_system(cfg: &SystemConfig, fsr: Option<f64>) -> Self {
        let m = |s: &ModeSpec| ModeFile {
            kappa_hz: to_hz(s.kappa_total),
            kappa_ext_hz: to_hz(s.kappa_ext),
            detuning_hz: to_hz(s.detuning),
        };
        let t = |s: &ModeSpec| TmModeFile {
            kappa_hz: to_hz(s.kappa_total),
            detuning_hz: to_hz(s.detuning),
        };
        SystemFile {
            configuration: cfg.configuration,
            stokes: m(&cfg.stokes),
            pump: m(&cfg.pump_mode),
            anti_stokes: m(&cfg.anti_stokes),
            stokes_tm: t(&cfg.stokes_tm),
            anti_stokes_tm: t(&cfg.anti_stokes_tm),
            microwave: m(&cfg.microwave),
            g0_hz: to_hz(cfg.g0),
            j_s_hz: to_hz(cfg.j_s),
            j_as_hz: to_hz(cfg.j_as),
            fsr_hz: fsr.map(to_hz),
        }
    }
}

impl RunConfigFile {
    /// Converts to internal units, collecting every violation.
    pub fn into_run_config(self, digest: String) -> Result<RunConfig> {
        let mut errors = Vec::new();
        let system = self.system.to_system();
        errors.extend(validate_config(&system).violations.into_iter().map(|v| format!("system.{v}")));
        if let Some(f) = self.system.fsr_hz {
            if !(f > 0.0) {
                errors.push(format!("system.fsr_hz must be > 0 (got {f})"));
            }
        }
        let pulse = match self.pulse {
            None => None,
            Some(PulseFile {
                duration_s: None,
                peak_power_w: None,
                ..
            }) => None,
            Some(p) => match (p.duration_s, p.peak_power_w) {
                (Some(d), Some(w)) => {
                    let spec = PulseSpec {
                        duration: d,
                        peak_power: w,
                        rise_time: p.rise_time_s,
                        shape: p.shape,
                        t_start: p.t_start_s,
                        wavelength: p.wavelength_m,
                    };
                    match spec.validate() {
                        Ok(()) => Some(spec),
                        Err(e) => {
                            errors.push(format!("pulse: {e}"));
                            None
                        }
                    }
                }
                (None, _) => {
                    errors.push("pulse.duration_s is missing".into());
                    None
                }
                (_, None) => {
                    errors.push("pulse.peak_power_w is missing".into());
                    None
                }
            },
        };
        let sweep = self.sweep.map(|s| {
            if !(s.f_min_hz < s.f_max_hz) || !s.f_min_hz.is_finite() || !s.f_max_hz.is_finite() {
                errors.push(format!(
                    "sweep.f_min_hz must be below sweep.f_max_hz (got {} and {})",
                    s.f_min_hz, s.f_max_hz
                ));
            }
            if s.n_points < 2 {
                errors.push(format!("sweep.n_points must be >= 2 (got {})", s.n_points));
            }
            if !s.probe.is_probe() {
                errors.push(format!("sweep.probe must be stokes, anti_stokes or microwave (got {})", s.probe));
            }
            if s.c_values.iter().any(|c| !(*c >= 0.0)) {
                errors.push("sweep.c_values must be >= 0".into());
            }
            if s.powers_w.iter().any(|p| !(*p >= 0.0)) {
                errors.push("sweep.powers_w must be >= 0".into());
            }
            SweepConfig {
                probe: s.probe,
                omegas: linear_grid(hz(s.f_min_hz), hz(s.f_max_hz), s.n_points),
                cooperativities: s.c_values,
                powers: s.powers_w,
                wavelength: s.wavelength_m,
            }
        });
        let d = self.detection.unwrap_or_default();
        if !(d.if_hz > 0.0) {
            errors.push(format!("detection.if_hz must be > 0 (got {})", d.if_hz));
        }
        if !(d.sample_rate_hz >= 10.0 * d.if_hz) {
            errors.push(format!(
                "detection.sample_rate_hz must be >= 10 x if_hz (got {} for IF {})",
                d.sample_rate_hz, d.if_hz
            ));
        }
        if !(d.noise_std >= 0.0) {
            errors.push(format!("detection.noise_std must be >= 0 (got {})", d.noise_std));
        }
        if !(d.if_hz > 0.0 && d.window_s >= 1.0 / d.if_hz) {
            errors.push(format!("detection.window_s must cover one IF period (got {})", d.window_s));
        }
        let detection = Detection {
            if_freq: TWO_PI * d.if_hz,
            sample_rate: d.sample_rate_hz,
            gain: d.gain,
            noise_std: d.noise_std,
            seed: d.seed,
            window: d.window_s,
            n_repeats: d.n_repeats.max(1),
        };
        let time = self.time.map(|t| {
            if !(t.dt_s > 0.0) || !(t.t_stop_s > t.dt_s) {
                errors.push(format!(
                    "time requires 0 < dt_s < t_stop_s (got dt_s = {}, t_stop_s = {})",
                    t.dt_s, t.t_stop_s
                ));
            }
            if !t.probe.is_probe() {
                errors.push(format!("time.probe must be a probe mode (got {})", t.probe));
            }
            if t.probe_offsets_hz.is_empty() {
                errors.push("time.probe_offsets_hz is empty".into());
            }
            TimeConfig {
                t_stop: t.t_stop_s,
                dt: t.dt_s,
                probe: t.probe,
                probe_offsets: t.probe_offsets_hz.iter().map(|&f| hz(f)).collect(),
                baseline: t.baseline_s.map(|b| (b[0], b[1])),
            }
        });
        let outputs = self.outputs.unwrap_or_default();
        if let Some(dir) = &outputs.dir {
            if dir.exists() && !dir.is_dir() {
                errors.push(format!("outputs.dir {} is not a directory", dir.display()));
            }
        }
        if !errors.is_empty() {
            return Err(CeoError::Validation(errors));
        }
        Ok(RunConfig {
            system,
            fsr: self.system.fsr_hz.map(hz),
            pulse,
            sweep,
            detection,
            time,
            outputs: OutputConfig {
                dir: outputs.dir,
                prefix: outputs.prefix.unwrap_or_else(|| "ceo".into()),
            },
            digest,
        })
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: RunConfigFile = serde_json::from_str(text)
        .map_err(|e| CeoError::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
    file.into_run_config(sha256_hex(text.as_bytes()))
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CeoError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CeoError::Parse(m) => CeoError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "system": {
        "configuration": "symmetric",
        "stokes": {"kappa_hz": 26e6, "kappa_ext_hz": 10e6},
        "pump": {"kappa_hz": 26e6, "kappa_ext_hz": 10e6},
        "anti_stokes": {"kappa_hz": 26e6, "kappa_ext_hz": 10e6},
        "stokes_tm": {"kappa_hz": 7.6e6},
        "anti_stokes_tm": {"kappa_hz": 7.6e6},
        "microwave": {"kappa_hz": 10e6, "kappa_ext_hz": 4e6},
        "g0_hz": 30.0
      }
    }"#;

    #[test]
    fn minimal_config_converts_units_once() {
        let rc = parse_config(MINIMAL).unwrap();
        assert_eq!(rc.system.microwave.kappa_total, hz(10e6));
        assert_eq!(rc.system.g0, hz(30.0));
        assert!(rc.pulse.is_none() && rc.sweep.is_none());
        assert_eq!(rc.digest.len(), 64);
        let back = SystemFile::from_system(&rc.system, None);
        assert!((back.microwave.kappa_hz - 10e6).abs() < 1e-6);
    }

    #[test]
    fn unknown_key_is_rejected_with_position() {
        let bad = MINIMAL.replace("\"g0_hz\"", "\"g0_hertz\"");
        match parse_config(&bad) {
            Err(CeoError::Parse(m)) => assert!(m.contains("line"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rate_names_field() {
        let bad = MINIMAL.replace("\"kappa_hz\": 10e6", "\"kappa_hz\": -10e6");
        match parse_config(&bad) {
            Err(CeoError::Validation(v)) => assert!(v.iter().any(|m| m.contains("microwave.kappa_total")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_pulse_section_is_stationary() {
        let text = MINIMAL.replacen("\"system\"", "\"pulse\": {}, \"system\"", 1);
        assert!(parse_config(&text).unwrap().pulse.is_none());
        let text = MINIMAL.replacen("\"system\"", "\"pulse\": {\"duration_s\": 2.5e-7}, \"system\"", 1);
        assert!(matches!(parse_config(&text), Err(CeoError::Validation(_))));
    }
}
