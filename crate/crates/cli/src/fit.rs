//! `ceo fit`: estimation recipes over CSV data.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::json;

use ceo_core::estimation::{
    delayed_backaction_fit, eoia_zero_cooperativity, joint_stationary_microwave_fit, joint_stationary_optical_fit,
    lorentzian_reflection_fit, split_mode_fit, transient_fit, BounceStatus, DelayedOptions, FitOptions, FitResult,
    FitStatus, OpticalJointOptions, Weighting,
};
use ceo_core::io::{
    load_config, read_reflection_map, read_spectrum, read_trace, sha256_hex, FitReport, InputDigest, RunConfig,
    SpectrumData, VERSION,
};
use ceo_core::time_domain::TraceKind;
use ceo_core::{to_hz, CeoError, ModeLabel};

use crate::output::{self, CliError, OutputDir};
use crate::{Outcome, Probe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Recipe {
    Lorentzian,
    SplitMode,
    JointMicrowave,
    JointOptical,
    Transient,
    Delayed,
}

impl Recipe {
    fn name(self) -> &'static str {
        match self {
            Recipe::Lorentzian => "lorentzian",
            Recipe::SplitMode => "split_mode",
            Recipe::JointMicrowave => "joint_microwave",
            Recipe::JointOptical => "joint_optical",
            Recipe::Transient => "transient",
            Recipe::Delayed => "delayed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Unit,
    Relative,
    /// Use the `sigma` column of each spectrum.
    Sigma,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct FitArgs {
    #[arg(value_enum)]
    recipe: Recipe,
    /// Spectrum CSVs, a reflection map (transient) or a trace (delayed).
    #[arg(required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Residual weighting; defaults to `sigma` when every spectrum has that column, else `unit`.
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    /// Optical probe for joint-optical and transient fits.
    #[arg(long, value_enum)]
    probe: Option<Probe>,
    /// Pump powers per spectrum, W (joint-optical).
    #[arg(long, value_delimiter = ',')]
    powers: Option<Vec<f64>>,
    /// Fit every n-th time slice (transient).
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// First time slice, s (transient).
    #[arg(long)]
    t_min: Option<f64>,
    /// Last time slice, s (transient).
    #[arg(long)]
    t_max: Option<f64>,
    /// Pump pulse end, s (delayed); defaults to the configured pulse.
    #[arg(long)]
    pulse_end: Option<f64>,
}

struct Input {
    digest: InputDigest,
    bytes: Vec<u8>,
}

fn read_input(path: &Path) -> Result<Input, CeoError> {
    let bytes = std::fs::read(path).map_err(|e| CeoError::Io(format!("{}: {e}", path.display())))?;
    Ok(Input {
        digest: InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        },
        bytes,
    })
}

fn with_path<T>(path: &Path, r: Result<T, CeoError>) -> Result<T, CeoError> {
    r.map_err(|e| match e {
        CeoError::Parse(m) => CeoError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn require_config<'a>(rc: &'a Option<RunConfig>, recipe: Recipe) -> Result<&'a RunConfig, CeoError> {
    rc.as_ref()
        .ok_or_else(|| CeoError::Validation(vec![format!("fit {} requires --config", recipe.name())]))
}

fn fit_options(arg: Option<WeightingArg>, data: &[SpectrumData]) -> Result<FitOptions, CeoError> {
    let sigma = || -> Option<Vec<f64>> {
        data.iter()
            .map(|d| d.sigma.clone())
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat())
    };
    let weighting = match arg {
        Some(WeightingArg::Unit) => Weighting::Unit,
        Some(WeightingArg::Relative) => Weighting::Relative,
        Some(WeightingArg::Sigma) => Weighting::Sigma(
            sigma().ok_or_else(|| CeoError::Validation(vec!["--weighting sigma needs a sigma column in every spectrum".into()]))?,
        ),
        None => sigma().map_or(Weighting::Unit, Weighting::Sigma),
    };
    Ok(FitOptions {
        weighting,
        ..FitOptions::default()
    })
}

fn optical_probe(flag: Option<Probe>, rc: &RunConfig, fallback: Option<ModeLabel>) -> Result<ModeLabel, CeoError> {
    let probe = flag
        .map(ModeLabel::from)
        .or(fallback)
        .or_else(|| rc.sweep.as_ref().map(|s| s.probe))
        .unwrap_or(ModeLabel::Stokes);
    match probe {
        ModeLabel::Stokes | ModeLabel::AntiStokes => Ok(probe),
        other => Err(CeoError::Validation(vec![format!("an optical probe is required (got {other})")])),
    }
}

fn status_outcome(converged: bool) -> Outcome {
    if converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    }
}

fn report(recipe: Recipe, result: &FitResult, rates: &[&str], inputs: &[Input], rc: &Option<RunConfig>) -> FitReport {
    FitReport::new(recipe.name(), result, |n| {
        rates.iter().any(|r| n == *r || (r.ends_with('_') && n.starts_with(r)))
    })
    .with_inputs(inputs.iter().map(|i| i.digest.clone()).collect())
    .with_config(rc.as_ref().map(|c| c.digest.clone()))
}

pub fn run(a: FitArgs, out_dir: Option<PathBuf>) -> Result<Outcome, CliError> {
    let rc = a.config.as_ref().map(load_config).transpose()?;
    if a.stride == 0 {
        return Err(CeoError::Validation(vec!["--stride must be >= 1".into()]).into());
    }
    let single = matches!(a.recipe, Recipe::Lorentzian | Recipe::SplitMode | Recipe::Transient | Recipe::Delayed);
    if single && a.data.len() != 1 {
        return Err(CeoError::Validation(vec![format!(
            "fit {} takes exactly one data file (got {})",
            a.recipe.name(),
            a.data.len()
        )])
        .into());
    }
    let inputs = a.data.iter().map(|p| read_input(p)).collect::<Result<Vec<_>, _>>()?;
    let spectra = || -> Result<Vec<SpectrumData>, CeoError> {
        inputs
            .iter()
            .zip(&a.data)
            .map(|(i, p)| with_path(p, read_spectrum(i.bytes.as_slice())))
            .collect()
    };
    let (json, outcome) = match a.recipe {
        Recipe::Lorentzian => {
            let data = spectra()?;
            let f = lorentzian_reflection_fit(&data[0].spectrum, &fit_options(a.weighting, &data)?)?;
            let r = report(a.recipe, &f.result, &["kappa", "center"], &inputs, &rc)
                .derive("kappa_ext_hz", to_hz(f.kappa_ext))
                .derive("kappa_ext_ci95_hz", to_hz(f.kappa_ext_ci));
            (r.to_json(), status_outcome(f.result.is_converged()))
        }
        Recipe::SplitMode => {
            let data = spectra()?;
            let f = split_mode_fit(&data[0].spectrum, &fit_options(a.weighting, &data)?)?;
            let r = report(a.recipe, &f.result, &["kappa", "delta_o", "kappa_tm", "delta_tm", "j"], &inputs, &rc)
                .derive("kappa_ext_hz", to_hz(f.params.kappa_ext))
                .derive("starts", f.starts as f64);
            (r.to_json(), status_outcome(f.result.is_converged()))
        }
        Recipe::JointMicrowave => {
            let cfg = require_config(&rc, a.recipe)?;
            let data = spectra()?;
            let specs: Vec<_> = data.iter().map(|d| d.spectrum.clone()).collect();
            let mw = &cfg.system.microwave;
            let f = joint_stationary_microwave_fit(&specs, (mw.kappa_total, mw.kappa_ext), &fit_options(a.weighting, &data)?)?;
            let r = report(a.recipe, &f.result, &["kappa_e", "kappa_e_ext", "d_omega_", "d_kappa_"], &inputs, &rc);
            (r.to_json(), status_outcome(f.result.is_converged()))
        }
        Recipe::JointOptical => {
            let cfg = require_config(&rc, a.recipe)?;
            let data = spectra()?;
            let specs: Vec<_> = data.iter().map(|d| d.spectrum.clone()).collect();
            let mut opts = OpticalJointOptions::new(optical_probe(a.probe, cfg, None)?);
            opts.fit = fit_options(a.weighting, &data)?;
            opts.powers = a.powers.clone().or_else(|| {
                cfg.sweep
                    .as_ref()
                    .filter(|s| s.powers.len() == specs.len())
                    .map(|s| s.powers.clone())
            });
            let f = joint_stationary_optical_fit(&specs, &cfg.system, &opts)?;
            let (c0, c0_ci) = eoia_zero_cooperativity(&f);
            let r = report(a.recipe, &f.result, &["kappa_o", "kappa_o_ext", "delta_"], &inputs, &rc)
                .derive("eoia_zero_cooperativity", c0)
                .derive("eoia_zero_cooperativity_ci95", c0_ci);
            (r.to_json(), status_outcome(f.result.is_converged()))
        }
        Recipe::Transient => {
            let cfg = require_config(&rc, a.recipe)?;
            let probe = optical_probe(a.probe, cfg, cfg.time.as_ref().map(|t| t.probe))?;
            let map = with_path(&a.data[0], read_reflection_map(inputs[0].bytes.as_slice()))?;
            let lo = a.t_min.unwrap_or(f64::NEG_INFINITY);
            let hi = a.t_max.unwrap_or(f64::INFINITY);
            let slices = map
                .times
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= lo && t <= hi)
                .step_by(a.stride)
                .map(|(k, &t)| Ok((t, map.slice(k)?)))
                .collect::<Result<Vec<_>, CeoError>>()?;
            let weighting = match a.weighting {
                Some(WeightingArg::Relative) => Weighting::Relative,
                Some(WeightingArg::Sigma) => {
                    return Err(CeoError::Validation(vec!["reflection maps carry no sigma column".into()]).into())
                }
                _ => Weighting::Unit,
            };
            let opts = FitOptions {
                weighting,
                ..FitOptions::default()
            };
            let f = transient_fit(&slices, &cfg.system, probe, &opts)?;
            let rows: Vec<_> = (0..f.times.len())
                .map(|k| {
                    json!({
                        "t_s": f.times[k],
                        "cooperativity": f.cooperativity[k],
                        "cooperativity_ci95": f.cooperativity_ci[k],
                        "delta_hz": to_hz(f.delta[k]),
                        "delta_ci95_hz": to_hz(f.delta_ci[k]),
                        "status": f.status[k],
                        "flagged": f.flagged[k],
                    })
                })
                .collect();
            let n_flagged = f.flagged.iter().filter(|x| **x).count();
            let v = json!({
                "tool": "ceo",
                "version": VERSION,
                "recipe": a.recipe.name(),
                "config_sha256": cfg.digest,
                "inputs": inputs.iter().map(|i| &i.digest).collect::<Vec<_>>(),
                "probe": probe.name(),
                "n_flagged": n_flagged,
                "slices": rows,
            });
            (pretty(&v), status_outcome(n_flagged == 0))
        }
        Recipe::Delayed => {
            let trace = with_path(&a.data[0], read_trace(inputs[0].bytes.as_slice(), TraceKind::Reflection))?;
            let t_end = a
                .pulse_end
                .or_else(|| rc.as_ref().and_then(|c| c.pulse.as_ref()).map(|p| p.t_end()))
                .ok_or_else(|| CeoError::Validation(vec!["fit delayed needs --pulse-end or a configured pulse".into()]))?;
            let f = delayed_backaction_fit(&trace, t_end, &DelayedOptions::default())?;
            let fit = f.result.as_ref().map(|res| {
                serde_json::to_value(report(a.recipe, res, &[], &inputs, &rc)).unwrap_or_default()
            });
            let converged = f.status == BounceStatus::Flat || f.result.as_ref().is_some_and(|r| r.status == FitStatus::Converged);
            let v = json!({
                "tool": "ceo",
                "version": VERSION,
                "recipe": a.recipe.name(),
                "config_sha256": rc.as_ref().map(|c| c.digest.clone()),
                "inputs": inputs.iter().map(|i| &i.digest).collect::<Vec<_>>(),
                "pulse_end_s": t_end,
                "bounce_status": f.status,
                "t_ex_s": f.t_ex,
                "tau_ex_s": f.tau_ex,
                "tau_ex_ci95_s": f.tau_ex_ci,
                "amplitude": f.amplitude,
                "warnings": f.warnings,
                "fit": fit,
            });
            (pretty(&v), status_outcome(converged))
        }
    };
    let path = match a.out {
        Some(p) => p,
        None => match &rc {
            Some(c) => OutputDir::resolve(out_dir, c)?,
            None => OutputDir::without_config(out_dir)?,
        }
        .file(&format!("fit_{}.json", a.recipe.name())),
    };
    output::write_text(&path, &json)?;
    output::print_outputs(&[path]);
    Ok(outcome)
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}
