//! `ceo`: simulate, sweep, pulse, fit and validate from the command line.

mod fit;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ceo_core::freq_response::{effective_susceptibility_matrix, linear_grid, spectrum_sweep, DbaShift};
use ceo_core::io::{load_config, write_dba_summary, write_reflection_map, write_spectrum, write_trace, Header, RunConfig};
use ceo_core::time_domain::pulse::DEFAULT_WAVELENGTH;
use ceo_core::time_domain::{
    coupling_trace, measured_reflection, pump_loading, reflection_map, ProbeTone, TimeGrid, Timeline,
};
use ceo_core::{hz, to_hz, CeoError, ModeLabel, PumpDrive, SystemConfig};

use output::{emit_error, CliError, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "ceo", version, about = "Cavity electro-optic back-action simulator and fit toolkit")]
struct Cli {
    /// Output directory (overrides the config and CEO_OUTPUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary spectrum of one probe at one operating point.
    Simulate(SimulateArgs),
    /// Spectra over a cooperativity list plus the microwave back-action summary.
    Sweep(SweepArgs),
    /// Pump loading and time-resolved reflection for the configured pulse.
    Pulse(PulseArgs),
    /// Run an estimation recipe on data files and write a JSON report.
    Fit(fit::FitArgs),
    /// Check a configuration file.
    Validate { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum Probe {
    Stokes,
    AntiStokes,
    Microwave,
}

impl From<Probe> for ModeLabel {
    fn from(p: Probe) -> Self {
        match p {
            Probe::Stokes => ModeLabel::Stokes,
            Probe::AntiStokes => ModeLabel::AntiStokes,
            Probe::Microwave => ModeLabel::Microwave,
        }
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Lower probe detuning, Hz.
    #[arg(long, requires_all = ["f_max_hz", "n_points"])]
    f_min_hz: Option<f64>,
    /// Upper probe detuning, Hz.
    #[arg(long, requires_all = ["f_min_hz", "n_points"])]
    f_max_hz: Option<f64>,
    #[arg(long, requires_all = ["f_min_hz", "f_max_hz"])]
    n_points: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    config: PathBuf,
    #[arg(long, value_enum)]
    probe: Option<Probe>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, conflicts_with = "power", required_unless_present = "power")]
    c_value: Option<f64>,
    /// Pump power, W.
    #[arg(long)]
    power: Option<f64>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    config: PathBuf,
    #[arg(long, value_enum)]
    probe: Option<Probe>,
    #[command(flatten)]
    grid: GridArgs,
    /// Comma-separated cooperativities; defaults to the config sweep list.
    #[arg(long, value_delimiter = ',')]
    c_list: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct PulseArgs {
    config: PathBuf,
    /// Pass each probe through heterodyne detection and down-conversion.
    #[arg(long)]
    detect: bool,
}

pub(crate) enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            emit_error(&err);
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(3),
        Err(e) => {
            emit_error(&e);
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Simulate(a) => simulate(a, out_dir),
        Command::Sweep(a) => sweep(a, out_dir),
        Command::Pulse(a) => pulse(a, out_dir),
        Command::Fit(a) => fit::run(a, out_dir),
    }
}

fn validate(path: &Path) -> Result<Outcome, CliError> {
    let rc = load_config(path)?;
    let report = json!({
        "valid": true,
        "config_sha256": rc.digest,
        "configuration": rc.system.configuration.name(),
        "sections": {
            "pulse": rc.pulse.is_some(),
            "sweep": rc.sweep.is_some(),
            "time": rc.time.is_some(),
        },
    });
    output::print_json(&report);
    Ok(Outcome::Done)
}

fn resolve_probe(flag: Option<Probe>, rc: &RunConfig) -> ModeLabel {
    flag.map(ModeLabel::from)
        .or_else(|| rc.sweep.as_ref().map(|s| s.probe))
        .unwrap_or(ModeLabel::Microwave)
}

/// Grid flags, else the configured sweep grid when it belongs to `probe`,
/// else `+-3 kappa` around the probe mode with 201 points.
fn frequency_grid(rc: &RunConfig, probe: ModeLabel, flags: &GridArgs) -> Result<Vec<f64>, CliError> {
    if let (Some(lo), Some(hi), Some(n)) = (flags.f_min_hz, flags.f_max_hz, flags.n_points) {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || n < 2 {
            return Err(CeoError::Validation(vec![format!(
                "grid needs f_min_hz < f_max_hz and n_points >= 2 (got {lo}, {hi}, {n})"
            )])
            .into());
        }
        return Ok(linear_grid(hz(lo), hz(hi), n));
    }
    Ok(match &rc.sweep {
        Some(s) if s.probe == probe => s.omegas.clone(),
        _ => {
            let k = rc.system.mode(probe).kappa_total;
            linear_grid(-3.0 * k, 3.0 * k, 201)
        }
    })
}

fn wavelength(rc: &RunConfig) -> f64 {
    rc.sweep
        .as_ref()
        .map(|s| s.wavelength)
        .or(rc.pulse.as_ref().map(|p| p.wavelength))
        .unwrap_or(DEFAULT_WAVELENGTH)
}

fn check_cooperativity(c: f64) -> Result<f64, CliError> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(CeoError::Validation(vec![format!("cooperativity must be finite and >= 0 (got {c})")]).into());
    }
    Ok(c)
}

fn header(rc: &RunConfig, command: &str) -> Header {
    Header::new(Some(rc.digest.clone()))
        .with("command", command)
        .with("configuration", rc.system.configuration.name())
}

fn simulate(a: SimulateArgs, out_dir: Option<PathBuf>) -> Result<Outcome, CliError> {
    let rc = load_config(&a.config)?;
    let probe = resolve_probe(a.probe, &rc);
    let (c, g) = match (a.c_value, a.power) {
        (Some(c), _) => {
            let c = check_cooperativity(c)?;
            (c, rc.system.g_for_cooperativity(c))
        }
        (None, Some(p)) => {
            let g = PumpDrive::from_power(&rc.system, p, wavelength(&rc))?.g_enhanced;
            (rc.system.cooperativity_at(g)?, g)
        }
        (None, None) => unreachable!("clap requires --c-value or --power"),
    };
    let spectrum = spectrum_sweep(&rc.system, g, &frequency_grid(&rc, probe, &a.grid)?, probe)?;
    let dir = OutputDir::resolve(out_dir, &rc)?;
    let path = a.out.unwrap_or_else(|| dir.file(&format!("simulate_{}.csv", probe.name())));
    let h = header(&rc, "simulate")
        .with("probe", probe.name())
        .with("cooperativity", format!("{c:e}"))
        .with("g_hz", format!("{:e}", to_hz(g)));
    output::write_file(&path, |w| write_spectrum(w, &spectrum, &h))?;
    output::print_outputs(&[path]);
    Ok(Outcome::Done)
}

/// Microwave shifts read off `chi_e,eff^-1(0)` relative to the uncoupled mode.
fn microwave_shift(cfg: &SystemConfig, g: f64) -> Result<DbaShift, CeoError> {
    let on = effective_susceptibility_matrix(cfg, g, 0.0, ModeLabel::Microwave)?;
    let off = effective_susceptibility_matrix(cfg, 0.0, 0.0, ModeLabel::Microwave)?;
    let d = 1.0 / on - 1.0 / off;
    Ok(DbaShift {
        delta_omega_e: d.im,
        delta_kappa_e: 2.0 * d.re,
    })
}

fn sweep(a: SweepArgs, out_dir: Option<PathBuf>) -> Result<Outcome, CliError> {
    let rc = load_config(&a.config)?;
    let probe = resolve_probe(a.probe, &rc);
    let cs: Vec<f64> = match (a.c_list, &rc.sweep) {
        (Some(l), _) => l,
        (None, Some(s)) if !s.cooperativities.is_empty() => s.cooperativities.clone(),
        (None, Some(s)) if !s.powers.is_empty() => s
            .powers
            .iter()
            .map(|&p| rc.system.cooperativity_at(PumpDrive::from_power(&rc.system, p, s.wavelength)?.g_enhanced))
            .collect::<Result<_, CeoError>>()?,
        _ => {
            return Err(CeoError::Validation(vec![
                "no cooperativities: pass --c-list or set sweep.c_values or sweep.powers_w".into(),
            ])
            .into())
        }
    };
    for &c in &cs {
        check_cooperativity(c)?;
    }
    let grid = frequency_grid(&rc, probe, &a.grid)?;
    let dir = OutputDir::resolve(out_dir, &rc)?;
    let mut written = Vec::new();
    let mut summary = Vec::with_capacity(cs.len());
    for (i, &c) in cs.iter().enumerate() {
        let g = rc.system.g_for_cooperativity(c);
        let spectrum = spectrum_sweep(&rc.system, g, &grid, probe)?;
        let path = dir.file(&format!("sweep_{}_{i:03}.csv", probe.name()));
        let h = header(&rc, "sweep")
            .with("probe", probe.name())
            .with("cooperativity", format!("{c:e}"))
            .with("g_hz", format!("{:e}", to_hz(g)));
        output::write_file(&path, |w| write_spectrum(w, &spectrum, &h))?;
        written.push(path);
        summary.push((c, microwave_shift(&rc.system, g)?));
    }
    let path = dir.file("dba_summary.csv");
    output::write_file(&path, |w| write_dba_summary(w, &summary, &header(&rc, "sweep")))?;
    written.push(path);
    output::print_outputs(&written);
    Ok(Outcome::Done)
}

fn pulse(a: PulseArgs, out_dir: Option<PathBuf>) -> Result<Outcome, CliError> {
    let rc = load_config(&a.config)?;
    let mut missing = Vec::new();
    if rc.pulse.is_none() {
        missing.push("pulse section with duration_s and peak_power_w is required".to_string());
    }
    if rc.time.is_none() {
        missing.push("time section is required".to_string());
    }
    let (Some(spec), Some(time)) = (&rc.pulse, &rc.time) else {
        return Err(CeoError::Validation(missing).into());
    };
    let baseline = time.baseline.unwrap_or((0.0, spec.t_start));
    if !(baseline.1 - baseline.0 >= time.dt) {
        return Err(CeoError::Validation(vec![format!(
            "time.baseline_s must span at least one sample (got [{}, {}])",
            baseline.0, baseline.1
        )])
        .into());
    }
    let grid = TimeGrid::span(0.0, time.t_stop, time.dt)?;
    let photons = pump_loading(&rc.system, spec, &grid)?;
    let g = coupling_trace(&rc.system, &photons)?;
    let timeline = Timeline::new(rc.system.clone(), g)?;
    let rows = if a.detect {
        time.probe_offsets
            .iter()
            .map(|&w| measured_reflection(&timeline, ProbeTone::new(time.probe, w), &rc.detection, baseline))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        reflection_map(&timeline, time.probe, &time.probe_offsets, baseline)?
    };
    let dir = OutputDir::resolve(out_dir, &rc)?;
    let h = header(&rc, "pulse")
        .with("probe", time.probe.name())
        .with("baseline_s", format!("{:e},{:e}", baseline.0, baseline.1))
        .with("detected", a.detect.to_string());
    let p_photons = dir.file("pump_photons.csv");
    output::write_file(&p_photons, |w| write_trace(w, &photons, &h.clone().with("quantity", "pump photon number")))?;
    let p_map = dir.file("reflection_map.csv");
    output::write_file(&p_map, |w| write_reflection_map(w, &time.probe_offsets, &rows, &h))?;
    output::print_outputs(&[p_photons, p_map]);
    Ok(Outcome::Done)
}
