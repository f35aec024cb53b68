//! Seeded synthetic datasets with recorded ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::joint::microwave_shift_model;
use crate::error::{CeoError, Result};
use crate::freq_response::{dba_shifts, spectrum_sweep, DbaShift, Spectrum};
use crate::model::{validate_config, Configuration, ModeLabel, SystemConfig};

/// Multiplicative Gaussian noise on normalized reflection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub relative_sigma: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel::default()
    }

    /// `sigma = 10^(-snr/20)`.
    pub fn from_snr_db(snr_db: f64) -> Self {
        NoiseModel {
            relative_sigma: 10f64.powf(-snr_db / 20.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub probe: ModeLabel,
    /// Probe detunings, rad/s.
    pub omegas: Vec<f64>,
    pub cooperativities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub spectra: Vec<Spectrum>,
    pub cooperativities: Vec<f64>,
    pub g_values: Vec<f64>,
    /// Analytic microwave shifts per cooperativity (Stokes and anti-Stokes cases).
    pub shifts: Option<Vec<DbaShift>>,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// `values * (1 + sigma n)` with standard normal `n` drawn from a seeded stream.
pub fn relative_noise(values: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return values.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values
        .iter()
        .map(|v| {
            let n: f64 = rng.sample(StandardNormal);
            v * (1.0 + sigma * n)
        })
        .collect()
}

fn check_noise(noise: &NoiseModel) -> Result<()> {
    if !(noise.relative_sigma >= 0.0) || !noise.relative_sigma.is_finite() {
        return Err(CeoError::Config("relative noise must be finite and >= 0".into()));
    }
    Ok(())
}

/// Normalized reflection spectra from the full matrix model, one per cooperativity.
/// Noisy spectra carry only `R`; noiseless ones keep the complex reflection.
pub fn generate_synthetic_dataset(
    cfg: &SystemConfig,
    sweep: &SweepSpec,
    noise: NoiseModel,
    seed: u64,
) -> Result<SyntheticDataset> {
    validate_config(cfg).into_result()?;
    check_noise(&noise)?;
    if sweep.cooperativities.iter().any(|c| !(*c >= 0.0)) {
        return Err(CeoError::Config("cooperativities must be >= 0".into()));
    }
    let g_values: Vec<f64> = sweep.cooperativities.iter().map(|&c| cfg.g_for_cooperativity(c)).collect();
    let mut spectra = Vec::with_capacity(g_values.len());
    for (i, &g) in g_values.iter().enumerate() {
        let mut s = spectrum_sweep(cfg, g, &sweep.omegas, sweep.probe)?;
        if noise.relative_sigma > 0.0 {
            let clean = s.r_values.take().unwrap_or_default();
            s.r_values = Some(relative_noise(&clean, noise.relative_sigma, seed.wrapping_add(i as u64)));
            s.s_complex = None;
        }
        spectra.push(s);
    }
    let shifts = match cfg.configuration {
        Configuration::Symmetric => None,
        case => Some(
            g_values
                .iter()
                .map(|&g| {
                    dba_shifts(
                        case,
                        g,
                        cfg.reference_optical().kappa_total,
                        match case {
                            Configuration::StokesCase => cfg.anti_stokes_tm.kappa_total,
                            _ => cfg.stokes_tm.kappa_total,
                        },
                        cfg.j_s.max(cfg.j_as),
                        cfg.stokes.detuning,
                        cfg.anti_stokes.detuning,
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(SyntheticDataset {
        spectra,
        cooperativities: sweep.cooperativities.clone(),
        g_values,
        shifts,
        noise,
        seed,
    })
}

/// Normalized microwave spectra of a mode with prescribed `(d_omega, d_kappa)` shifts.
pub fn microwave_shift_dataset(
    kappa: f64,
    kappa_ext: f64,
    shifts: &[DbaShift],
    omegas: &[f64],
    noise: NoiseModel,
    seed: u64,
) -> Result<Vec<Spectrum>> {
    check_noise(&noise)?;
    shifts
        .iter()
        .enumerate()
        .map(|(i, sh)| {
            let r = omegas
                .iter()
                .map(|&x| microwave_shift_model(kappa, kappa_ext, sh.delta_omega_e, sh.delta_kappa_e, x))
                .collect::<Result<Vec<f64>>>()?;
            Spectrum::from_r(omegas.to_vec(), relative_noise(&r, noise.relative_sigma, seed.wrapping_add(i as u64)))
        })
        .collect()
}
