//! Least-squares engine and fit recipes.

pub mod delayed;
pub mod joint;
pub mod lm;
pub mod lorentzian;
pub mod split_mode;
pub mod synthetic;
pub mod transient;

use serde::{Deserialize, Serialize};

use crate::error::{CeoError, Result};
use crate::freq_response::Spectrum;

pub use delayed::{delayed_backaction_fit, BounceStatus, DelayedFit, DelayedOptions};
pub use joint::{
    eoia_zero_cooperativity, joint_stationary_microwave_fit, joint_stationary_optical_fit, microwave_shift_model,
    optical_model, MicrowaveJointFit, OpticalJointFit, OpticalJointOptions, ShiftEstimate,
};
pub use lm::{least_squares, FitProblem, FitResult, FitStatus, LmOptions, ParamRole, ParamSpec};
pub use lorentzian::{lorentzian_model, lorentzian_reflection_fit, LorentzianFit};
pub use split_mode::{split_mode_fit, split_mode_reflection, SplitModeFit, SplitModeParams};
pub use synthetic::{
    generate_synthetic_dataset, microwave_shift_dataset, relative_noise, NoiseModel, SweepSpec, SyntheticDataset,
};
pub use transient::{transient_fit, TransientFit};

/// How data-model differences are turned into residuals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "sigma")]
pub enum Weighting {
    /// `y - m`.
    #[default]
    Unit,
    /// `(y - m) / m`; suited to multiplicative noise.
    Relative,
    /// `(y - m) / sigma_i`, one entry per data point over all datasets in order.
    Sigma(Vec<f64>),
}

impl Weighting {
    pub(crate) fn check(&self, n: usize) -> Result<()> {
        if let Weighting::Sigma(s) = self {
            if s.len() != n {
                return Err(CeoError::Fit(format!("{} sigma values for {n} data points", s.len())));
            }
            if s.iter().any(|v| !(*v > 0.0)) {
                return Err(CeoError::Fit("sigma values must be > 0".into()));
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn residual(&self, index: usize, data: f64, model: f64) -> f64 {
        match self {
            Weighting::Unit => data - model,
            Weighting::Relative => (data - model) / model,
            Weighting::Sigma(s) => (data - model) / s[index],
        }
    }
}

const REWEIGHT_PASSES: usize = 3;

/// Solves the problem built for `options.weighting`. Relative weighting is
/// iterated: the model of the previous pass is frozen as the per-point scale,
/// which keeps the scale itself out of the minimization. `data` holds the
/// observations behind residuals `offset..offset + data.len()`.
pub(crate) fn solve<'a>(
    options: &FitOptions,
    data: &[f64],
    offset: usize,
    build: impl Fn(Weighting) -> Result<FitProblem<'a>>,
) -> Result<FitResult> {
    let problem = build(options.weighting.clone())?;
    let mut result = least_squares(&problem, &options.lm)?;
    if options.weighting != Weighting::Relative {
        return Ok(result);
    }
    drop(problem);
    let mut scale = vec![1.0; offset + data.len()];
    for _ in 0..REWEIGHT_PASSES {
        let model = {
            let relative = build(Weighting::Relative)?;
            relative.evaluate(&result.estimates)?
        };
        for (k, (y, r)) in data.iter().zip(&model).enumerate() {
            scale[offset + k] = (y / (1.0 + r)).abs();
        }
        if scale.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            break;
        }
        let problem = build(Weighting::Sigma(scale.clone()))?.starting_at(&result.estimates);
        match least_squares(&problem, &options.lm) {
            Ok(next) => result = next,
            Err(_) => break,
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    pub weighting: Weighting,
    pub lm: LmOptions,
}

impl FitOptions {
    pub fn relative() -> Self {
        FitOptions {
            weighting: Weighting::Relative,
            ..FitOptions::default()
        }
    }
}

/// `|S|^2` when complex data is present, otherwise the stored reflection values.
pub(crate) fn power_values(s: &Spectrum) -> Result<Vec<f64>> {
    s.power()
        .or_else(|| s.r_values.clone())
        .ok_or_else(|| CeoError::Fit("spectrum carries no reflection data".into()))
}

/// Normalized reflection values, falling back to `|S|^2`.
pub(crate) fn r_values(s: &Spectrum) -> Result<Vec<f64>> {
    s.r_values
        .clone()
        .or_else(|| s.power())
        .ok_or_else(|| CeoError::Fit("spectrum carries no reflection data".into()))
}

/// Variance of `f(a, b)` from its gradient and the covariance of `(a, b)`.
pub(crate) fn propagate_variance(result: &FitResult, a: &str, b: &str, da: f64, db: f64) -> f64 {
    let vaa = result.cov(a, a).unwrap_or(0.0);
    let vbb = result.cov(b, b).unwrap_or(0.0);
    let vab = result.cov(a, b).unwrap_or(0.0);
    (da * da * vaa + db * db * vbb + 2.0 * da * db * vab).max(0.0)
}

/// Two-sided 95 % Student-t factor for `dof` degrees of freedom.
pub(crate) fn t_factor(dof: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    StudentsT::new(0.0, 1.0, dof.max(1) as f64)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(1.959964)
}
