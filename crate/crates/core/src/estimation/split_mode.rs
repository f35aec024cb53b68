//! TE mode hybridized with a dark TM partner.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{FitProblem, FitResult, ParamSpec};
use super::lorentzian::initial_guess;
use super::{power_values, solve, FitOptions};
use crate::error::{CeoError, Result};
use crate::freq_response::Spectrum;
use crate::model::{ModeLabel, ModeSpec};

/// Split-mode parameters, rad/s. Detunings follow the mode convention
/// `kappa/2 - i(omega + delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitModeParams {
    pub kappa: f64,
    pub kappa_ext: f64,
    pub delta_o: f64,
    pub kappa_tm: f64,
    pub delta_tm: f64,
    pub j: f64,
}

/// `S = 1 - kappa_ext / (kappa/2 - i(w + d_o) + J^2 / (kappa_tm/2 - i(w + d_tm)))`.
pub fn split_mode_reflection(p: &SplitModeParams, omega: f64) -> Complex64 {
    let tm = Complex64::new(0.5 * p.kappa_tm, -(omega + p.delta_tm));
    let te = Complex64::new(0.5 * p.kappa, -(omega + p.delta_o));
    1.0 - p.kappa_ext / (te + p.j * p.j / tm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitModeFit {
    pub te: ModeSpec,
    pub tm: ModeSpec,
    pub j: f64,
    pub scale: f64,
    pub params: SplitModeParams,
    pub result: FitResult,
    /// Number of starting points tried.
    pub starts: usize,
}

const NAMES: [&str; 7] = ["kappa", "eta", "delta_o", "kappa_tm", "delta_tm", "j", "scale"];

fn unpack(p: &[f64]) -> SplitModeParams {
    SplitModeParams {
        kappa: p[0],
        kappa_ext: p[1] * p[0],
        delta_o: p[2],
        kappa_tm: p[3],
        delta_tm: p[4],
        j: p[5],
    }
}

/// Fits the hybridized reflection `|S|^2` with a grid of starting points and
/// keeps the lowest cost.
pub fn split_mode_fit(spectrum: &Spectrum, options: &FitOptions) -> Result<SplitModeFit> {
    let y = power_values(spectrum)?;
    let omega = &spectrum.frequencies;
    if y.len() < 10 {
        return Err(CeoError::Fit("split-mode fit needs at least 10 points".into()));
    }
    options.weighting.check(y.len())?;
    let (k0, eta0, c0, bg0) = initial_guess(omega, &y);
    let span = omega[omega.len() - 1] - omega[0];
    let k0 = k0.min(span);
    let mut starts = Vec::new();
    for jf in [0.15, 0.4, 0.8, 1.5] {
        for df in [-0.5, 0.0, 0.5] {
            for tf in [0.3, 1.0] {
                starts.push([
                    k0,
                    eta0.clamp(0.02, 0.48),
                    -c0,
                    tf * k0,
                    -c0 + df * k0,
                    jf * k0,
                    bg0,
                ]);
            }
        }
    }
    let y = &y;
    let fits: Vec<Result<FitResult>> = starts
        .par_iter()
        .map(|s| {
            let params = vec![
                ParamSpec::new(NAMES[0], s[0], 1e-4 * k0, 10.0 * span).with_scale(k0),
                ParamSpec::new(NAMES[1], s[1], 0.0, 0.5).with_scale(0.1),
                ParamSpec::unbounded(NAMES[2], s[2]).with_scale(k0),
                ParamSpec::new(NAMES[3], s[3], 1e-4 * k0, 10.0 * span).with_scale(k0),
                ParamSpec::unbounded(NAMES[4], s[4]).with_scale(k0),
                ParamSpec::new(NAMES[5], s[5], 0.0, 10.0 * span).with_scale(k0),
                ParamSpec::new(NAMES[6], s[6], 0.0, f64::INFINITY).with_scale(bg0),
            ];
            solve(options, y, 0, |w| {
                FitProblem::new(params.clone(), move |p: &[f64]| {
                    let sp = unpack(p);
                    Ok(omega
                        .iter()
                        .zip(y)
                        .enumerate()
                        .map(|(i, (&x, &yi))| w.residual(i, yi, p[6] * split_mode_reflection(&sp, x).norm_sqr()))
                        .collect())
                })
            })
        })
        .collect();
    let n_starts = fits.len();
    let best = fits
        .into_iter()
        .filter_map(|f| f.ok())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| CeoError::Fit("no split-mode start produced a fit".into()))?;
    let params = unpack(&best.estimates);
    Ok(SplitModeFit {
        te: ModeSpec {
            kappa_total: params.kappa,
            kappa_ext: params.kappa_ext,
            detuning: params.delta_o,
            label: ModeLabel::Stokes,
        },
        tm: ModeSpec {
            kappa_total: params.kappa_tm,
            kappa_ext: 0.0,
            detuning: params.delta_tm,
            label: ModeLabel::StokesTm,
        },
        j: params.j,
        scale: best.estimates[6],
        params,
        result: best,
        starts: n_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::lorentzian::lorentzian_reflection_fit;
    use crate::freq_response::{linear_grid, Frame};
    use crate::model::hz;

    pub(crate) fn table_mode(row: usize) -> SplitModeParams {
        let v = [
            [34.6, 8.9, -17.8, 7.6, -18.5, 26.0],
            [24.7, 9.8, 5.0, 17.4, 28.3, 13.0],
            [24.3, 9.2, -3.9, 30.0, -18.7, 10.0],
        ][row];
        SplitModeParams {
            kappa: hz(v[0] * 1e6),
            kappa_ext: hz(v[1] * 1e6),
            delta_o: hz(v[2] * 1e6),
            kappa_tm: hz(v[3] * 1e6),
            delta_tm: hz(v[4] * 1e6),
            j: hz(v[5] * 1e6),
        }
    }

    fn spectrum(p: &SplitModeParams) -> Spectrum {
        let w = linear_grid(hz(-150e6), hz(150e6), 601);
        let y = w.iter().map(|&x| split_mode_reflection(p, x).norm_sqr()).collect();
        Spectrum::new(w, None, Some(y), Frame::RotatingProbe).unwrap()
    }

    fn check(truth: &SplitModeParams, fit: &SplitModeParams, tol: f64) {
        let pairs = [
            (truth.kappa, fit.kappa),
            (truth.kappa_ext, fit.kappa_ext),
            (truth.delta_o, fit.delta_o),
            (truth.kappa_tm, fit.kappa_tm),
            (truth.delta_tm, fit.delta_tm),
            (truth.j, fit.j),
        ];
        for (k, (a, b)) in pairs.iter().enumerate() {
            assert!((b / a - 1.0).abs() < tol, "{}: truth {a:e}, fit {b:e}", NAMES[k]);
        }
    }

    #[test]
    fn table_modes_round_trip() {
        for row in 0..3 {
            let truth = table_mode(row);
            let f = split_mode_fit(&spectrum(&truth), &FitOptions::default()).unwrap();
            check(&truth, &f.params, 1e-4);
        }
    }

    #[test]
    fn zero_coupling_reduces_to_lorentzian() {
        let truth = SplitModeParams {
            j: 0.0,
            ..table_mode(1)
        };
        let s = spectrum(&truth);
        let f = split_mode_fit(&s, &FitOptions::default()).unwrap();
        let l = lorentzian_reflection_fit(&s, &FitOptions::default()).unwrap();
        assert!(f.j < 0.01 * truth.kappa, "J = {:e}", f.j);
        assert!((f.te.kappa_total / l.kappa - 1.0).abs() < 1e-3);
        assert!((f.te.kappa_ext / l.kappa_ext - 1.0).abs() < 1e-3);
        assert!((f.te.detuning + l.center).abs() < 1e-3 * l.kappa);
    }
}
