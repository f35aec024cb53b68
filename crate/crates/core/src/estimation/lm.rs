//! Bound-constrained Levenberg-Marquardt least squares.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Free,
    /// Free, and common to several datasets of a joint fit.
    Shared,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub role: ParamRole,
    /// Typical magnitude; sets finite-difference steps and conditioning.
    pub scale: f64,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, initial: f64, lower: f64, upper: f64) -> Self {
        let scale = if initial != 0.0 {
            initial.abs()
        } else if lower.is_finite() && upper.is_finite() && upper > lower {
            0.01 * (upper - lower)
        } else {
            1.0
        };
        ParamSpec {
            name: name.into(),
            initial,
            lower,
            upper,
            role: ParamRole::Free,
            scale,
        }
    }

    pub fn unbounded(name: impl Into<String>, initial: f64) -> Self {
        ParamSpec::new(name, initial, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale.abs();
        self
    }

    pub fn with_role(mut self, role: ParamRole) -> Self {
        self.role = role;
        self
    }

    pub fn shared(self) -> Self {
        self.with_role(ParamRole::Shared)
    }

    pub fn fixed(self) -> Self {
        self.with_role(ParamRole::Fixed)
    }

    pub fn is_free(&self) -> bool {
        self.role != ParamRole::Fixed
    }

    fn project(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

pub type ResidualFn<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send + 'a>;

/// A residual vector as a function of a named parameter vector.
pub struct FitProblem<'a> {
    pub params: Vec<ParamSpec>,
    residual: ResidualFn<'a>,
}

impl<'a> FitProblem<'a> {
    pub fn new(params: Vec<ParamSpec>, residual: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send + 'a) -> Result<Self> {
        if !params.iter().any(ParamSpec::is_free) {
            return Err(CeoError::Fit("fit problem has no free parameter".into()));
        }
        for p in &params {
            if !(p.lower <= p.upper) {
                return Err(CeoError::Fit(format!("{}: empty bounds [{}, {}]", p.name, p.lower, p.upper)));
            }
            if !(p.initial >= p.lower && p.initial <= p.upper) || !p.initial.is_finite() {
                return Err(CeoError::Fit(format!(
                    "{}: initial value {} outside bounds [{}, {}]",
                    p.name, p.initial, p.lower, p.upper
                )));
            }
            if !(p.scale > 0.0) || !p.scale.is_finite() {
                return Err(CeoError::Fit(format!("{}: scale must be > 0", p.name)));
            }
        }
        Ok(FitProblem {
            params,
            residual: Box::new(residual),
        })
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = (self.residual)(x)?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(CeoError::Fit("residual is not finite".into()));
        }
        Ok(r)
    }

    /// Same problem started from `x`, clamped into the bounds.
    pub fn starting_at(mut self, x: &[f64]) -> Self {
        for (p, &v) in self.params.iter_mut().zip(x) {
            p.initial = v.clamp(p.lower, p.upper);
        }
        self
    }

    pub fn initial(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.initial).collect()
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..self.params.len()).filter(|&i| self.params[i].is_free()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative cost decrease below which an accepted step ends the fit.
    pub ftol: f64,
    /// Relative step size (in parameter scales) below which the fit ends.
    pub xtol: f64,
    /// Scaled gradient norm below which the fit ends.
    pub gtol: f64,
    pub initial_lambda: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Singular values below `rank_tol * s_max` count as null directions.
    pub rank_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            ftol: 1e-14,
            xtol: 1e-9,
            gtol: 1e-14,
            initial_lambda: 1e-3,
            fd_step: 1e-6,
            rank_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIter,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub roles: Vec<ParamRole>,
    /// All parameters, fixed ones included.
    pub estimates: Vec<f64>,
    /// 95 % confidence half-widths; zero for fixed parameters.
    pub ci_half_widths: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Covariance over the free parameters, in the order of `free_names`.
    pub covariance: Vec<Vec<f64>>,
    pub free_names: Vec<String>,
    /// Final sum of squared residuals.
    pub cost: f64,
    /// Cost after the initial evaluation and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub n_residuals: usize,
    pub dof: usize,
    pub status: FitStatus,
    /// Unit vectors (over free parameters, in scaled units) spanning the numerical null space.
    pub null_directions: Vec<Vec<f64>>,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.estimates[i])
    }

    pub fn ci(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.ci_half_widths[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }

    /// Whether `truth` lies inside the 95 % interval of `name`.
    pub fn covers(&self, name: &str, truth: f64) -> bool {
        match (self.get(name), self.ci(name)) {
            (Some(v), Some(h)) => (v - truth).abs() <= h,
            _ => false,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    /// Covariance of two free parameters.
    pub fn cov(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.free_names.iter().position(|n| n == a)?;
        let j = self.free_names.iter().position(|n| n == b)?;
        Some(self.covariance[i][j])
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

struct Workspace<'p, 'a> {
    problem: &'p FitProblem<'a>,
    free: Vec<usize>,
    opts: LmOptions,
}

impl Workspace<'_, '_> {
    /// Jacobian with respect to the free parameters; central differences,
    /// one-sided next to a bound.
    fn jacobian(&self, x: &[f64], r0: &[f64]) -> Result<DMatrix<f64>> {
        let m = r0.len();
        let cols: Vec<Result<Vec<f64>>> = self
            .free
            .par_iter()
            .map(|&i| {
                let p = &self.problem.params[i];
                let h = self.opts.fd_step * x[i].abs().max(p.scale);
                let up = x[i] + h <= p.upper;
                let down = x[i] - h >= p.lower;
                let eval = |v: f64| {
                    let mut xx = x.to_vec();
                    xx[i] = v;
                    self.problem.evaluate(&xx)
                };
                let rp = if up { eval(x[i] + h).ok() } else { None };
                let rm = if down { eval(x[i] - h).ok() } else { None };
                // one-sided at bounds or where the model is undefined on one side
                match (rp, rm) {
                    (Some(rp), Some(rm)) => Ok(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect()),
                    (Some(rp), None) => Ok(rp.iter().zip(r0).map(|(a, b)| (a - b) / h).collect()),
                    (None, Some(rm)) => Ok(r0.iter().zip(&rm).map(|(a, b)| (a - b) / h).collect()),
                    (None, None) if up || down => Err(CeoError::Fit(format!("{}: model undefined around {}", p.name, x[i]))),
                    (None, None) => Ok(vec![0.0; m]),
                }
            })
            .collect();
        let mut j = DMatrix::zeros(m, self.free.len());
        for (k, c) in cols.into_iter().enumerate() {
            let c = c?;
            if c.len() != m {
                return Err(CeoError::Fit("residual length changed between evaluations".into()));
            }
            j.set_column(k, &DVector::from_vec(c));
        }
        Ok(j)
    }
}

/// Minimizes the sum of squared residuals of `problem`.
pub fn least_squares(problem: &FitProblem, opts: &LmOptions) -> Result<FitResult> {
    let free = problem.free_indices();
    let n = free.len();
    let ws = Workspace {
        problem,
        free: free.clone(),
        opts: *opts,
    };
    let scales: Vec<f64> = free.iter().map(|&i| problem.params[i].scale).collect();
    let mut x = problem.initial();
    let mut r = problem.evaluate(&x)?;
    let m = r.len();
    if m < n {
        return Err(CeoError::Fit(format!(
            "{m} residuals cannot determine {n} free parameters"
        )));
    }
    let mut cost = sum_sq(&r);
    let mut trace = vec![cost];
    let mut lambda = opts.initial_lambda;
    let mut status = FitStatus::MaxIter;
    let mut iterations = 0;
    let mut jac = ws.jacobian(&x, &r)?;

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        // scaled parameters u = z / scale
        let js = DMatrix::from_fn(m, n, |a, b| jac[(a, b)] * scales[b]);
        let rv = DVector::from_column_slice(&r);
        let a = js.transpose() * &js;
        let g = js.transpose() * &rv;
        if cost == 0.0 || g.amax() <= opts.gtol * cost.sqrt() {
            status = FitStatus::Converged;
            break;
        }
        let dmax = (0..n).map(|k| a[(k, k)]).fold(0.0f64, f64::max);
        let floor = dmax.max(f64::MIN_POSITIVE) * 1e-12;
        let size: f64 = free
            .iter()
            .enumerate()
            .map(|(k, &i)| (x[i] / scales[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        // undamped Gauss-Newton first, then increasing damping
        let mut damping: Option<f64> = None;
        loop {
            let mut mat = a.clone();
            if let Some(l) = damping {
                for k in 0..n {
                    mat[(k, k)] += l * a[(k, k)].max(floor);
                }
            }
            let step = match mat.clone().cholesky() {
                Some(ch) => Some(ch.solve(&(-&g))),
                None => mat.lu().solve(&(-&g)),
            };
            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                let mut trial = x.clone();
                for (k, &i) in free.iter().enumerate() {
                    trial[i] = problem.params[i].project(x[i] + step[k] * scales[k]);
                }
                let moved: f64 = free
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| ((trial[i] - x[i]) / scales[k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let predicted = -(2.0 * g.dot(&step) + (&a * &step).dot(&step));
                if let Ok(rt) = problem.evaluate(&trial) {
                    let ct = sum_sq(&rt);
                    let rho = (cost - ct) / predicted;
                    if ct < cost && (damping.is_some() || rho >= 0.25) {
                        let drop = cost - ct;
                        x = trial;
                        r = rt;
                        cost = ct;
                        trace.push(cost);
                        lambda = (damping.unwrap_or(lambda) / 3.0).max(1e-15);
                        if drop <= opts.ftol * cost || moved <= opts.xtol * (size + opts.xtol) {
                            status = FitStatus::Converged;
                            break 'outer;
                        }
                        jac = ws.jacobian(&x, &r)?;
                        break;
                    }
                }
                if moved <= opts.xtol * (size + opts.xtol) {
                    status = FitStatus::Converged;
                    break 'outer;
                }
            }
            let next = match damping {
                None => lambda,
                Some(l) => l * 4.0,
            };
            if next > 1e20 {
                status = FitStatus::Converged;
                break 'outer;
            }
            damping = Some(next);
        }
    }
    if status == FitStatus::Converged {
        jac = ws.jacobian(&x, &r)?;
    }
    finish(problem, &free, &scales, x, &r, &jac, trace, iterations, status, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &FitProblem,
    free: &[usize],
    scales: &[f64],
    x: Vec<f64>,
    r: &[f64],
    jac: &DMatrix<f64>,
    cost_trace: Vec<f64>,
    iterations: usize,
    mut status: FitStatus,
    opts: &LmOptions,
) -> Result<FitResult> {
    let m = r.len();
    let n = free.len();
    let cost = sum_sq(r);
    let dof = m.saturating_sub(n);
    let sigma2 = if dof > 0 { cost / dof as f64 } else { f64::NAN };
    let js = DMatrix::from_fn(m, n, |a, b| jac[(a, b)] * scales[b]);
    let svd = js.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| CeoError::Fit("SVD failed".into()))?;
    let s_max = svd.singular_values.max();
    let mut null_directions = Vec::new();
    let mut inv = DMatrix::zeros(n, n);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let row = v_t.row(k);
        if !(s > opts.rank_tol * s_max) {
            null_directions.push(row.iter().cloned().collect());
            continue;
        }
        inv += row.transpose() * row / (s * s);
    }
    if !null_directions.is_empty() {
        status = FitStatus::Singular;
    }
    let t = if dof > 0 {
        StudentsT::new(0.0, 1.0, dof as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(1.959964)
    } else {
        f64::NAN
    };
    let mut covariance = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            covariance[a][b] = sigma2 * inv[(a, b)] * scales[a] * scales[b];
        }
    }
    let mut std_errors = vec![0.0; x.len()];
    let mut ci = vec![0.0; x.len()];
    for (k, &i) in free.iter().enumerate() {
        let se = covariance[k][k].max(0.0).sqrt();
        std_errors[i] = se;
        ci[i] = t * se;
    }
    Ok(FitResult {
        names: problem.params.iter().map(|p| p.name.clone()).collect(),
        roles: problem.params.iter().map(|p| p.role).collect(),
        estimates: x,
        ci_half_widths: ci,
        std_errors,
        covariance,
        free_names: free.iter().map(|&i| problem.params[i].name.clone()).collect(),
        cost,
        cost_trace,
        iterations,
        n_residuals: m,
        dof,
        status,
        null_directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_exact_recovery() {
        let xs: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let p = FitProblem::new(
            vec![ParamSpec::unbounded("a", 1.0), ParamSpec::unbounded("b", 1.0)],
            |v: &[f64]| Ok(xs.iter().zip(&ys).map(|(x, y)| v[0] * x + v[1] - y).collect()),
        )
        .unwrap();
        let f = least_squares(&p, &LmOptions::default()).unwrap();
        assert!(f.iterations <= 2, "{} iterations", f.iterations);
        assert!((f.get("a").unwrap() - 3.0).abs() < 1e-9);
        assert!((f.get("b").unwrap() + 2.0).abs() < 1e-9);
        assert_eq!(f.status, FitStatus::Converged);
    }

    #[test]
    fn rosenbrock() {
        let p = FitProblem::new(
            vec![ParamSpec::unbounded("x", -1.2), ParamSpec::unbounded("y", 1.0)],
            |v: &[f64]| Ok(vec![10.0 * (v[1] - v[0] * v[0]), 1.0 - v[0]]),
        )
        .unwrap();
        let f = least_squares(&p, &LmOptions::default()).unwrap();
        assert!((f.get("x").unwrap() - 1.0).abs() < 1e-8);
        assert!((f.get("y").unwrap() - 1.0).abs() < 1e-8);
        assert!(f.cost_trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bounds_are_respected_and_fixed_params_untouched() {
        let p = FitProblem::new(
            vec![
                ParamSpec::new("a", 0.5, 0.0, 1.0),
                ParamSpec::unbounded("c", 7.0).fixed(),
            ],
            |v: &[f64]| Ok(vec![v[0] - 2.0, v[1] - 7.0]),
        )
        .unwrap();
        let f = least_squares(&p, &LmOptions::default()).unwrap();
        assert!((f.get("a").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(f.get("c").unwrap(), 7.0);
        assert_eq!(f.ci("c").unwrap(), 0.0);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let xs: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let p = FitProblem::new(
            vec![
                ParamSpec::unbounded("a", 1.0),
                ParamSpec::unbounded("b", 1.0),
            ],
            |v: &[f64]| Ok(xs.iter().map(|x| (v[0] + v[1]) * x - 3.0 * x).collect()),
        )
        .unwrap();
        let f = least_squares(&p, &LmOptions::default()).unwrap();
        assert_eq!(f.status, FitStatus::Singular);
        assert_eq!(f.null_directions.len(), 1);
        let d = &f.null_directions[0];
        assert!((d[0] + d[1]).abs() < 1e-6);
    }

    #[test]
    fn invalid_problems() {
        assert!(FitProblem::new(vec![ParamSpec::unbounded("a", 1.0).fixed()], |_: &[f64]| Ok(vec![0.0])).is_err());
        assert!(FitProblem::new(vec![ParamSpec::new("a", 2.0, 0.0, 1.0)], |_: &[f64]| Ok(vec![0.0])).is_err());
        let p = FitProblem::new(
            vec![ParamSpec::unbounded("a", 1.0), ParamSpec::unbounded("b", 1.0)],
            |_: &[f64]| Ok(vec![0.0]),
        )
        .unwrap();
        assert!(least_squares(&p, &LmOptions::default()).is_err());
    }
}
