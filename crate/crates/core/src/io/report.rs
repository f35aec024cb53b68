//! JSON fit reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::VERSION;
use crate::estimation::{FitResult, FitStatus};
use crate::model::TWO_PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedParam {
    pub name: String,
    pub value: f64,
    pub ci95: f64,
    pub unit: String,
    pub role: String,
}

/// Fit outcome in file units: rates in Hz, times in s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool: String,
    pub version: String,
    pub recipe: String,
    pub status: FitStatus,
    pub config_sha256: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub parameters: Vec<ReportedParam>,
    /// Over the free parameters, in `free_parameters` order and file units.
    pub covariance: Vec<Vec<f64>>,
    pub free_parameters: Vec<String>,
    pub cost: f64,
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub dof: usize,
    pub null_directions: Vec<Vec<f64>>,
    pub derived: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl FitReport {
    /// `is_rate(name)` marks angular-rate parameters, reported as `<name>_hz`.
    pub fn new(recipe: &str, result: &FitResult, is_rate: impl Fn(&str) -> bool) -> Self {
        let factor = |name: &str| if is_rate(name) { 1.0 / TWO_PI } else { 1.0 };
        let display = |name: &str| {
            if is_rate(name) {
                format!("{name}_hz")
            } else {
                name.to_string()
            }
        };
        let parameters = result
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| ReportedParam {
                name: display(n),
                value: result.estimates[i] * factor(n),
                ci95: result.ci_half_widths[i] * factor(n),
                unit: if is_rate(n) { "Hz".into() } else { "1".into() },
                role: format!("{:?}", result.roles[i]).to_lowercase(),
            })
            .collect();
        let covariance = result
            .covariance
            .iter()
            .enumerate()
            .map(|(a, row)| {
                row.iter()
                    .enumerate()
                    .map(|(b, v)| v * factor(&result.free_names[a]) * factor(&result.free_names[b]))
                    .collect()
            })
            .collect();
        FitReport {
            tool: "ceo".into(),
            version: VERSION.into(),
            recipe: recipe.into(),
            status: result.status,
            config_sha256: None,
            inputs: Vec::new(),
            parameters,
            covariance,
            free_parameters: result.free_names.iter().map(|n| display(n)).collect(),
            cost: result.cost,
            cost_trace: result.cost_trace.clone(),
            iterations: result.iterations,
            dof: result.dof,
            null_directions: result.null_directions.clone(),
            derived: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn with_inputs(mut self, inputs: Vec<InputDigest>) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn with_config(mut self, digest: Option<String>) -> Self {
        self.config_sha256 = digest;
        self
    }

    pub fn derive(mut self, name: impl Into<String>, value: f64) -> Self {
        self.derived.insert(name.into(), value);
        self
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap_or_default();
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{least_squares, FitProblem, LmOptions, ParamSpec};

    #[test]
    fn rates_are_reported_in_hz() {
        let p = FitProblem::new(
            vec![ParamSpec::unbounded("kappa", 1.0), ParamSpec::unbounded("eta", 0.1)],
            |v: &[f64]| Ok(vec![v[0] - TWO_PI * 5.0, v[1] - 0.3, 0.01, -0.01]),
        )
        .unwrap();
        let f = least_squares(&p, &LmOptions::default()).unwrap();
        let r = FitReport::new("test", &f, |n| n == "kappa");
        assert!((r.value("kappa_hz").unwrap() - 5.0).abs() < 1e-9);
        assert!((r.value("eta").unwrap() - 0.3).abs() < 1e-9);
        let back: FitReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
