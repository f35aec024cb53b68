use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    DetectorCurrent,
    ComplexEnvelope,
    PhotonNumber,
    /// Coupling rate g(t), rad/s.
    Coupling,
    /// Averaged RF power from down-conversion.
    Power,
    /// Normalized reflection R(t).
    Reflection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Samples {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Real(v) => v.len(),
            Samples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform time grid `t_k = t0 + k dt`, `k < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(CeoError::Config(format!("time step must be finite and > 0 (got {dt})")));
        }
        if n == 0 {
            return Err(CeoError::Config("time grid must have at least one sample".into()));
        }
        Ok(TimeGrid { t0, dt, n })
    }

    /// Grid covering `[t0, t1]` with step `dt`.
    pub fn span(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t1 >= t0) {
            return Err(CeoError::Config(format!("time span end {t1} precedes start {t0}")));
        }
        let n = ((t1 - t0) / dt).round() as usize + 1;
        TimeGrid::new(t0, dt, n)
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.t(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub dt: f64,
    pub t0: f64,
    pub samples: Samples,
    pub kind: TraceKind,
}

impl TimeTrace {
    pub fn new(t0: f64, dt: f64, samples: Samples, kind: TraceKind) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(CeoError::Config(format!("trace dt must be > 0 (got {dt})")));
        }
        if samples.is_empty() {
            return Err(CeoError::Config("trace must hold at least one sample".into()));
        }
        Ok(TimeTrace { dt, t0, samples, kind })
    }

    pub fn real(t0: f64, dt: f64, values: Vec<f64>, kind: TraceKind) -> Result<Self> {
        TimeTrace::new(t0, dt, Samples::Real(values), kind)
    }

    pub fn complex(t0: f64, dt: f64, values: Vec<Complex64>, kind: TraceKind) -> Result<Self> {
        TimeTrace::new(t0, dt, Samples::Complex(values), kind)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            t0: self.t0,
            dt: self.dt,
            n: self.len(),
        }
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid().times()
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.samples {
            Samples::Real(v) => Some(v),
            Samples::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex64]> {
        match &self.samples {
            Samples::Complex(v) => Some(v),
            Samples::Real(_) => None,
        }
    }

    pub fn expect_real(&self) -> Result<&[f64]> {
        self.as_real()
            .ok_or_else(|| CeoError::Config(format!("expected a real-valued trace, got {:?}", self.kind)))
    }

    pub fn expect_complex(&self) -> Result<&[Complex64]> {
        self.as_complex()
            .ok_or_else(|| CeoError::Config(format!("expected a complex trace, got {:?}", self.kind)))
    }

    /// Linear interpolation of a real trace, clamped to the end values.
    pub fn interp_real(&self, t: f64) -> Result<f64> {
        let v = self.expect_real()?;
        Ok(interp(v, self.t0, self.dt, t, |a, b, w| a + (b - a) * w))
    }

    /// Linear interpolation of a complex trace, clamped to the end values.
    pub fn interp_complex(&self, t: f64) -> Result<Complex64> {
        let v = self.expect_complex()?;
        Ok(interp(v, self.t0, self.dt, t, |a, b, w| a + (b - a) * w))
    }

    /// Mean of a real trace over `[t_a, t_b]`.
    pub fn window_mean(&self, t_a: f64, t_b: f64) -> Result<f64> {
        let v = self.expect_real()?;
        let (sum, n) = v
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let t = self.t(*k);
                t >= t_a && t <= t_b
            })
            .fold((0.0, 0usize), |(s, n), (_, x)| (s + x, n + 1));
        if n == 0 {
            return Err(CeoError::Config(format!("no samples inside window [{t_a}, {t_b}]")));
        }
        Ok(sum / n as f64)
    }
}

pub(crate) fn interp<T: Copy>(v: &[T], t0: f64, dt: f64, t: f64, lerp: impl Fn(T, T, f64) -> T) -> T {
    let x = (t - t0) / dt;
    if x <= 0.0 {
        return v[0];
    }
    let last = v.len() - 1;
    if x >= last as f64 {
        return v[last];
    }
    let k = x.floor() as usize;
    lerp(v[k], v[k + 1], x - k as f64)
}
