//! Fixed-step RK4 integration of `dD/dt = -M(0; g(t)) D + L u(t)`.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::trace::{TimeGrid, TimeTrace, TraceKind};
use crate::error::{CeoError, Result};
use crate::freq_response::matrix::{
    input_matrix_unchecked, probe_port, probe_row, solve_checked, system_matrix_unchecked, StateVector, SystemMatrix,
    IDX_B,
};
use crate::model::{validate_config, ModeLabel, SystemConfig, TWO_PI};

/// Step bound relative to the fastest rate of `M(0)`.
const RATE_STEP: f64 = 0.02;
/// Minimum number of steps per probe beat period.
const STEPS_PER_BEAT: f64 = 40.0;
/// Divergence threshold relative to the bare intracavity probe amplitude.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Coherent probe tone entering the external port of `mode` at detuning `detuning` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeTone {
    pub mode: ModeLabel,
    pub detuning: f64,
    pub amplitude: Complex64,
}

impl ProbeTone {
    pub fn new(mode: ModeLabel, detuning: f64) -> Self {
        ProbeTone {
            mode,
            detuning,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }
}

/// Time profile of a phenomenological perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    /// `value` for `t >= t_on`.
    Step { t_on: f64, value: f64 },
    /// `value` on `[t_on, t_off)`.
    Window { t_on: f64, t_off: f64, value: f64 },
    /// Smooth rise from `t_ref` to a peak at `t_ref + t_ex`, then exponential decay with `tau_ex`.
    DelayedBounce { t_ref: f64, t_ex: f64, tau_ex: f64, peak: f64 },
    /// Linearly interpolated samples, zero outside.
    Tabulated { t0: f64, dt: f64, values: Vec<f64> },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Step { t_on, value } => {
                if t >= t_on {
                    value
                } else {
                    0.0
                }
            }
            Profile::Window { t_on, t_off, value } => {
                if t >= t_on && t < t_off {
                    value
                } else {
                    0.0
                }
            }
            Profile::DelayedBounce {
                t_ref,
                t_ex,
                tau_ex,
                peak,
            } => {
                let x = t - t_ref;
                if x < 0.0 {
                    0.0
                } else if x < t_ex {
                    peak * (0.5 * std::f64::consts::PI * x / t_ex).sin().powi(2)
                } else {
                    peak * (-(x - t_ex) / tau_ex).exp()
                }
            }
            Profile::Tabulated { t0, dt, ref values } => {
                if values.is_empty() {
                    return 0.0;
                }
                let x = (t - t0) / dt;
                if x < 0.0 || x > (values.len() - 1) as f64 {
                    return 0.0;
                }
                super::trace::interp(values, t0, dt, t, |a, b, w| a + (b - a) * w)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Constant { value } | Profile::Step { value, .. } | Profile::Window { value, .. } => *value == 0.0,
            Profile::DelayedBounce { peak, .. } => *peak == 0.0,
            Profile::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let finite = match self {
            Profile::Zero => true,
            Profile::Constant { value } | Profile::Step { value, .. } => value.is_finite(),
            Profile::Window { t_on, t_off, value } => value.is_finite() && t_on.is_finite() && t_off.is_finite(),
            Profile::DelayedBounce {
                t_ref,
                t_ex,
                tau_ex,
                peak,
            } => t_ref.is_finite() && *t_ex > 0.0 && *tau_ex > 0.0 && peak.is_finite(),
            Profile::Tabulated { t0, dt, values } => {
                t0.is_finite() && *dt > 0.0 && values.iter().all(|v| v.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(CeoError::Domain(format!("{name} profile has non-finite or invalid parameters")))
        }
    }
}

/// Phenomenological excess microwave frequency shift and linewidth change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessBackAction {
    pub delta_omega_e: Profile,
    pub delta_kappa_e: Profile,
}

impl Default for ExcessBackAction {
    fn default() -> Self {
        ExcessBackAction {
            delta_omega_e: Profile::Zero,
            delta_kappa_e: Profile::Zero,
        }
    }
}

impl ExcessBackAction {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        (self.delta_omega_e.eval(t), self.delta_kappa_e.eval(t))
    }

    pub fn is_zero(&self) -> bool {
        self.delta_omega_e.is_zero() && self.delta_kappa_e.is_zero()
    }
}

/// Coupling and perturbation schedule driving the response matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub cfg: SystemConfig,
    /// `g(t)`, rad/s.
    pub coupling: TimeTrace,
    pub excess: ExcessBackAction,
}

impl Timeline {
    pub fn new(cfg: SystemConfig, coupling: TimeTrace) -> Result<Self> {
        validate_config(&cfg).into_result()?;
        let g = coupling.expect_real()?;
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CeoError::Domain("g(t) must be finite and >= 0".into()));
        }
        Ok(Timeline {
            cfg,
            coupling,
            excess: ExcessBackAction::default(),
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.coupling.grid()
    }
}

/// Adds a phenomenological microwave perturbation to `timeline`.
pub fn inject_excess_backaction(timeline: &Timeline, model: ExcessBackAction) -> Result<Timeline> {
    model.delta_omega_e.check("delta_omega_e")?;
    model.delta_kappa_e.check("delta_kappa_e")?;
    let ke = timeline.cfg.microwave.kappa_total;
    let grid = timeline.grid();
    let mut probe_times = grid.times();
    if let Profile::DelayedBounce { t_ref, t_ex, .. } = model.delta_kappa_e {
        probe_times.push(t_ref + t_ex);
    }
    for t in probe_times {
        let (dw, dk) = model.eval(t);
        if !dw.is_finite() || !dk.is_finite() {
            return Err(CeoError::Domain(format!("excess back-action is not finite at t = {t}")));
        }
        if !(ke + dk > 0.0) {
            return Err(CeoError::Domain(format!(
                "effective microwave linewidth kappa_e + delta_kappa_e = {} <= 0 at t = {t}",
                ke + dk
            )));
        }
    }
    Ok(Timeline {
        excess: model,
        ..timeline.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    /// Extra factor on the number of RK4 substeps per output sample.
    pub refine: usize,
    /// Start with empty modes instead of the steady state at the first sample.
    pub from_vacuum: bool,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            refine: 1,
            from_vacuum: false,
        }
    }
}

/// Result of a propagation: all ten amplitudes on the coupling grid.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub grid: TimeGrid,
    pub states: Vec<StateVector>,
    pub probe: ProbeTone,
    pub substeps: usize,
    kappa_ext: f64,
    row: usize,
}

impl Propagation {
    /// Raw amplitude of component `idx` in the mode rotating frame.
    pub fn component(&self, idx: usize) -> Result<TimeTrace> {
        if idx >= 10 {
            return Err(CeoError::Domain(format!("component index {idx} out of range")));
        }
        let v = self.states.iter().map(|d| d[idx]).collect();
        TimeTrace::complex(self.grid.t0, self.grid.dt, v, TraceKind::ComplexEnvelope)
    }

    /// Output field in the probe frame, `(a_in e^{-iWt} - sqrt(kappa_ex) a(t)) e^{iWt}`.
    pub fn output_envelope(&self) -> Result<TimeTrace> {
        let w = self.probe.detuning;
        let sk = self.kappa_ext.sqrt();
        let v = self
            .states
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let t = self.grid.t(k);
                self.probe.amplitude - sk * d[self.row] * Complex64::from_polar(1.0, w * t)
            })
            .collect();
        TimeTrace::complex(self.grid.t0, self.grid.dt, v, TraceKind::ComplexEnvelope)
    }

    /// Instantaneous complex reflection `S(t) = output / input`.
    pub fn reflection_trace(&self) -> Result<TimeTrace> {
        let out = self.output_envelope()?;
        let a = self.probe.amplitude;
        if a.norm() == 0.0 {
            return Err(CeoError::Domain("probe amplitude is zero".into()));
        }
        let v = out.expect_complex()?.iter().map(|z| z / a).collect();
        TimeTrace::complex(out.t0, out.dt, v, TraceKind::ComplexEnvelope)
    }
}

/// Amplitudes coupled to the annihilation rows of the microwave and anti-Stokes modes.
const BLOCK_B: [usize; 5] = [1, 2, 5, 6, 8];
/// Amplitudes coupled to the annihilation row of the Stokes mode.
const BLOCK_S: [usize; 5] = [0, 3, 4, 7, 9];

type BlockMatrix = SMatrix<Complex64, 5, 5>;
type BlockVector = SVector<Complex64, 5>;

/// One of the two decoupled 5-amplitude blocks of `M`. The other block is its
/// complex conjugate, driven by the conjugate input.
struct Generator {
    idx: [usize; 5],
    base: BlockMatrix,
    coupling: BlockMatrix,
    drive: BlockVector,
    omega: f64,
    /// Position of `b` (or `b^+`) inside the block and the sign of its frequency term.
    b_slot: (usize, f64),
}

impl Generator {
    fn new(cfg: &SystemConfig, row: usize, port: usize, amplitude: Complex64, omega: f64) -> Self {
        let idx = if BLOCK_B.contains(&row) { BLOCK_B } else { BLOCK_S };
        let full0 = system_matrix_unchecked(cfg, 0.0, 0.0);
        let full1 = system_matrix_unchecked(cfg, 1.0, 0.0);
        let l = input_matrix_unchecked(cfg);
        let base = BlockMatrix::from_fn(|r, c| full0[(idx[r], idx[c])]);
        let coupling = BlockMatrix::from_fn(|r, c| full1[(idx[r], idx[c])] - full0[(idx[r], idx[c])]);
        let drive = BlockVector::from_fn(|r, _| l[(idx[r], port)] * amplitude);
        let b_pos = idx.iter().position(|&i| i == IDX_B || i == IDX_B + 1).unwrap_or(4);
        let sign = if idx[b_pos] == IDX_B { 1.0 } else { -1.0 };
        Generator {
            idx,
            base,
            coupling,
            drive,
            omega,
            b_slot: (b_pos, sign),
        }
    }

    #[inline]
    fn matrix(&self, g: f64, excess: (f64, f64)) -> BlockMatrix {
        let mut m = self.base + self.coupling * Complex64::new(g, 0.0);
        let (dw, dk) = excess;
        if dw != 0.0 || dk != 0.0 {
            let (p, sign) = self.b_slot;
            m[(p, p)] += Complex64::new(0.5 * dk, sign * dw);
        }
        m
    }

    #[inline]
    fn rhs(&self, t: f64, m: &BlockMatrix, d: &BlockVector) -> BlockVector {
        let ph = Complex64::from_polar(1.0, -self.omega * t);
        self.drive * ph - m * d
    }

    fn expand(&self, y: &BlockVector) -> StateVector {
        let mut d = StateVector::zeros();
        for (k, &i) in self.idx.iter().enumerate() {
            d[i] = y[k];
            d[i ^ 1] = y[k].conj();
        }
        d
    }
}

/// Propagates a probe through `cfg` with coupling schedule `g_of_t`.
pub fn propagate(cfg: &SystemConfig, g_of_t: &TimeTrace, probe: ProbeTone) -> Result<Propagation> {
    let timeline = Timeline::new(cfg.clone(), g_of_t.clone())?;
    propagate_timeline(&timeline, probe, PropagateOptions::default())
}

/// Propagates a probe through a timeline, starting from the steady state at its first sample.
pub fn propagate_timeline(timeline: &Timeline, probe: ProbeTone, options: PropagateOptions) -> Result<Propagation> {
    let cfg = &timeline.cfg;
    let row = probe_row(probe.mode)?;
    let port = probe_port(probe.mode)?;
    let kex = cfg.mode(probe.mode).kappa_ext;
    if !(kex > 0.0) {
        return Err(CeoError::Domain(format!("{} has no external coupling", probe.mode)));
    }
    if !probe.detuning.is_finite() || !probe.amplitude.re.is_finite() || !probe.amplitude.im.is_finite() {
        return Err(CeoError::Domain("probe detuning and amplitude must be finite".into()));
    }
    let grid = timeline.grid();
    let g_samples = timeline.coupling.expect_real()?;
    let gen = Generator::new(cfg, row, port, probe.amplitude, probe.detuning);

    let g_max = g_samples.iter().cloned().fold(0.0, f64::max);
    let mut max_rate = 0.0f64;
    for k in 0..grid.n {
        let m = gen.matrix(g_max, timeline.excess.eval(grid.t(k)));
        for r in 0..5 {
            let s: f64 = (0..5).map(|c| m[(r, c)].norm()).sum();
            max_rate = max_rate.max(s);
        }
    }
    let mut dt_max = RATE_STEP / max_rate;
    let beat = probe.detuning.abs() / TWO_PI;
    if beat > 0.0 {
        dt_max = dt_max.min(1.0 / (STEPS_PER_BEAT * beat));
    }
    let substeps = ((grid.dt / dt_max).ceil() as usize).max(1) * options.refine.max(1);
    let h = grid.dt / substeps as f64;

    let g_at = |t: f64| timeline.coupling.interp_real(t).unwrap_or(0.0);
    let m_at = |t: f64| gen.matrix(g_at(t), timeline.excess.eval(t));
    let t0 = grid.t0;
    let mut y = if options.from_vacuum {
        BlockVector::zeros()
    } else {
        let w = probe.detuning;
        let m0 = m_at(t0) - BlockMatrix::identity() * Complex64::new(0.0, w);
        let mut full = SystemMatrix::identity();
        for r in 0..5 {
            for c in 0..5 {
                full[(gen.idx[r], gen.idx[c])] = m0[(r, c)];
            }
        }
        let mut rhs = StateVector::zeros();
        for (k, &i) in gen.idx.iter().enumerate() {
            rhs[i] = gen.drive[k];
        }
        let x = solve_checked(&full, &rhs, probe.mode, w)?;
        let ph0 = Complex64::from_polar(1.0, -w * t0);
        BlockVector::from_fn(|k, _| x[gen.idx[k]] * ph0)
    };

    let scale = probe.amplitude.norm() * 2.0 * kex.sqrt() / cfg.mode(probe.mode).kappa_total;
    let limit = DIVERGENCE_FACTOR * scale.max(f64::MIN_POSITIVE);

    let half = Complex64::new(0.5 * h, 0.0);
    let full_step = Complex64::new(h, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let sixth = Complex64::new(h / 6.0, 0.0);
    let mut states = Vec::with_capacity(grid.n);
    states.push(gen.expand(&y));
    let mut ma = m_at(t0);
    for k in 1..grid.n {
        let start = grid.t(k - 1);
        for s in 0..substeps {
            let t = start + s as f64 * h;
            let th = t + 0.5 * h;
            let t1 = t + h;
            let mh = m_at(th);
            let mb = m_at(t1);
            let k1 = gen.rhs(t, &ma, &y);
            let k2 = gen.rhs(th, &mh, &(y + k1 * half));
            let k3 = gen.rhs(th, &mh, &(y + k2 * half));
            let k4 = gen.rhs(t1, &mb, &(y + k3 * full_step));
            y += (k1 + (k2 + k3) * two + k4) * sixth;
            ma = mb;
        }
        let peak = y.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if !(peak <= limit) {
            return Err(CeoError::Unstable {
                t: grid.t(k),
                magnitude: peak,
            });
        }
        states.push(gen.expand(&y));
    }
    Ok(Propagation {
        grid,
        states,
        probe,
        substeps,
        kappa_ext: kex,
        row,
    })
}
