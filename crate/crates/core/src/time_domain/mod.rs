//! Pulsed-pump simulation and the heterodyne measurement chain.

pub mod detection;
pub mod pipeline;
pub mod propagate;
pub mod pulse;
pub mod trace;

pub use detection::{
    digital_downconvert, heterodyne_signal, measure_power, noise_std_for_snr, temporal_normalized_reflection, Detection,
};
pub use pipeline::{envelope_reflection, measured_reflection, quasi_static_reflection, reflection_map};
pub use propagate::{
    inject_excess_backaction, propagate, propagate_timeline, ExcessBackAction, ProbeTone, Profile, PropagateOptions,
    Propagation, Timeline,
};
pub use pulse::{coupling_trace, constant_coupling, power_for_cooperativity, pump_loading, PulseShape, PulseSpec};
pub use trace::{Samples, TimeGrid, TimeTrace, TraceKind};
