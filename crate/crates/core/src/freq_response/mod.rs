//! Frequency-domain linear response.

pub mod dba;
pub mod matrix;
pub mod reflection;
pub mod susceptibility;

pub use dba::{dba_shifts, DbaShift};
pub use matrix::{build_input_matrix, build_system_matrix, effective_susceptibility_matrix};
pub use reflection::{
    linear_grid, normalized_reflection, onres_microwave_r, probe_reflection, reflection, spectrum_sweep, Frame,
    Spectrum,
};
pub use susceptibility::{
    bare_susceptibility, closed_form_chi_e, closed_form_chi_o, ideal_chi_e, ideal_chi_o, inverse_susceptibility,
    scattering_ratio, ResponseParams,
};
