//! Simulation and parameter estimation for multimode cavity electro-optic systems.

pub mod error;
pub mod estimation;
pub mod freq_response;
pub mod io;
pub mod model;
pub mod time_domain;

pub use error::{CeoError, Result};
pub use model::*;
