//! Configuration files, CSV tables and fit reports.

pub mod config;
pub mod report;
pub mod table;

use sha2::{Digest, Sha256};

pub use config::{load_config, parse_config, RunConfig, RunConfigFile, SweepConfig, SystemFile, TimeConfig};
pub use report::{FitReport, InputDigest, ReportedParam};
pub use table::{
    read_dba_summary, read_reflection_map, read_spectrum, read_trace, write_dba_summary, write_reflection_map, write_spectrum, write_trace,
    Header, ReflectionMap, SpectrumData, VERSION,
};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
