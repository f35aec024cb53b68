//! Output locations, file writing and the error channel.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use ceo_core::io::RunConfig;
use ceo_core::CeoError;

pub const OUTPUT_DIR_ENV: &str = "CEO_OUTPUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(CeoError),
}

impl From<CeoError> for CliError {
    fn from(e: CeoError) -> Self {
        CliError::Core(e)
    }
}

fn kind(e: &CeoError) -> &'static str {
    match e {
        CeoError::Domain(_) => "domain",
        CeoError::Singular { .. } => "singular",
        CeoError::ZeroReference { .. } => "zero_reference",
        CeoError::Config(_) => "config",
        CeoError::Unstable { .. } => "unstable",
        CeoError::AtGridPoint { source, .. } => kind(source),
        CeoError::Validation(_) => "validation",
        CeoError::Fit(_) => "fit",
        CeoError::Io(_) => "io",
        CeoError::Parse(_) => "parse",
    }
}

impl CliError {
    /// 1 for rejected input, 2 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                CeoError::Validation(_) | CeoError::Parse(_) | CeoError::Config(_) | CeoError::Domain(_) => 1,
                _ => 2,
            },
        }
    }

    fn to_json(&self) -> Value {
        let (kind, message, details) = match self {
            CliError::Usage(m) => ("usage", m.clone(), Vec::new()),
            CliError::Core(CeoError::Validation(v)) => ("validation", "invalid configuration".to_string(), v.clone()),
            CliError::Core(e) => (kind(e), e.to_string(), Vec::new()),
        };
        json!({
            "error": { "kind": kind, "message": message, "details": details },
            "exit_code": self.exit_code(),
        })
    }
}

pub fn emit_error(e: &CliError) {
    eprintln!("{}", e.to_json());
}

pub fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

pub fn print_outputs(paths: &[PathBuf]) {
    let list: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    print_json(&json!({ "outputs": list }));
}

/// Directory and file-name prefix for generated files.
pub struct OutputDir {
    dir: PathBuf,
    prefix: String,
}

impl OutputDir {
    /// `--out-dir`, then `outputs.dir`, then `CEO_OUTPUT_DIR`, then the working directory.
    pub fn resolve(flag: Option<PathBuf>, rc: &RunConfig) -> Result<Self, CeoError> {
        Self::build(flag.or_else(|| rc.outputs.dir.clone()), rc.outputs.prefix.clone())
    }

    pub fn without_config(flag: Option<PathBuf>) -> Result<Self, CeoError> {
        Self::build(flag, "ceo".into())
    }

    fn build(dir: Option<PathBuf>, prefix: String) -> Result<Self, CeoError> {
        let dir = dir
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| CeoError::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutputDir { dir, prefix })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}_{name}", self.prefix))
    }
}

pub fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CeoError>,
) -> Result<(), CeoError> {
    let io = |e: std::io::Error| CeoError::Io(format!("{}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    body(&mut w)?;
    w.flush().map_err(io)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CeoError> {
    write_file(path, |w| w.write_all(text.as_bytes()).map_err(CeoError::from))
}
