//! Run reports, timing and exit codes.

use std::fmt;
use std::time::Instant;

use qcsim::C64;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Machine-readable outcome of one command. Everything except `timings` is
/// deterministic for fixed arguments.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: Vec<String>,
    pub engine: Option<String>,
    pub seed: u64,
    pub counters: Map<String, Value>,
    pub result: Map<String, Value>,
    pub timings: Timings,
    #[serde(skip)]
    pub verification_failed: bool,
}

impl RunReport {
    pub fn new(seed: u64) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: std::env::args().skip(1).collect(),
            engine: None,
            seed,
            counters: Map::new(),
            result: Map::new(),
            timings: Timings::default(),
            verification_failed: false,
        }
    }

    pub fn counter(&mut self, key: &str, v: impl Into<Value>) {
        self.counters.insert(key.to_string(), v.into());
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.result.insert(key.to_string(), v.into());
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub wall_seconds: f64,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Serialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

pub struct Stopwatch {
    start: Instant,
    phases: Vec<Phase>,
}

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch { start: Instant::now(), phases: Vec::new() }
    }

    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.phases.push(Phase { name: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    pub fn finish(self) -> Timings {
        Timings { wall_seconds: self.start.elapsed().as_secs_f64(), phases: self.phases }
    }
}

/// First 16 bytes of the SHA-256 of the little-endian `(re, im)` bits, hex.
pub fn digest(data: &[C64]) -> String {
    let mut h = Sha256::new();
    for z in data {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn complex_json(z: C64) -> Value {
    serde_json::json!([z.re, z.im])
}

#[derive(Debug)]
pub enum CliError {
    /// Exit code 3.
    Infeasible(String),
    /// Exit code 1.
    Invalid(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 3,
            CliError::Invalid(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Infeasible(_) => "infeasible",
            CliError::Invalid(_) => "invalid",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Infeasible(m) | CliError::Invalid(m) => f.write_str(m),
        }
    }
}

impl From<qcsim::Error> for CliError {
    fn from(e: qcsim::Error) -> Self {
        match e {
            qcsim::Error::Infeasible { .. } | qcsim::Error::WorkspaceTooSmall { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
