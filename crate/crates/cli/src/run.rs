//! Run context: effective seed, executor, output directory and artifact
//! stamping.

use crate::config::ExperimentConfig;
use bsq_core::dynamics::realization_seed;
use bsq_core::{Error, Exec, SpectralState};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt;
use std::fs;
use std::path::PathBuf;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_CHECK: u8 = 3;

/// Stream offset separating initial-state draws from noise-path draws.
const INITIAL_STREAM: u64 = 1;

#[derive(Debug)]
pub enum Failure {
    /// Bad input or an I/O problem.
    Validation(Vec<String>),
    /// Blow-up or another numerical breakdown.
    Numerical(String),
    /// An internal verification did not hold.
    Check(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Check(_) => EXIT_CHECK,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(v) => write!(f, "invalid input:\n  {}", v.join("\n  ")),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { .. } | Error::NotSymmetric(_) | Error::EtaTooLarge { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Validation(vec![other.to_string()]),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(vec![format!("i/o: {e}")])
    }
}

pub fn config_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

pub struct Run {
    pub cfg: ExperimentConfig,
    pub command: String,
    pub hash: String,
    pub seed: u64,
    pub exec: Exec,
    pub out: PathBuf,
    artifacts: Vec<String>,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, command: &str, hash: String, seed: u64, exec: Exec, out: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&out)?;
        Ok(Self { cfg, command: command.to_string(), hash, seed, exec, out, artifacts: Vec::new() })
    }

    pub fn stamp(&self) -> Value {
        json!({
            "command": self.command,
            "config_sha256": self.hash,
            "seed": self.seed,
            "bsq_cli": env!("CARGO_PKG_VERSION"),
            "bsq_core": bsq_core::VERSION,
        })
    }

    fn stamp_header(&self) -> String {
        format!(
            "# command={} config_sha256={} seed={} bsq_cli={} bsq_core={}\n",
            self.command,
            self.hash,
            self.seed,
            env!("CARGO_PKG_VERSION"),
            bsq_core::VERSION
        )
    }

    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), Failure> {
        let mut text = self.stamp_header();
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn write_json(&mut self, name: &str, mut body: Value) -> Result<(), Failure> {
        if let Value::Object(map) = &mut body {
            map.insert("stamp".into(), self.stamp());
        }
        let text = serde_json::to_string_pretty(&body).map_err(|e| Failure::Validation(vec![e.to_string()]))?;
        self.write(name, text.as_bytes())
    }

    /// Raw artifact; its stamp lives in the manifest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        fs::write(self.out.join(name), bytes)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Records every artifact written so far and how the run ended.
    pub fn write_manifest(&self, outcome: &Result<(), Failure>) -> std::io::Result<()> {
        let (status, error) = match outcome {
            Ok(()) => ("complete", Value::Null),
            Err(Failure::Check(m)) => ("check-failed", Value::String(m.clone())),
            Err(e) => ("partial", Value::String(e.to_string())),
        };
        let body = json!({
            "stamp": self.stamp(),
            "status": status,
            "error": error,
            "exec": format!("{:?}", self.exec),
            "artifacts": self.artifacts,
        });
        fs::write(self.out.join("manifest.json"), serde_json::to_string_pretty(&body).expect("manifest serializes"))
    }

    pub fn initial_state(&self, i: usize) -> SpectralState {
        let init = &self.cfg.initial;
        if init.amplitude == 0.0 {
            return SpectralState::zeros(self.cfg.n_trunc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(self.path_seed(i), INITIAL_STREAM));
        SpectralState::random_smooth(self.cfg.n_trunc, init.radius, init.amplitude, init.decay, &mut rng)
    }

    pub fn path_seed(&self, i: usize) -> u64 {
        realization_seed(self.seed, i as u64)
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(realization_seed(self.seed ^ 0x9e37_79b9_7f4a_7c15, stream))
    }
}
