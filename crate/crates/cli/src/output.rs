//! Buffered run outputs and the run manifest.
//!
//! Files are assembled in memory and only written once the whole run has
//! succeeded.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

fn csv_error(e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("csv: {e}"))
}

impl OutputSet {
    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        R: IntoIterator<Item = String>,
        I: IntoIterator<Item = R>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(csv_error)?;
        self.bytes(name, bytes);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(format!("json: {e}")))?;
        bytes.push(b'\n');
        self.bytes(name, bytes);
        Ok(())
    }

    pub fn bytes(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    pub fn digests(&self) -> Vec<OutputDigest> {
        self.files
            .iter()
            .map(|(file, bytes)| OutputDigest {
                file: file.clone(),
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            })
            .collect()
    }

    pub fn write_all(&self, dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let mut m = serde_json::to_vec_pretty(manifest)
            .map_err(|e| CliError::Io(format!("json: {e}")))?;
        m.push(b'\n');
        std::fs::write(dir.join(MANIFEST), m)?;
        Ok(())
    }
}

/// Shortest round-trip decimal form, so equal floats always print equally.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// SHA-256 over `file:sha256` lines of every listed output, in order.
pub fn combined_digest(outputs: &[OutputDigest]) -> String {
    let mut h = Sha256::new();
    for o in outputs {
        h.update(o.file.as_bytes());
        h.update(b":");
        h.update(o.sha256.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, Serialize)]
pub struct Assumptions {
    pub kernel: &'static str,
    pub time_unit: &'static str,
    pub gating: &'static str,
    pub cross_section: &'static str,
    pub second_arm: &'static str,
    pub contrast_error: &'static str,
}

impl Default for Assumptions {
    fn default() -> Self {
        Self {
            kernel: "scalar, G_jk = exp(i k r_jk)/(i k r_jk), G_jj = 1",
            time_unit: "tau_a; amplitudes obey d(beta)/dt = -G beta / 2",
            gating: "image energies and cross terms integrated over gate times with trapezoid weights",
            cross_section: "sigma0 = 3 lambda^2 / (2 pi)",
            second_arm: "copy of the emitters shifted along the first transverse axis",
            contrast_error: "bootstrap over shots of the moment contrast",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub master_seed: u64,
    pub workers: usize,
    pub config: ExperimentConfig,
    pub assumptions: Assumptions,
    pub total_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputDigest>,
    pub outputs_digest: String,
}

/// Runs pipeline stages, timing each and tagging library errors with the
/// stage name.
pub struct Stages {
    started: Instant,
    timings: Vec<StageTiming>,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            started: Instant::now(),
            timings: Vec::new(),
        }
    }
}

impl Stages {
    pub fn run<T>(
        &mut self,
        stage: &'static str,
        f: impl FnOnce() -> subradiance::Result<T>,
    ) -> Result<T, CliError> {
        let t0 = Instant::now();
        let out = f().map_err(|source| CliError::Stage { stage, source });
        self.timings.push(StageTiming {
            stage,
            seconds: t0.elapsed().as_secs_f64(),
        });
        if let Err(e) = &out {
            log::error!("{e}");
        }
        out
    }

    pub fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    pub fn into_timings(self) -> Vec<StageTiming> {
        self.timings
    }
}
