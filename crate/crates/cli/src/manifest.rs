//! Run manifest: enough metadata to reproduce a run byte-for-byte and to
//! account for where the time went. Written with status `running` before
//! any compute and finalized afterwards.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    pub config_sha256: String,
    pub code_version: String,
    pub master_seed: u64,
    pub realizations: usize,
    /// RNG stream of realization i is (master_seed, stream = i).
    pub seed_scheme: String,
    /// Wall-clock seconds per stage, in execution order.
    pub wall_seconds: BTreeMap<String, f64>,
    /// Process CPU seconds per stage.
    pub cpu_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config_text: &str, master_seed: u64, realizations: usize) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        Self {
            command: command.to_string(),
            status: "running".to_string(),
            config_sha256: format!("{:x}", hasher.finalize()),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            realizations,
            seed_scheme: "chacha8 stream = realization index".to_string(),
            wall_seconds: BTreeMap::new(),
            cpu_seconds: BTreeMap::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), body)
    }

    pub fn record_stage(&mut self, stage: &str, wall: f64, cpu: f64) {
        self.wall_seconds.insert(stage.to_string(), wall);
        self.cpu_seconds.insert(stage.to_string(), cpu);
    }

    pub fn finalize(&mut self, dir: &Path) -> std::io::Result<()> {
        self.status = "complete".to_string();
        self.write(dir)
    }
}

/// Process CPU time (user + system) in seconds.
pub fn process_cpu_seconds() -> f64 {
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut usage) };
    if rc != 0 {
        return 0.0;
    }
    let user = usage.ru_utime.tv_sec as f64 + usage.ru_utime.tv_usec as f64 * 1e-6;
    let sys = usage.ru_stime.tv_sec as f64 + usage.ru_stime.tv_usec as f64 * 1e-6;
    user + sys
}

/// CPU time of the calling thread in seconds.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts: libc::timespec = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}
