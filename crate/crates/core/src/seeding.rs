//! Stable seed derivation and configuration hashing.
//!
//! Every stochastic component in the pipeline draws its RNG seed through
//! [`derive_seed`], so adding datasets or algorithms to a run never
//! perturbs the seeds of existing cells, and identical configurations
//! hash to identical artifact keys across process restarts and platforms.

use sha2::{Digest, Sha256};

/// Derives a 64-bit seed from a master seed and a list of context parts
/// (dataset name, algorithm ordinal, repeat index, ...).
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update([0x1f]);
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest >= 8 bytes"))
}

/// Accumulates `key=value` pairs and produces a short stable hex digest.
///
/// Used for artifact keys: any parameter that influences an artifact is
/// fed through this hasher, so a config change yields a different key.
#[derive(Clone, Default)]
pub struct ConfigHasher {
    entries: Vec<String>,
}

impl ConfigHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.entries.push(format!("{key}={value}"));
        self
    }

    /// 16-hex-char digest over the sorted entries.
    pub fn finish(&self) -> String {
        let mut sorted = self.entries.clone();
        sorted.sort();
        let mut h = Sha256::new();
        for e in &sorted {
            h.update(e.as_bytes());
            h.update([0x1e]);
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
