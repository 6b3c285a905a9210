//! Content-addressed persistence for expensive intermediates.
//!
//! Layout: `<root>/<kind>/<identifier>/<config-hash>.<ext>`, with a
//! `.sha256` sidecar per payload. Writes are atomic (unique temp file in
//! the target directory, then rename); reads verify the checksum.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact {0} failed its checksum")]
    CorruptArtifact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    PerfTable,
    Graph,
    NodeFeatures,
    Embedding,
    GcnnModel,
    RankerModel,
    Report,
}

pub const ALL_KINDS: [ArtifactKind; 7] = [
    ArtifactKind::PerfTable,
    ArtifactKind::Graph,
    ArtifactKind::NodeFeatures,
    ArtifactKind::Embedding,
    ArtifactKind::GcnnModel,
    ArtifactKind::RankerModel,
    ArtifactKind::Report,
];

impl ArtifactKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            ArtifactKind::PerfTable => "perf_table",
            ArtifactKind::Graph => "graph",
            ArtifactKind::NodeFeatures => "node_features",
            ArtifactKind::Embedding => "embedding",
            ArtifactKind::GcnnModel => "gcnn_model",
            ArtifactKind::RankerModel => "ranker_model",
            ArtifactKind::Report => "report",
        }
    }

    /// Text formats carry .txt, dense matrix payloads .bin.
    pub fn extension(self) -> &'static str {
        match self {
            ArtifactKind::PerfTable
            | ArtifactKind::RankerModel
            | ArtifactKind::Report => "txt",
            ArtifactKind::Graph => "txt",
            ArtifactKind::NodeFeatures | ArtifactKind::Embedding | ArtifactKind::GcnnModel => {
                "bin"
            }
        }
    }
}

/// Key of one artifact: what it is, which dataset/measure it belongs
/// to, and a stable hash of every parameter that influenced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactKey {
    pub kind: ArtifactKind,
    pub identifier: String,
    pub config_hash: String,
}

impl ArtifactKey {
    pub fn new(kind: ArtifactKind, identifier: &str, config_hash: &str) -> Self {
        ArtifactKey {
            kind,
            identifier: identifier.to_string(),
            config_hash: config_hash.to_string(),
        }
    }

    /// Relative payload path under the store root. Identifier segments
    /// are sanitized to filesystem-safe characters.
    pub fn relative_path(&self) -> PathBuf {
        let mut path = PathBuf::from(self.kind.dir_name());
        for segment in self.identifier.split('/') {
            path.push(sanitize(segment));
        }
        path.push(format!(
            "{}.{}",
            sanitize(&self.config_hash),
            self.kind.extension()
        ));
        path
    }
}

fn sanitize(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() || cleaned == "." || cleaned == ".." {
        "_".to_string()
    } else {
        cleaned
    }
}

/// Written proof of a successful put.
#[derive(Debug, Clone)]
pub struct Receipt {
    pub path: PathBuf,
    pub checksum: String,
}

#[derive(Debug)]
pub struct ArtifactStore {
    root: PathBuf,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ArtifactStore {
    pub fn open(root: &Path) -> Result<ArtifactStore, StoreError> {
        std::fs::create_dir_all(root)?;
        Ok(ArtifactStore {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn checksum(payload: &[u8]) -> String {
        let mut h = Sha256::new();
        h.update(payload);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Atomic write: unique temp file in the destination directory, then
    /// rename. Concurrent identical puts both succeed with one durable
    /// copy.
    pub fn put(&self, key: &ArtifactKey, payload: &[u8]) -> Result<Receipt, StoreError> {
        let path = self.root.join(key.relative_path());
        let dir = path.parent().expect("artifact path has a parent");
        std::fs::create_dir_all(dir)?;
        let checksum = Self::checksum(payload);

        let unique = format!(
            ".tmp-{}-{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        );
        let tmp = dir.join(&unique);
        std::fs::write(&tmp, payload)?;
        std::fs::rename(&tmp, &path)?;

        let tmp_sum = dir.join(format!("{unique}.sha256"));
        std::fs::write(&tmp_sum, checksum.as_bytes())?;
        std::fs::rename(&tmp_sum, sidecar(&path))?;

        Ok(Receipt { path, checksum })
    }

    /// Exact stored bytes, `None` when absent, `CorruptArtifact` when
    /// the payload does not match its checksum.
    pub fn get(&self, key: &ArtifactKey) -> Result<Option<Vec<u8>>, StoreError> {
        let path = self.root.join(key.relative_path());
        if !path.exists() {
            return Ok(None);
        }
        let payload = std::fs::read(&path)?;
        let recorded = match std::fs::read_to_string(sidecar(&path)) {
            Ok(s) => s,
            Err(_) => {
                return Err(StoreError::CorruptArtifact(
                    path.display().to_string() + " (missing checksum)",
                ))
            }
        };
        if Self::checksum(&payload) != recorded.trim() {
            return Err(StoreError::CorruptArtifact(path.display().to_string()));
        }
        Ok(Some(payload))
    }

    /// Removes every artifact whose relative path starts with `prefix`
    /// (e.g. "perf_table" or "perf_table/silhouette"). Returns the
    /// number of payload files removed.
    pub fn invalidate(&self, prefix: &str) -> Result<usize, StoreError> {
        let mut removed = 0usize;
        for rel in self.list()? {
            if rel.starts_with(prefix) {
                let path = self.root.join(&rel);
                std::fs::remove_file(&path)?;
                let _ = std::fs::remove_file(sidecar(&path));
                removed += 1;
            }
        }
        Ok(removed)
    }

    /// Relative paths of every stored payload, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            if !dir.exists() {
                continue;
            }
            for entry in std::fs::read_dir(&dir)? {
                let entry = entry?;
                let path = entry.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.extension().is_some_and(|e| e != "sha256") {
                    let rel = path
                        .strip_prefix(&self.root)
                        .expect("listed under root")
                        .to_string_lossy()
                        .into_owned();
                    out.push(rel);
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().expect("payload file name").to_os_string();
    name.push(".sha256");
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_store() -> (tempfile::TempDir, ArtifactStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        (dir, store)
    }

    fn key(hash: &str) -> ArtifactKey {
        ArtifactKey::new(ArtifactKind::PerfTable, "silhouette", hash)
    }

    #[test]
    fn put_get_roundtrip() {
        let (_dir, store) = temp_store();
        let payload = b"clustrec-perf v1\nsome bytes";
        store.put(&key("abc123"), payload).unwrap();
        let back = store.get(&key("abc123")).unwrap().unwrap();
        assert_eq!(back, payload);
    }

    #[test]
    fn absent_key_is_none() {
        let (_dir, store) = temp_store();
        assert!(store.get(&key("missing")).unwrap().is_none());
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let (_dir, store) = temp_store();
        let receipt = store.put(&key("abc"), b"full payload").unwrap();
        std::fs::write(&receipt.path, b"full").unwrap();
        assert!(matches!(
            store.get(&key("abc")),
            Err(StoreError::CorruptArtifact(_))
        ));
    }

    #[test]
    fn different_config_hash_gets_distinct_path() {
        let (_dir, store) = temp_store();
        let r1 = store.put(&key("aaa"), b"one").unwrap();
        let r2 = store.put(&key("bbb"), b"two").unwrap();
        assert_ne!(r1.path, r2.path);
        assert_eq!(store.get(&key("aaa")).unwrap().unwrap(), b"one");
        assert_eq!(store.get(&key("bbb")).unwrap().unwrap(), b"two");
    }

    #[test]
    fn concurrent_identical_puts_leave_one_copy() {
        let (_dir, store) = temp_store();
        let store = std::sync::Arc::new(store);
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let store = store.clone();
                std::thread::spawn(move || {
                    store.put(&key("same"), b"identical payload").unwrap();
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(store.get(&key("same")).unwrap().unwrap(), b"identical payload");
        assert_eq!(store.list().unwrap().len(), 1);
    }

    #[test]
    fn invalidate_by_prefix() {
        let (_dir, store) = temp_store();
        store.put(&key("aaa"), b"one").unwrap();
        store
            .put(
                &ArtifactKey::new(ArtifactKind::Graph, "iris", "ccc"),
                b"graph",
            )
            .unwrap();
        let removed = store.invalidate("perf_table").unwrap();
        assert_eq!(removed, 1);
        assert!(store.get(&key("aaa")).unwrap().is_none());
        assert!(store
            .get(&ArtifactKey::new(ArtifactKind::Graph, "iris", "ccc"))
            .unwrap()
            .is_some());
        // empty-match prefix removes nothing
        assert_eq!(store.invalidate("zzz").unwrap(), 0);
        // full wipe
        assert_eq!(store.invalidate("").unwrap(), 1);
        assert!(store.list().unwrap().is_empty());
    }

    #[test]
    fn identifiers_are_sanitized() {
        let (_dir, store) = temp_store();
        let weird = ArtifactKey::new(ArtifactKind::Embedding, "silhouette/my data(1)", "h");
        store.put(&weird, b"x").unwrap();
        let listed = store.list().unwrap();
        assert_eq!(listed.len(), 1);
        assert!(listed[0].starts_with("embedding/silhouette/my_data_1_"));
        assert_eq!(store.get(&weird).unwrap().unwrap(), b"x");
    }
}
