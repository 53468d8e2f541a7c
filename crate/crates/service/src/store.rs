//! File-backed review store: an initial snapshot plus an append-only audit log.
//!
//! Layout under the store directory:
//!
//! ```text
//! snapshot/corpus.jsonl
//! snapshot/lexicon.tsv
//! snapshot/queue.jsonl
//! audit.jsonl
//! ```
//!
//! The snapshot is written once. Every mutation is appended to `audit.jsonl`
//! and synced before it becomes visible, so reopening the directory replays
//! to the last acknowledged state. A torn final line is dropped on open.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use morph_core::corpus::review::{AuditEntry, Decision, ReviewError, ReviewItem, ReviewState};
use morph_core::corpus::{Corpus, CorpusError, LoadMode};
use morph_core::io::{read_jsonl, to_jsonl, write_atomic};
use morph_core::lexicon::{LexiconError, MorphKind, MorphLexicon};
use thiserror::Error;

const SNAPSHOT: &str = "snapshot";
const AUDIT: &str = "audit.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("store is read-only")]
    ReadOnly,
    #[error("{path}: no store here (missing {missing})")]
    Missing { path: String, missing: String },
    #[error("{path}: store already exists")]
    Exists { path: String },
    #[error("audit log line {line}: {reason}")]
    CorruptAudit { line: usize, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Serialized form of a store's current state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreBytes {
    pub corpus: Vec<u8>,
    pub lexicon: Vec<u8>,
    pub queue: Vec<u8>,
}

impl StoreBytes {
    pub fn of(state: &ReviewState) -> Self {
        let mut lexicon = Vec::new();
        state.lexicon.write(&mut lexicon).expect("writing to memory");
        StoreBytes { corpus: state.corpus.to_jsonl(), lexicon, queue: to_jsonl(&state.queue) }
    }
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    state: ReviewState,
    revision: u64,
    audit: Option<File>,
}

fn snapshot_paths(dir: &Path) -> [PathBuf; 3] {
    let s = dir.join(SNAPSHOT);
    [s.join("corpus.jsonl"), s.join("lexicon.tsv"), s.join("queue.jsonl")]
}

impl Store {
    pub fn exists(dir: &Path) -> bool {
        snapshot_paths(dir).iter().all(|p| p.is_file())
    }

    /// Writes `initial` as the snapshot of a new store in `dir`.
    pub fn create(dir: &Path, initial: &ReviewState) -> Result<Store, StoreError> {
        if Self::exists(dir) {
            return Err(StoreError::Exists { path: dir.display().to_string() });
        }
        fs::create_dir_all(dir.join(SNAPSHOT))?;
        let bytes = StoreBytes::of(initial);
        let [corpus, lexicon, queue] = snapshot_paths(dir);
        write_atomic(&corpus, &bytes.corpus)?;
        write_atomic(&lexicon, &bytes.lexicon)?;
        write_atomic(&queue, &bytes.queue)?;
        write_atomic(&dir.join(AUDIT), b"")?;
        Self::open(dir, false)
    }

    /// Loads the snapshot and replays the audit log.
    pub fn open(dir: &Path, readonly: bool) -> Result<Store, StoreError> {
        let initial = Self::load_snapshot(dir)?;
        let audit_path = dir.join(AUDIT);
        let (entries, good_len) = read_audit(&audit_path)?;
        let mut state = initial;
        for (i, entry) in entries.iter().enumerate() {
            state.apply_entry(entry).map_err(|e| StoreError::CorruptAudit { line: i + 1, reason: e.to_string() })?;
        }
        let audit = if readonly {
            None
        } else {
            let file = OpenOptions::new().create(true).append(true).open(&audit_path)?;
            if file.metadata()?.len() != good_len {
                log::warn!("{}: dropping torn final line", audit_path.display());
                file.set_len(good_len)?;
                file.sync_all()?;
            }
            Some(file)
        };
        Ok(Store { dir: dir.to_path_buf(), state, revision: entries.len() as u64, audit })
    }

    pub fn load_snapshot(dir: &Path) -> Result<ReviewState, StoreError> {
        let [corpus, lexicon, queue] = snapshot_paths(dir);
        for p in [&corpus, &lexicon, &queue] {
            if !p.is_file() {
                return Err(StoreError::Missing { path: dir.display().to_string(), missing: p.display().to_string() });
            }
        }
        let corpus = Corpus::load(&corpus, LoadMode::Strict)?.corpus;
        let lexicon = MorphLexicon::load(&lexicon)?;
        let queue: Vec<ReviewItem> = read_jsonl(&queue)?;
        Ok(ReviewState::new(corpus, lexicon, queue))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &ReviewState {
        &self.state
    }

    /// Number of mutations applied since the snapshot.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn is_readonly(&self) -> bool {
        self.audit.is_none()
    }

    pub fn bytes(&self) -> StoreBytes {
        StoreBytes::of(&self.state)
    }

    pub fn decide(&mut self, decision: &Decision) -> Result<AuditEntry, StoreError> {
        self.mutate(|s| s.apply(decision))
    }

    pub fn add_variant(&mut self, original: &str, surface: &str, kind: MorphKind, reviewer: Option<String>, timestamp: Option<String>) -> Result<AuditEntry, StoreError> {
        self.mutate(|s| s.add_variant(original, surface, kind, reviewer, timestamp))
    }

    /// Applies to a copy, makes the audit line durable, then publishes the copy.
    fn mutate(&mut self, f: impl FnOnce(&mut ReviewState) -> Result<AuditEntry, ReviewError>) -> Result<AuditEntry, StoreError> {
        let audit = self.audit.as_mut().ok_or(StoreError::ReadOnly)?;
        let mut next = self.state.clone();
        let entry = f(&mut next)?;
        let mut line = serde_json::to_vec(&entry).map_err(io::Error::other)?;
        line.push(b'\n');
        let before = audit.metadata()?.len();
        if let Err(e) = audit.write_all(&line).and_then(|()| audit.sync_data()) {
            let _ = audit.set_len(before);
            return Err(e.into());
        }
        self.state = next;
        self.revision += 1;
        Ok(entry)
    }

    /// Writes the current corpus, lexicon and queue into `dir`.
    pub fn export(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir)?;
        let bytes = self.bytes();
        write_atomic(&dir.join("corpus.jsonl"), &bytes.corpus)?;
        write_atomic(&dir.join("lexicon.tsv"), &bytes.lexicon)?;
        write_atomic(&dir.join("queue.jsonl"), &bytes.queue)?;
        Ok(())
    }
}

/// Complete audit entries and the byte length they occupy.
fn read_audit(path: &Path) -> Result<(Vec<AuditEntry>, u64), StoreError> {
    let text = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let complete = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut entries = Vec::new();
    for (i, line) in text[..complete].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let entry = serde_json::from_slice(line).map_err(|e| StoreError::CorruptAudit { line: i + 1, reason: e.to_string() })?;
        entries.push(entry);
    }
    Ok((entries, complete as u64))
}
