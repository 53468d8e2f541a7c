//! Transcript corpora: record schema, validated loading, statistics and
//! split hygiene. The review loop lives in [`review`].

pub mod review;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Provenance;
use crate::resolver::Resolver;

pub use review::{
    apply_decisions, collaborative_filter, replay, Action, AuditEntry, Decision, Reason, ReviewError, ReviewItem, ReviewState, Status,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed { path: String, line: usize, reason: String },
    #[error("{path}:{line}: record `{id}` violates {which}")]
    InvariantViolation { path: String, line: usize, id: String, which: Violation },
    #[error("{path}:{line}: duplicate record id `{id}`")]
    DuplicateId { path: String, line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test1,
    Test2,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Valid, Split::Test1, Split::Test2];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test1 => "test1",
            Split::Test2 => "test2",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown split `{s}`"))
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gold morph: `surface` at code points `start..end` of the source restores to `original`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldMorph {
    pub surface: String,
    pub original: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default)]
    pub channel: String,
    #[serde(default)]
    pub asr: String,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_url: Option<String>,
}

fn default_provenance() -> Provenance {
    Provenance::Annotated
}

impl Default for Meta {
    fn default() -> Self {
        Meta { channel: String::new(), asr: String::new(), provenance: Provenance::Annotated, video_url: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptPair {
    pub id: String,
    pub source: String,
    pub target: String,
    pub label: Label,
    #[serde(default)]
    pub morphs: Vec<GoldMorph>,
    pub split: Split,
    #[serde(default)]
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyId,
    NegativeTargetDiffers,
    NegativeHasMorphs,
    PositiveWithoutMorphs,
    MorphOutOfRange { index: usize },
    MorphSurfaceMismatch { index: usize },
    MorphsOverlap { index: usize },
    MorphUnchanged { index: usize },
    TargetMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "non-empty id"),
            Violation::NegativeTargetDiffers => write!(f, "negative: source == target"),
            Violation::NegativeHasMorphs => write!(f, "negative: no morphs"),
            Violation::PositiveWithoutMorphs => write!(f, "positive: at least one morph"),
            Violation::MorphOutOfRange { index } => write!(f, "morph {index}: offsets inside source"),
            Violation::MorphSurfaceMismatch { index } => write!(f, "morph {index}: surface == source[start..end]"),
            Violation::MorphsOverlap { index } => write!(f, "morph {index}: sorted and non-overlapping"),
            Violation::MorphUnchanged { index } => write!(f, "morph {index}: original differs from surface"),
            Violation::TargetMismatch => write!(f, "applying morphs to source yields target"),
        }
    }
}

/// Replaces each morph's span in `source` with its original, right to left.
/// Morphs must be sorted and disjoint.
pub fn rebuild_target(source: &str, morphs: &[GoldMorph]) -> String {
    let mut chars: Vec<char> = source.chars().collect();
    for m in morphs.iter().rev() {
        chars.splice(m.start..m.end, m.original.chars());
    }
    chars.into_iter().collect()
}

impl TranscriptPair {
    pub fn negative(id: impl Into<String>, text: impl Into<String>, split: Split) -> Self {
        let text = text.into();
        TranscriptPair {
            id: id.into(),
            target: text.clone(),
            source: text,
            label: Label::Negative,
            morphs: Vec::new(),
            split,
            meta: Meta::default(),
        }
    }

    /// A positive record whose target is rebuilt from `morphs`.
    pub fn positive(id: impl Into<String>, source: impl Into<String>, mut morphs: Vec<GoldMorph>, split: Split) -> Self {
        let source = source.into();
        morphs.sort_by_key(|m| (m.start, m.end));
        TranscriptPair {
            id: id.into(),
            target: rebuild_target(&source, &morphs),
            source,
            label: Label::Positive,
            morphs,
            split,
            meta: Meta::default(),
        }
    }

    /// Every record invariant; returns the first violation found.
    pub fn check(&self) -> Result<(), Violation> {
        if self.id.is_empty() {
            return Err(Violation::EmptyId);
        }
        match self.label {
            Label::Negative => {
                if !self.morphs.is_empty() {
                    return Err(Violation::NegativeHasMorphs);
                }
                if self.source != self.target {
                    return Err(Violation::NegativeTargetDiffers);
                }
                Ok(())
            }
            Label::Positive => {
                if self.morphs.is_empty() {
                    return Err(Violation::PositiveWithoutMorphs);
                }
                let chars: Vec<char> = self.source.chars().collect();
                let mut prev_end = 0;
                for (index, m) in self.morphs.iter().enumerate() {
                    if m.start >= m.end || m.end > chars.len() {
                        return Err(Violation::MorphOutOfRange { index });
                    }
                    if index > 0 && m.start < prev_end {
                        return Err(Violation::MorphsOverlap { index });
                    }
                    if chars[m.start..m.end].iter().collect::<String>() != m.surface {
                        return Err(Violation::MorphSurfaceMismatch { index });
                    }
                    if m.original == m.surface {
                        return Err(Violation::MorphUnchanged { index });
                    }
                    prev_end = m.end;
                }
                if rebuild_target(&self.source, &self.morphs) != self.target {
                    return Err(Violation::TargetMismatch);
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Abort on the first bad record.
    #[default]
    Strict,
    /// Set bad records aside and keep going.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quarantined {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<TranscriptPair>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub quarantined: Vec<Quarantined>,
}

impl Corpus {
    pub fn new(records: Vec<TranscriptPair>) -> Self {
        Corpus { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TranscriptPair> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &TranscriptPair> + '_ {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn positives(&self) -> impl Iterator<Item = &TranscriptPair> + '_ {
        self.records.iter().filter(|r| r.label == Label::Positive)
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        crate::io::to_jsonl(&self.records)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        crate::io::write_atomic(path, &self.to_jsonl())
    }

    pub fn load(path: &Path, mode: LoadMode) -> Result<LoadReport, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string(), mode)
    }

    /// Parses JSON-lines text; `origin` labels error messages.
    pub fn parse(text: &str, origin: &str, mode: LoadMode) -> Result<LoadReport, CorpusError> {
        let mut report = LoadReport::default();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = match serde_json::from_str::<TranscriptPair>(line) {
                Err(e) => CorpusError::Malformed { path: origin.to_string(), line: line_no, reason: e.to_string() },
                Ok(rec) => match rec.check() {
                    Err(which) => CorpusError::InvariantViolation { path: origin.to_string(), line: line_no, id: rec.id, which },
                    Ok(()) if !seen.insert(rec.id.clone()) => {
                        CorpusError::DuplicateId { path: origin.to_string(), line: line_no, id: rec.id }
                    }
                    Ok(()) => {
                        report.corpus.records.push(rec);
                        continue;
                    }
                },
            };
            if mode == LoadMode::Strict {
                return Err(err);
            }
            let id = match &err {
                CorpusError::InvariantViolation { id, .. } | CorpusError::DuplicateId { id, .. } => Some(id.clone()),
                _ => None,
            };
            log::warn!("quarantined: {err}");
            report.quarantined.push(Quarantined { line: line_no, id, reason: err.to_string() });
        }
        Ok(report)
    }

    pub fn stats(&self) -> CorpusStats {
        stats(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub positive: usize,
    pub negative: usize,
    pub morphs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub positive: usize,
    pub negative: usize,
    pub morph_instances: usize,
    pub splits: BTreeMap<String, SplitStats>,
    pub distinct_originals: usize,
    pub distinct_variants: usize,
    pub mean_variants_per_original: f64,
    /// Mean gold morphs per positive record.
    pub mean_morphs_per_positive: f64,
}

pub fn stats(corpus: &Corpus) -> CorpusStats {
    let mut s = CorpusStats { records: corpus.len(), ..Default::default() };
    let mut originals = BTreeSet::new();
    let mut variants = BTreeSet::new();
    for r in &corpus.records {
        let split = s.splits.entry(r.split.name().to_string()).or_default();
        match r.label {
            Label::Positive => {
                split.positive += 1;
                s.positive += 1;
            }
            Label::Negative => {
                split.negative += 1;
                s.negative += 1;
            }
        }
        split.morphs += r.morphs.len();
        s.morph_instances += r.morphs.len();
        for m in &r.morphs {
            originals.insert(m.original.as_str());
            variants.insert(m.surface.as_str());
        }
    }
    s.distinct_originals = originals.len();
    s.distinct_variants = variants.len();
    s.mean_variants_per_original = ratio(s.distinct_variants, s.distinct_originals);
    s.mean_morphs_per_positive = ratio(s.morph_instances, s.positive);
    s
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    /// Ids that occur in more than one split.
    pub shared_ids: Vec<String>,
    /// (train id, test id) pairs with identical source and target.
    pub leaked_pairs: Vec<(String, String)>,
    /// ASR tags used by both test2 and train.
    pub test2_shared_asr: Vec<String>,
    /// Channels used by both test2 and train.
    pub test2_shared_channels: Vec<String>,
}

impl SplitReport {
    pub fn is_clean(&self) -> bool {
        self.shared_ids.is_empty() && self.leaked_pairs.is_empty() && self.test2_shared_asr.is_empty() && self.test2_shared_channels.is_empty()
    }
}

pub fn split_check(corpus: &Corpus) -> SplitReport {
    let mut report = SplitReport::default();
    let mut splits_of: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    for r in &corpus.records {
        splits_of.entry(&r.id).or_default().insert(r.split);
    }
    report.shared_ids = splits_of.into_iter().filter(|(_, s)| s.len() > 1).map(|(id, _)| id.to_string()).collect();

    let mut train_pairs: HashMap<(&str, &str), &str> = HashMap::new();
    for r in corpus.split(Split::Train) {
        train_pairs.entry((&r.source, &r.target)).or_insert(&r.id);
    }
    for r in corpus.records.iter().filter(|r| matches!(r.split, Split::Test1 | Split::Test2)) {
        if let Some(train_id) = train_pairs.get(&(r.source.as_str(), r.target.as_str())) {
            report.leaked_pairs.push((train_id.to_string(), r.id.clone()));
        }
    }

    let train_asr: BTreeSet<&str> = corpus.split(Split::Train).map(|r| r.meta.asr.as_str()).filter(|a| !a.is_empty()).collect();
    let train_channels: BTreeSet<&str> =
        corpus.split(Split::Train).map(|r| r.meta.channel.as_str()).filter(|c| !c.is_empty()).collect();
    let test2_asr: BTreeSet<&str> = corpus.split(Split::Test2).map(|r| r.meta.asr.as_str()).collect();
    let test2_channels: BTreeSet<&str> = corpus.split(Split::Test2).map(|r| r.meta.channel.as_str()).collect();
    report.test2_shared_asr = test2_asr.intersection(&train_asr).map(|s| s.to_string()).collect();
    report.test2_shared_channels = test2_channels.intersection(&train_channels).map(|s| s.to_string()).collect();
    report
}

/// A record for downstream violation classification: label 0, 1 or 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub id: String,
    pub text: String,
    pub label: u8,
}

/// Replaces every text with its resolved form, keeping ids and labels.
pub fn preprocess_for_classification(records: &[ClassificationRecord], resolver: &Resolver) -> Vec<ClassificationRecord> {
    records
        .par_iter()
        .map(|r| ClassificationRecord { id: r.id.clone(), text: resolver.resolve(&r.text).output, label: r.label })
        .collect()
}
