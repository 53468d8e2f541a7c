//! Machine-suggested annotation fixes and the reviewer decisions that settle them.
//!
//! Every mutation of a [`ReviewState`] yields an [`AuditEntry`]; replaying the
//! entries in order over the initial state reproduces the final one.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Corpus, GoldMorph, Label, TranscriptPair};
use crate::lexicon::{LexiconError, MorphKind, MorphLexicon};
use crate::phonetics::{phonetic_distance, PhoneticsTable};
use crate::resolver::{strip_fillers, MorphSpan, ResolveError, ResolveMode, Resolver, ResolverConfig};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown review item `{0}`")]
    UnknownItem(String),
    #[error("item `{0}` is not pending")]
    StaleItem(String),
    #[error("more than one decision for item `{0}`")]
    ConflictingDecision(String),
    #[error("invalid spans for item `{item}`: {reason}")]
    InvalidSpans { item: String, reason: String },
    #[error("item `{item}` refers to missing record `{record}`")]
    UnknownRecord { item: String, record: String },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

/// Why an item was queued. Declaration order is queue priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    UnannotatedDictionaryHit,
    BackendDiff,
    DiffersFromGold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
    Edited,
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(Status::Pending),
            "accepted" => Ok(Status::Accepted),
            "rejected" => Ok(Status::Rejected),
            "edited" => Ok(Status::Edited),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: String,
    pub record_id: String,
    pub source: String,
    /// Gold target at the time the item was raised.
    pub target: String,
    pub suggested: Vec<MorphSpan>,
    /// The resolver's full rewrite of `source`.
    pub suggested_output: String,
    pub reason: Reason,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided: Option<Vec<MorphSpan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_url: Option<String>,
}

pub fn item_id(record_id: &str) -> String {
    format!("rv-{record_id}")
}

fn is_gold(span: &MorphSpan, gold: &[GoldMorph]) -> bool {
    gold.iter().any(|g| g.start == span.start && g.end == span.end && g.original == span.resolved)
}

fn review_record(record: &TranscriptPair, resolver: &Resolver) -> Result<Option<ReviewItem>, ResolveError> {
    let unannotated = resolver
        .detect_dictionary(&record.source)
        .into_iter()
        .any(|s| !record.morphs.iter().any(|g| g.start == s.start && g.end == s.end));
    let resolution = resolver.resolve_sample(&record.id, &record.source)?;
    let differs = resolution.output != record.target;
    let reason = if unannotated {
        Reason::UnannotatedDictionaryHit
    } else if differs && resolver.config().mode == ResolveMode::Backend {
        Reason::BackendDiff
    } else if differs {
        Reason::DiffersFromGold
    } else {
        return Ok(None);
    };
    let suggested = resolution.spans.into_iter().filter(|s| !is_gold(s, &record.morphs)).collect();
    Ok(Some(ReviewItem {
        id: item_id(&record.id),
        record_id: record.id.clone(),
        source: record.source.clone(),
        target: record.target.clone(),
        suggested,
        suggested_output: resolution.output,
        reason,
        status: Status::Pending,
        decided: None,
        reviewer: None,
        created_at: None,
        decided_at: None,
        video_url: record.meta.video_url.clone(),
    }))
}

/// At most one item per record, raised when the resolver's output differs from
/// the gold target or a dictionary hit is missing from the gold morphs.
/// Items come back sorted by record id.
pub fn collaborative_filter(corpus: &Corpus, resolver: &Resolver) -> Result<Vec<ReviewItem>, ResolveError> {
    let mut items: Vec<ReviewItem> = corpus
        .records
        .par_iter()
        .map(|r| review_record(r, resolver))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    items.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accept,
    Reject,
    Edit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub item: String,
    pub action: Action,
    /// Required for `edit`, ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<MorphSpan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AuditAction {
    Accept { spans: Vec<MorphSpan> },
    Reject,
    Edit { spans: Vec<MorphSpan> },
    AddVariant { original: String, surface: String, kind: MorphKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub item: Option<String>,
    #[serde(flatten)]
    pub action: AuditAction,
    #[serde(default)]
    pub reviewer: Option<String>,
}

/// Corpus, lexicon and queue as one unit of review work.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReviewState {
    pub corpus: Corpus,
    pub lexicon: MorphLexicon,
    pub queue: Vec<ReviewItem>,
}

/// Guesses the morph kind of a reviewed pair for the lexicon.
pub fn infer_kind(surface: &str, original: &str) -> MorphKind {
    if surface.chars().any(|c| c.is_ascii_alphabetic()) {
        return MorphKind::Homophone;
    }
    if strip_fillers(surface, &ResolverConfig::default()).is_some() {
        return MorphKind::Transformation;
    }
    let table = PhoneticsTable::builtin();
    let d = phonetic_distance(&table.reading(surface), &table.reading(original));
    if d.normalized <= ResolverConfig::default().threshold {
        MorphKind::Homophone
    } else {
        MorphKind::Synonym
    }
}

fn validate_spans(item: &str, source: &str, spans: &[MorphSpan]) -> Result<Vec<MorphSpan>, ReviewError> {
    let invalid = |reason: String| ReviewError::InvalidSpans { item: item.to_string(), reason };
    if spans.is_empty() {
        return Err(invalid("no spans to apply".into()));
    }
    let chars: Vec<char> = source.chars().collect();
    let mut spans = spans.to_vec();
    spans.sort_by_key(|s| (s.start, s.end));
    for (i, s) in spans.iter().enumerate() {
        if s.start >= s.end || s.end > chars.len() {
            return Err(invalid(format!("span {}..{} outside the sentence", s.start, s.end)));
        }
        if chars[s.start..s.end].iter().collect::<String>() != s.surface {
            return Err(invalid(format!("surface `{}` does not match the sentence at {}..{}", s.surface, s.start, s.end)));
        }
        if s.resolved.is_empty() || s.resolved == s.surface {
            return Err(invalid(format!("span `{}` has no replacement", s.surface)));
        }
        if i > 0 && spans[i - 1].end > s.start {
            return Err(invalid(format!("span {}..{} overlaps its neighbour", s.start, s.end)));
        }
    }
    Ok(spans)
}

impl ReviewState {
    pub fn new(corpus: Corpus, lexicon: MorphLexicon, queue: Vec<ReviewItem>) -> Self {
        ReviewState { corpus, lexicon, queue }
    }

    pub fn item(&self, id: &str) -> Option<&ReviewItem> {
        self.queue.iter().find(|i| i.id == id)
    }

    /// Applies one decision. On error the state is unchanged.
    pub fn apply(&mut self, decision: &Decision) -> Result<AuditEntry, ReviewError> {
        let idx = self.queue.iter().position(|i| i.id == decision.item).ok_or_else(|| ReviewError::UnknownItem(decision.item.clone()))?;
        let item = &self.queue[idx];
        if item.status != Status::Pending {
            return Err(ReviewError::StaleItem(item.id.clone()));
        }
        let (status, action) = match decision.action {
            Action::Reject => (Status::Rejected, AuditAction::Reject),
            Action::Accept => {
                let spans = validate_spans(&item.id, &item.source, &item.suggested)?;
                (Status::Accepted, AuditAction::Accept { spans })
            }
            Action::Edit => {
                let given = decision.spans.as_deref().ok_or_else(|| ReviewError::InvalidSpans {
                    item: item.id.clone(),
                    reason: "edit requires spans".into(),
                })?;
                let spans = validate_spans(&item.id, &item.source, given)?;
                (Status::Edited, AuditAction::Edit { spans })
            }
        };

        let decided = match &action {
            AuditAction::Accept { spans } | AuditAction::Edit { spans } => Some(spans.clone()),
            _ => None,
        };
        if let Some(spans) = &decided {
            let rec_idx = self
                .corpus
                .records
                .iter()
                .position(|r| r.id == item.record_id)
                .ok_or_else(|| ReviewError::UnknownRecord { item: item.id.clone(), record: item.record_id.clone() })?;
            let record = merge_spans(&self.corpus.records[rec_idx], spans).map_err(|reason| ReviewError::InvalidSpans {
                item: item.id.clone(),
                reason,
            })?;
            let mut lexicon = self.lexicon.clone();
            for s in spans {
                match lexicon.lookup_variant(&s.surface) {
                    None => lexicon = lexicon.add_variant(&s.resolved, &s.surface, infer_kind(&s.surface, &s.resolved))?,
                    Some(v) if v.original != s.resolved => {
                        log::warn!("`{}` already restores to `{}`; lexicon left unchanged", s.surface, v.original)
                    }
                    Some(_) => {}
                }
            }
            self.corpus.records[rec_idx] = record;
            self.lexicon = lexicon;
        }

        let item = &mut self.queue[idx];
        item.status = status;
        item.decided = decided;
        item.reviewer = decision.reviewer.clone();
        item.decided_at = decision.timestamp.clone();
        Ok(AuditEntry {
            timestamp: decision.timestamp.clone(),
            item: Some(item.id.clone()),
            action,
            reviewer: decision.reviewer.clone(),
        })
    }

    /// Adds a variant outside any review item.
    pub fn add_variant(
        &mut self,
        original: &str,
        surface: &str,
        kind: MorphKind,
        reviewer: Option<String>,
        timestamp: Option<String>,
    ) -> Result<AuditEntry, ReviewError> {
        self.lexicon = self.lexicon.add_variant(original, surface, kind)?;
        Ok(AuditEntry {
            timestamp,
            item: None,
            action: AuditAction::AddVariant { original: original.into(), surface: surface.into(), kind },
            reviewer,
        })
    }

    /// Re-applies a logged mutation.
    pub fn apply_entry(&mut self, entry: &AuditEntry) -> Result<(), ReviewError> {
        let decision = |action, spans| -> Result<Decision, ReviewError> {
            Ok(Decision {
                item: entry.item.clone().ok_or_else(|| ReviewError::UnknownItem(String::new()))?,
                action,
                spans,
                reviewer: entry.reviewer.clone(),
                timestamp: entry.timestamp.clone(),
            })
        };
        match &entry.action {
            AuditAction::Accept { .. } => self.apply(&decision(Action::Accept, None)?).map(drop),
            AuditAction::Reject => self.apply(&decision(Action::Reject, None)?).map(drop),
            AuditAction::Edit { spans } => self.apply(&decision(Action::Edit, Some(spans.clone()))?).map(drop),
            AuditAction::AddVariant { original, surface, kind } => {
                self.add_variant(original, surface, *kind, entry.reviewer.clone(), entry.timestamp.clone()).map(drop)
            }
        }
    }
}

/// The record with `spans` merged into its gold morphs; gold morphs they overlap are replaced.
fn merge_spans(record: &TranscriptPair, spans: &[MorphSpan]) -> Result<TranscriptPair, String> {
    let mut morphs: Vec<GoldMorph> = record
        .morphs
        .iter()
        .filter(|g| !spans.iter().any(|s| s.start < g.end && g.start < s.end))
        .cloned()
        .collect();
    morphs.extend(spans.iter().map(|s| GoldMorph {
        surface: s.surface.clone(),
        original: s.resolved.clone(),
        start: s.start,
        end: s.end,
    }));
    let mut next = TranscriptPair::positive(record.id.clone(), record.source.clone(), morphs, record.split);
    next.meta = record.meta.clone();
    debug_assert_eq!(next.label, Label::Positive);
    next.check().map_err(|v| v.to_string())?;
    Ok(next)
}

/// Applies a batch atomically: either every decision succeeds or `state` is untouched.
pub fn apply_decisions(state: &mut ReviewState, decisions: &[Decision]) -> Result<Vec<AuditEntry>, ReviewError> {
    let mut seen = HashSet::new();
    for d in decisions {
        if !seen.insert(d.item.as_str()) {
            return Err(ReviewError::ConflictingDecision(d.item.clone()));
        }
    }
    let mut next = state.clone();
    let log = decisions.iter().map(|d| next.apply(d)).collect::<Result<Vec<_>, _>>()?;
    *state = next;
    Ok(log)
}

pub fn replay(initial: &ReviewState, log: &[AuditEntry]) -> Result<ReviewState, ReviewError> {
    let mut state = initial.clone();
    for entry in log {
        state.apply_entry(entry)?;
    }
    Ok(state)
}
