//! Locating morph spans in a transcript and rewriting them to their originals.
//!
//! Three sources of spans exist: exact dictionary hits, generative phonetic
//! rules over the lexicon's originals, and the diff between the input and an
//! external backend's prediction.

mod align;
mod backend;
mod generative;

use std::cmp::Reverse;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{CompiledMatcher, MorphLexicon};
use crate::phonetics::PhoneticsTable;

pub use align::{align_diff, edit_distance};
pub use backend::{resolve_batch, resolve_with_backend, BackendError, FileBackend, HttpBackend, PredictionBackend};
pub use generative::{detect_generative, strip_fillers};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("invalid resolver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolveMode {
    Dict,
    #[default]
    Full,
    Backend,
}

impl std::str::FromStr for ResolveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dict" => Ok(ResolveMode::Dict),
            "full" => Ok(ResolveMode::Full),
            "backend" => Ok(ResolveMode::Backend),
            other => Err(format!("unknown mode `{other}` (expected dict, full or backend)")),
        }
    }
}

impl fmt::Display for ResolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResolveMode::Dict => "dict",
            ResolveMode::Full => "full",
            ResolveMode::Backend => "backend",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolverConfig {
    pub mode: ResolveMode,
    pub fillers: Vec<String>,
    pub reduplication_prefixes: Vec<char>,
    pub max_fillers: usize,
    /// Maximum normalized phonetic distance accepted by the generative rules.
    pub threshold: f64,
    pub tone_neutral: bool,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig {
            mode: ResolveMode::Full,
            fillers: vec!["某".into(), "什么".into()],
            reduplication_prefixes: vec!['小'],
            max_fillers: 2,
            threshold: 0.25,
            tone_neutral: true,
        }
    }
}

impl ResolverConfig {
    pub fn with_mode(mode: ResolveMode) -> Self {
        ResolverConfig { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ResolveError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ResolveError::InvalidConfig(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.fillers.iter().any(String::is_empty) {
            return Err(ResolveError::InvalidConfig("filler strings must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Dictionary,
    FillerInsertion,
    SymbolOnset,
    BackendDiff,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Dictionary => "dictionary",
            Rule::FillerInsertion => "filler_insertion",
            Rule::SymbolOnset => "symbol_onset",
            Rule::BackendDiff => "backend_diff",
        }
    }
}

/// A located morph: `surface` occupies code points `start..end` of the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub resolved: String,
    pub rule: Rule,
    pub confidence: f64,
}

impl MorphSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn overlaps(&self, other: &MorphSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub input: String,
    pub output: String,
    pub spans: Vec<MorphSpan>,
}

impl Resolution {
    /// Builds the output by replacing each span. Spans must not overlap.
    pub fn from_spans(input: &str, mut spans: Vec<MorphSpan>) -> Resolution {
        spans.sort_by_key(|s| (s.start, s.end));
        let output = apply_spans(input, &spans);
        Resolution { input: input.to_string(), output, spans }
    }

    pub fn unchanged(input: &str) -> Resolution {
        Resolution { input: input.to_string(), output: input.to_string(), spans: Vec::new() }
    }

    /// Span consistency: spans are sorted, disjoint, match the input, and rebuild the output.
    /// A zero-width span is only allowed on empty input.
    pub fn is_consistent(&self) -> bool {
        let chars: Vec<char> = self.input.chars().collect();
        let sorted = self.spans.windows(2).all(|w| w[0].end <= w[1].start);
        let located = self.spans.iter().all(|s| {
            (s.start < s.end || chars.is_empty()) && s.end <= chars.len() && chars[s.start..s.end].iter().collect::<String>() == s.surface
        });
        sorted && located && apply_spans(&self.input, &self.spans) == self.output
    }
}

/// Replaces spans right to left so earlier offsets stay valid.
pub fn apply_spans(input: &str, spans: &[MorphSpan]) -> String {
    let mut chars: Vec<char> = input.chars().collect();
    let mut ordered: Vec<&MorphSpan> = spans.iter().collect();
    ordered.sort_by_key(|s| Reverse(s.start));
    for s in ordered {
        chars.splice(s.start..s.end, s.resolved.chars());
    }
    chars.into_iter().collect()
}

/// Dictionary hits: leftmost-longest and non-overlapping, confidence 1.
pub fn detect_dictionary(text: &str, matcher: &CompiledMatcher, lexicon: &MorphLexicon) -> Vec<MorphSpan> {
    matcher
        .find_all(text)
        .into_iter()
        .map(|hit| {
            let entry = &lexicon.entries()[hit.entry];
            MorphSpan {
                start: hit.start,
                end: hit.end,
                surface: entry.variants[hit.variant].surface.clone(),
                resolved: entry.original.clone(),
                rule: Rule::Dictionary,
                confidence: 1.0,
            }
        })
        .collect()
}

/// A generative candidate plus the lexicon order of its original, used as the last tie-break.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub span: MorphSpan,
    pub entry: usize,
}

/// Keeps a non-overlapping subset: dictionary spans first, then longer spans,
/// then higher confidence, then leftmost.
pub(crate) fn arbitrate(dictionary: Vec<MorphSpan>, generative: Vec<Candidate>) -> Vec<MorphSpan> {
    let mut all: Vec<Candidate> = dictionary.into_iter().map(|span| Candidate { span, entry: 0 }).collect();
    all.extend(generative);
    all.sort_by(|a, b| {
        let (x, y) = (&a.span, &b.span);
        (y.rule == Rule::Dictionary)
            .cmp(&(x.rule == Rule::Dictionary))
            .then(y.len().cmp(&x.len()))
            .then(y.confidence.total_cmp(&x.confidence))
            .then(x.start.cmp(&y.start))
            .then(a.entry.cmp(&b.entry))
    });
    let mut kept: Vec<MorphSpan> = Vec::new();
    for c in all {
        if !kept.iter().any(|k| k.overlaps(&c.span)) {
            kept.push(c.span);
        }
    }
    kept.sort_by_key(|s| s.start);
    kept
}

/// A lexicon compiled for resolution. Immutable; share it across threads.
#[derive(Clone)]
pub struct Resolver {
    lexicon: Arc<MorphLexicon>,
    matcher: CompiledMatcher,
    table: Arc<PhoneticsTable>,
    config: ResolverConfig,
    originals: Arc<Vec<generative::OriginalForm>>,
    backend: Option<Arc<dyn PredictionBackend>>,
}

impl fmt::Debug for Resolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Resolver")
            .field("entries", &self.lexicon.entries().len())
            .field("config", &self.config)
            .field("backend", &self.backend.is_some())
            .finish()
    }
}

impl Resolver {
    pub fn new(lexicon: Arc<MorphLexicon>, config: ResolverConfig) -> Result<Self, ResolveError> {
        Self::with_table(lexicon, PhoneticsTable::shared(), config)
    }

    pub fn with_table(lexicon: Arc<MorphLexicon>, table: Arc<PhoneticsTable>, config: ResolverConfig) -> Result<Self, ResolveError> {
        config.validate()?;
        let matcher = lexicon.build_matcher();
        let originals = Arc::new(generative::OriginalForm::collect(&lexicon, &table));
        Ok(Resolver { lexicon, matcher, table, config, originals, backend: None })
    }

    pub fn with_backend(mut self, backend: Arc<dyn PredictionBackend>) -> Self {
        self.backend = Some(backend);
        self
    }

    pub fn lexicon(&self) -> &Arc<MorphLexicon> {
        &self.lexicon
    }

    pub fn config(&self) -> &ResolverConfig {
        &self.config
    }

    pub fn matcher(&self) -> &CompiledMatcher {
        &self.matcher
    }

    pub fn table(&self) -> &PhoneticsTable {
        &self.table
    }

    pub fn detect_dictionary(&self, text: &str) -> Vec<MorphSpan> {
        detect_dictionary(text, &self.matcher, &self.lexicon)
    }

    pub fn detect_generative(&self, text: &str) -> Vec<MorphSpan> {
        let mut c = generative::detect(text, &self.originals, &self.table, &self.config);
        c.sort_by_key(|c| (c.span.start, c.span.end, c.entry));
        c.into_iter().map(|c| c.span).collect()
    }

    /// Local resolution: dictionary hits, plus generative rules in `full` mode.
    /// `backend` mode resolves locally with the dictionary only; use
    /// [`Resolver::resolve_sample`] to query the backend.
    pub fn resolve(&self, text: &str) -> Resolution {
        let dictionary = self.detect_dictionary(text);
        let generative = if self.config.mode == ResolveMode::Full {
            generative::detect(text, &self.originals, &self.table, &self.config)
        } else {
            Vec::new()
        };
        let spans = arbitrate(dictionary, generative);
        let res = Resolution::from_spans(text, spans);
        debug_assert!(res.is_consistent());
        res
    }

    /// Resolves one sample according to the configured mode.
    pub fn resolve_sample(&self, id: &str, text: &str) -> Result<Resolution, ResolveError> {
        match self.config.mode {
            ResolveMode::Backend => {
                let backend = self
                    .backend
                    .as_deref()
                    .ok_or_else(|| BackendError::Unavailable("no prediction backend configured".into()))?;
                Ok(resolve_with_backend(id, text, backend)?)
            }
            _ => Ok(self.resolve(text)),
        }
    }
}

/// Resolves `text` against `lexicon` with a one-off [`Resolver`].
pub fn resolve(text: &str, lexicon: &MorphLexicon, config: &ResolverConfig) -> Result<Resolution, ResolveError> {
    Ok(Resolver::new(Arc::new(lexicon.clone()), config.clone())?.resolve(text))
}
