//! The morph dictionary: original words and their morph variants.
//!
//! A variant surface belongs to exactly one original. The lexicon file is a
//! TSV with one variant per line:
//!
//! ```text
//! original<TAB>variant<TAB>kind(T|H|S)<TAB>provenance
//! ```

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phonetics::{is_han, PhoneticsTable};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("variant `{surface}` appears under both `{first}` and `{second}`")]
    DuplicateVariant { surface: String, first: String, second: String },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("lexicon has no entries")]
    EmptyLexicon,
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("invalid variant `{surface}`: {reason}")]
    InvalidVariant { surface: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphKind {
    Transformation,
    Homophone,
    Synonym,
}

impl MorphKind {
    pub fn code(self) -> char {
        match self {
            MorphKind::Transformation => 'T',
            MorphKind::Homophone => 'H',
            MorphKind::Synonym => 'S',
        }
    }

    pub fn from_code(s: &str) -> Option<MorphKind> {
        match s {
            "T" => Some(MorphKind::Transformation),
            "H" => Some(MorphKind::Homophone),
            "S" => Some(MorphKind::Synonym),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MorphKind::Transformation => "transformation",
            MorphKind::Homophone => "homophone",
            MorphKind::Synonym => "synonym",
        }
    }
}

impl fmt::Display for MorphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Annotated,
    Generated,
    Reviewed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Annotated => "annotated",
            Provenance::Generated => "generated",
            Provenance::Reviewed => "reviewed",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "annotated" => Ok(Provenance::Annotated),
            "generated" => Ok(Provenance::Generated),
            "reviewed" => Ok(Provenance::Reviewed),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphVariant {
    pub surface: String,
    pub kind: MorphKind,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphEntry {
    pub original: String,
    pub variants: Vec<MorphVariant>,
}

/// Result of [`MorphLexicon::lookup_variant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantRef<'a> {
    pub original: &'a str,
    pub variant: &'a MorphVariant,
    pub entry: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MorphLexicon {
    entries: Vec<MorphEntry>,
    by_surface: HashMap<String, (usize, usize)>,
    by_original: HashMap<String, usize>,
}

impl PartialEq for MorphLexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl MorphLexicon {
    /// Builds a lexicon from entries, enforcing the one-variant-one-original invariant.
    pub fn from_entries(entries: Vec<MorphEntry>) -> Result<Self, LexiconError> {
        let mut lex = MorphLexicon::default();
        for entry in entries {
            if entry.variants.is_empty() {
                return Err(LexiconError::InvalidVariant {
                    surface: entry.original.clone(),
                    reason: "entry has no variants".into(),
                });
            }
            for v in entry.variants {
                lex.insert(&entry.original, v)?;
            }
        }
        if lex.entries.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let file = fs::File::open(path)?;
        Self::read(BufReader::new(file))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, LexiconError> {
        let mut lex = MorphLexicon::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: String| LexiconError::MalformedLine { line: lineno, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(malformed(format!("expected 4 tab-separated fields, found {}", fields.len())));
            }
            let kind = MorphKind::from_code(fields[2]).ok_or_else(|| malformed(format!("unknown kind `{}`", fields[2])))?;
            let provenance: Provenance = fields[3].parse().map_err(malformed)?;
            let (original, surface) = (fields[0], fields[1]);
            if original.is_empty() || surface.is_empty() {
                return Err(malformed("empty original or variant".into()));
            }
            if original == surface {
                return Err(malformed(format!("variant `{surface}` equals its original")));
            }
            lex.insert(original, MorphVariant { surface: surface.to_string(), kind, provenance })?;
        }
        if lex.entries.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        Ok(lex)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        crate::io::write_atomic(path.as_ref(), &buf)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# original\tvariant\tkind\tprovenance")?;
        for e in &self.entries {
            for v in &e.variants {
                writeln!(out, "{}\t{}\t{}\t{}", e.original, v.surface, v.kind.code(), v.provenance.as_str())?;
            }
        }
        Ok(())
    }

    fn insert(&mut self, original: &str, variant: MorphVariant) -> Result<(), LexiconError> {
        if variant.surface.is_empty() || variant.surface == original {
            return Err(LexiconError::InvalidVariant {
                surface: variant.surface,
                reason: "variant must be non-empty and differ from its original".into(),
            });
        }
        if let Some(&(e, _)) = self.by_surface.get(&variant.surface) {
            return Err(LexiconError::DuplicateVariant {
                surface: variant.surface,
                first: self.entries[e].original.clone(),
                second: original.to_string(),
            });
        }
        let e = match self.by_original.get(original) {
            Some(&e) => e,
            None => {
                self.entries.push(MorphEntry { original: original.to_string(), variants: Vec::new() });
                self.by_original.insert(original.to_string(), self.entries.len() - 1);
                self.entries.len() - 1
            }
        };
        self.by_surface.insert(variant.surface.clone(), (e, self.entries[e].variants.len()));
        self.entries[e].variants.push(variant);
        Ok(())
    }

    /// Returns a new lexicon version with `surface` added under `original`.
    pub fn add_variant(&self, original: &str, surface: &str, kind: MorphKind) -> Result<MorphLexicon, LexiconError> {
        let mut next = self.clone();
        next.insert(original, MorphVariant { surface: surface.to_string(), kind, provenance: Provenance::Reviewed })?;
        Ok(next)
    }

    pub fn entries(&self) -> &[MorphEntry] {
        &self.entries
    }

    pub fn entry(&self, original: &str) -> Option<&MorphEntry> {
        self.by_original.get(original).map(|&e| &self.entries[e])
    }

    pub fn originals(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.original.as_str())
    }

    pub fn variants(&self) -> impl Iterator<Item = (&MorphEntry, &MorphVariant)> + '_ {
        self.entries.iter().flat_map(|e| e.variants.iter().map(move |v| (e, v)))
    }

    pub fn variant_count(&self) -> usize {
        self.by_surface.len()
    }

    /// Exact-match lookup of a variant surface.
    pub fn lookup_variant(&self, surface: &str) -> Option<VariantRef<'_>> {
        self.by_surface.get(surface).map(|&(e, v)| VariantRef {
            original: &self.entries[e].original,
            variant: &self.entries[e].variants[v],
            entry: e,
        })
    }

    /// Maps variant surfaces to originals, keeping first-seen order and dropping repeats.
    pub fn originals_of<S: AsRef<str>>(&self, surfaces: &[S]) -> Result<Vec<String>, LexiconError> {
        let mut out: Vec<String> = Vec::new();
        for s in surfaces {
            let r = self.lookup_variant(s.as_ref()).ok_or_else(|| LexiconError::UnknownVariant(s.as_ref().to_string()))?;
            if !out.iter().any(|o| o == r.original) {
                out.push(r.original.to_string());
            }
        }
        Ok(out)
    }

    /// Keeps only the variants for which `keep` is true. Entries left empty are dropped.
    pub fn retain_variants(&self, mut keep: impl FnMut(&str, &MorphVariant) -> bool) -> Result<MorphLexicon, LexiconError> {
        let entries = self
            .entries
            .iter()
            .map(|e| MorphEntry {
                original: e.original.clone(),
                variants: e.variants.iter().filter(|v| keep(&e.original, v)).cloned().collect(),
            })
            .filter(|e| !e.variants.is_empty())
            .collect();
        MorphLexicon::from_entries(entries)
    }

    pub fn build_matcher(&self) -> CompiledMatcher {
        CompiledMatcher::new(self)
    }

    pub fn stats(&self) -> LexiconStats {
        let mut by_kind = HashMap::new();
        let mut by_provenance = HashMap::new();
        for (_, v) in self.variants() {
            *by_kind.entry(v.kind.name().to_string()).or_insert(0) += 1;
            *by_provenance.entry(v.provenance.as_str().to_string()).or_insert(0) += 1;
        }
        let originals = self.entries.len();
        let variants = self.variant_count();
        LexiconStats {
            originals,
            variants,
            mean_variants_per_original: if originals == 0 { 0.0 } else { variants as f64 / originals as f64 },
            by_kind: by_kind.into_iter().collect(),
            by_provenance: by_provenance.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconStats {
    pub originals: usize,
    pub variants: usize,
    pub mean_variants_per_original: f64,
    pub by_kind: std::collections::BTreeMap<String, usize>,
    pub by_provenance: std::collections::BTreeMap<String, usize>,
}

/// A hit of the compiled matcher, in code-point offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchHit {
    pub start: usize,
    pub end: usize,
    pub entry: usize,
    pub variant: usize,
}

/// Leftmost-longest, non-overlapping multi-pattern matcher over all variant surfaces.
#[derive(Debug, Clone)]
pub struct CompiledMatcher {
    automaton: AhoCorasick,
    targets: Vec<(usize, usize)>,
}

impl CompiledMatcher {
    pub fn new(lexicon: &MorphLexicon) -> Self {
        let mut patterns = Vec::with_capacity(lexicon.variant_count());
        let mut targets = Vec::with_capacity(lexicon.variant_count());
        for (e, entry) in lexicon.entries.iter().enumerate() {
            for (v, variant) in entry.variants.iter().enumerate() {
                patterns.push(variant.surface.as_str());
                targets.push((e, v));
            }
        }
        let automaton = AhoCorasickBuilder::new()
            .match_kind(MatchKind::LeftmostLongest)
            .build(&patterns)
            .expect("variant patterns are non-empty strings");
        CompiledMatcher { automaton, targets }
    }

    pub fn find_all(&self, text: &str) -> Vec<MatchHit> {
        let offsets = char_offsets(text);
        self.automaton
            .find_iter(text)
            .map(|m| {
                let (entry, variant) = self.targets[m.pattern().as_usize()];
                MatchHit { start: offsets[m.start()], end: offsets[m.end()], entry, variant }
            })
            .collect()
    }
}

/// Maps every byte offset that falls on a char boundary (plus `len`) to a code-point index.
pub(crate) fn char_offsets(text: &str) -> Vec<usize> {
    let mut map = vec![0; text.len() + 1];
    let mut n = 0;
    for (b, _) in text.char_indices() {
        map[b] = n;
        n += 1;
    }
    map[text.len()] = n;
    map
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum LexiconWarning {
    /// An original contains a variant surface, so restored text would be flagged again.
    OriginalContainsVariant { original: String, variant: String },
    /// A variant occurs inside a longer variant.
    NestedVariant { inner: String, outer: String },
    /// A Han character has no entry in the phonetics table.
    MissingPhonetics { word: String, ch: char },
}

impl fmt::Display for LexiconWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexiconWarning::OriginalContainsVariant { original, variant } => {
                write!(f, "original `{original}` contains variant `{variant}`")
            }
            LexiconWarning::NestedVariant { inner, outer } => write!(f, "variant `{inner}` is nested in `{outer}`"),
            LexiconWarning::MissingPhonetics { word, ch } => write!(f, "`{ch}` in `{word}` has no reading"),
        }
    }
}

pub fn validate_lexicon(lexicon: &MorphLexicon, table: &PhoneticsTable) -> Vec<LexiconWarning> {
    let mut warnings = Vec::new();
    let surfaces: Vec<&str> = lexicon.variants().map(|(_, v)| v.surface.as_str()).collect();
    let overlapping = AhoCorasick::new(&surfaces).expect("non-empty patterns");

    for e in lexicon.entries() {
        let mut seen = Vec::new();
        for m in overlapping.find_overlapping_iter(&e.original) {
            let v = surfaces[m.pattern().as_usize()];
            if !seen.contains(&v) {
                seen.push(v);
                warnings.push(LexiconWarning::OriginalContainsVariant { original: e.original.clone(), variant: v.to_string() });
            }
        }
    }
    for outer in &surfaces {
        let mut seen = Vec::new();
        for m in overlapping.find_overlapping_iter(outer) {
            let inner = surfaces[m.pattern().as_usize()];
            if inner != *outer && !seen.contains(&inner) {
                seen.push(inner);
                warnings.push(LexiconWarning::NestedVariant { inner: inner.to_string(), outer: outer.to_string() });
            }
        }
    }
    let words = lexicon.originals().chain(surfaces.iter().copied());
    for word in words {
        for ch in word.chars().filter(|c| is_han(*c) && !table.contains(*c)) {
            warnings.push(LexiconWarning::MissingPhonetics { word: word.to_string(), ch });
        }
    }
    warnings
}
