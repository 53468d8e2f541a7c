//! Pinyin decomposition and phonetic distances.
//!
//! Every Han character is mapped to one or more [`Syllable`]s (initial, rime,
//! tone). Distances are computed in integer tenths so that the edit distance
//! over syllable sequences is exact and stays a metric.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhoneticsError {
    #[error("text is empty")]
    EmptyText,
    #[error("invalid syllable `{0}`")]
    InvalidSyllable(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Onset consonant of a pinyin syllable. `None` is the zero initial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Initial {
    None,
    B,
    P,
    M,
    F,
    D,
    T,
    N,
    L,
    G,
    K,
    H,
    J,
    Q,
    X,
    Zh,
    Ch,
    Sh,
    R,
    Z,
    C,
    S,
    Y,
    W,
}

impl Initial {
    pub const ALL: [Initial; 24] = [
        Initial::None,
        Initial::B,
        Initial::P,
        Initial::M,
        Initial::F,
        Initial::D,
        Initial::T,
        Initial::N,
        Initial::L,
        Initial::G,
        Initial::K,
        Initial::H,
        Initial::J,
        Initial::Q,
        Initial::X,
        Initial::Zh,
        Initial::Ch,
        Initial::Sh,
        Initial::R,
        Initial::Z,
        Initial::C,
        Initial::S,
        Initial::Y,
        Initial::W,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Initial::None => "",
            Initial::B => "b",
            Initial::P => "p",
            Initial::M => "m",
            Initial::F => "f",
            Initial::D => "d",
            Initial::T => "t",
            Initial::N => "n",
            Initial::L => "l",
            Initial::G => "g",
            Initial::K => "k",
            Initial::H => "h",
            Initial::J => "j",
            Initial::Q => "q",
            Initial::X => "x",
            Initial::Zh => "zh",
            Initial::Ch => "ch",
            Initial::Sh => "sh",
            Initial::R => "r",
            Initial::Z => "z",
            Initial::C => "c",
            Initial::S => "s",
            Initial::Y => "y",
            Initial::W => "w",
        }
    }

    pub fn parse(s: &str) -> Option<Initial> {
        Initial::ALL.iter().copied().find(|i| i.as_str() == s)
    }

    /// Splits a toneless pinyin string into its initial and rime.
    ///
    /// Syllabic nasals (`m`, `n`, `ng`) keep the whole string as rime.
    pub fn split(plain: &str) -> (Initial, &str) {
        if matches!(plain, "m" | "n" | "ng") {
            return (Initial::None, plain);
        }
        for two in [Initial::Zh, Initial::Ch, Initial::Sh] {
            if let Some(rest) = plain.strip_prefix(two.as_str()) {
                if !rest.is_empty() {
                    return (two, rest);
                }
            }
        }
        let mut chars = plain.chars();
        if let Some(first) = chars.next() {
            let rest = chars.as_str();
            if !rest.is_empty() {
                if let Some(init) = Initial::parse(&plain[..first.len_utf8()]) {
                    return (init, rest);
                }
            }
        }
        (Initial::None, plain)
    }
}

impl fmt::Display for Initial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One pinyin syllable. Tone 0 is the neutral tone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syllable {
    pub initial: Initial,
    pub rime: String,
    pub tone: u8,
}

impl Syllable {
    pub fn new(initial: Initial, rime: impl Into<String>, tone: u8) -> Result<Self, PhoneticsError> {
        let rime = rime.into();
        if rime.is_empty() || tone > 4 {
            return Err(PhoneticsError::InvalidSyllable(format!("{initial}{rime}{tone}")));
        }
        Ok(Syllable { initial, rime, tone })
    }

    /// Parses numbered pinyin such as `zhang4`, `me` or `lv3`.
    pub fn parse(numbered: &str) -> Result<Self, PhoneticsError> {
        let s = numbered.trim().to_lowercase();
        let (body, tone) = match s.chars().last() {
            Some(c @ '0'..='5') => (&s[..s.len() - 1], (c as u8 - b'0') % 5),
            _ => (s.as_str(), 0),
        };
        let body = body.replace('v', "ü");
        if body.is_empty() || !body.chars().all(|c| c.is_ascii_lowercase() || matches!(c, 'ü' | 'ê')) {
            return Err(PhoneticsError::InvalidSyllable(numbered.to_string()));
        }
        let (initial, rime) = Initial::split(&body);
        Syllable::new(initial, rime, tone)
    }

    /// First Latin letter of the syllable as written.
    pub fn onset_letter(&self) -> Option<char> {
        self.initial.as_str().chars().next().or_else(|| self.rime.chars().next())
    }
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.initial, self.rime, self.tone)
    }
}

/// Per-character reading entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReadingEntry {
    /// A Han character with its candidate syllables, default reading first.
    Han { ch: char, candidates: Vec<Syllable> },
    /// A non-Han code point, or a Han character missing from the table (`unknown`).
    Literal { ch: char, unknown: bool },
}

impl ReadingEntry {
    pub fn ch(&self) -> char {
        match self {
            ReadingEntry::Han { ch, .. } | ReadingEntry::Literal { ch, .. } => *ch,
        }
    }

    pub fn candidates(&self) -> &[Syllable] {
        match self {
            ReadingEntry::Han { candidates, .. } => candidates,
            ReadingEntry::Literal { .. } => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Reading {
    pub entries: Vec<ReadingEntry>,
}

impl Reading {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unknown_chars(&self) -> impl Iterator<Item = char> + '_ {
        self.entries.iter().filter_map(|e| match e {
            ReadingEntry::Literal { ch, unknown: true } => Some(*ch),
            _ => None,
        })
    }
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match e {
                ReadingEntry::Han { candidates, .. } => write!(f, "{}", candidates[0])?,
                ReadingEntry::Literal { ch, .. } => write!(f, "{ch}")?,
            }
        }
        Ok(())
    }
}

pub fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F | 0x3007)
}

/// Immutable character → syllables table.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneticsTable {
    version: String,
    readings: HashMap<char, Vec<Syllable>>,
}

impl PhoneticsTable {
    pub fn new(version: impl Into<String>) -> Self {
        PhoneticsTable { version: version.into(), readings: HashMap::new() }
    }

    /// The table shipped with the crate, built once from the `pinyin` crate's data.
    pub fn builtin() -> &'static PhoneticsTable {
        Self::shared_ref()
    }

    /// Shared handle to [`PhoneticsTable::builtin`].
    pub fn shared() -> Arc<PhoneticsTable> {
        Arc::clone(Self::shared_ref())
    }

    fn shared_ref() -> &'static Arc<PhoneticsTable> {
        static TABLE: OnceLock<Arc<PhoneticsTable>> = OnceLock::new();
        TABLE.get_or_init(|| Arc::new(build_builtin()))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn get(&self, c: char) -> Option<&[Syllable]> {
        self.readings.get(&c).map(Vec::as_slice)
    }

    pub fn contains(&self, c: char) -> bool {
        self.readings.contains_key(&c)
    }

    pub fn insert(&mut self, c: char, syllables: Vec<Syllable>) {
        if !syllables.is_empty() {
            self.readings.insert(c, syllables);
        }
    }

    pub fn chars(&self) -> impl Iterator<Item = (char, &[Syllable])> + '_ {
        self.readings.iter().map(|(c, s)| (*c, s.as_slice()))
    }

    /// Reading of `text`, one entry per code point. Total: empty text gives an empty reading.
    pub fn reading(&self, text: &str) -> Reading {
        Reading { entries: text.chars().map(|c| self.entry(c)).collect() }
    }

    pub fn entry(&self, c: char) -> ReadingEntry {
        match self.readings.get(&c) {
            Some(cands) => ReadingEntry::Han { ch: c, candidates: cands.clone() },
            None => ReadingEntry::Literal { ch: c, unknown: is_han(c) },
        }
    }

    /// Reads the `CHAR<TAB>i|f|t,i|f|t` format. The first line may be a
    /// `#version <tag>` comment; other `#` lines are skipped.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, PhoneticsError> {
        let mut table = PhoneticsTable::new("custom");
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            if let Some(rest) = line.strip_prefix("#version ") {
                table.version = rest.trim().to_string();
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| PhoneticsError::MalformedLine { line: lineno, reason: reason.to_string() };
            let (ch, rest) = line.split_once('\t').ok_or_else(|| malformed("missing tab"))?;
            let mut chars = ch.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => return Err(malformed("first field must be one character")),
            };
            let mut syllables = Vec::new();
            for rec in rest.split(',') {
                let parts: Vec<&str> = rec.split('|').collect();
                if parts.len() != 3 {
                    return Err(malformed("reading must be initial|final|tone"));
                }
                let initial = if parts[0] == "-" {
                    Initial::None
                } else {
                    Initial::parse(parts[0]).filter(|i| *i != Initial::None).ok_or_else(|| malformed("unknown initial"))?
                };
                let tone: u8 = parts[2].parse().map_err(|_| malformed("bad tone"))?;
                syllables.push(Syllable::new(initial, parts[1], tone).map_err(|e| malformed(&e.to_string()))?);
            }
            table.insert(c, syllables);
        }
        Ok(table)
    }

    /// Writes the table sorted by code point.
    pub fn to_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "#version {}", self.version)?;
        let mut keys: Vec<char> = self.readings.keys().copied().collect();
        keys.sort_unstable();
        for c in keys {
            let recs: Vec<String> = self.readings[&c]
                .iter()
                .map(|s| {
                    let init = if s.initial == Initial::None { "-" } else { s.initial.as_str() };
                    format!("{init}|{}|{}", s.rime, s.tone)
                })
                .collect();
            writeln!(out, "{c}\t{}", recs.join(","))?;
        }
        Ok(())
    }
}

fn build_builtin() -> PhoneticsTable {
    use pinyin::ToPinyinMulti;
    let mut table = PhoneticsTable::new("pinyin-0.10");
    let ranges = [0x3007..=0x3007u32, 0x3400..=0x4DBF, 0x4E00..=0x9FFF, 0xF900..=0xFAFF];
    for c in ranges.into_iter().flatten().filter_map(char::from_u32) {
        let Some(multi) = c.to_pinyin_multi() else { continue };
        let mut syllables: Vec<Syllable> = Vec::new();
        for p in multi {
            if let Ok(s) = Syllable::parse(p.with_tone_num_end()) {
                if !syllables.contains(&s) {
                    syllables.push(s);
                }
            }
        }
        table.insert(c, syllables);
    }
    table
}

/// `text` must be non-empty; unknown Han characters come back as flagged literals.
pub fn to_pinyin(text: &str) -> Result<Reading, PhoneticsError> {
    if text.is_empty() {
        return Err(PhoneticsError::EmptyText);
    }
    Ok(PhoneticsTable::builtin().reading(text))
}

/// Weights in tenths: initial 5, rime 4, tone 1, insertion/deletion 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub initial: u32,
    pub rime: u32,
    pub tone: u32,
    pub indel: u32,
}

/// Distances are counted in units of 0.1.
pub const UNIT: f64 = 10.0;

impl DistanceWeights {
    pub const DEFAULT: DistanceWeights = DistanceWeights { initial: 5, rime: 4, tone: 1, indel: 8 };
    /// Substitution cost between two literals that differ, or a literal and a syllable.
    pub const LITERAL_MISMATCH: u32 = 10;

    pub fn tone_neutral(self) -> Self {
        DistanceWeights { tone: 0, ..self }
    }

    pub fn for_options(tone_neutral: bool) -> Self {
        if tone_neutral {
            Self::DEFAULT.tone_neutral()
        } else {
            Self::DEFAULT
        }
    }

    pub fn syllable_units(&self, a: &Syllable, b: &Syllable) -> u32 {
        let mut d = 0;
        if a.initial != b.initial {
            d += self.initial;
        }
        if a.rime != b.rime {
            d += self.rime;
        }
        if a.tone != b.tone {
            d += self.tone;
        }
        d
    }

    /// Substitution cost between two reading entries: the cheapest pair of
    /// candidate readings for Han characters, exact match for literals.
    pub fn substitution_units(&self, a: &ReadingEntry, b: &ReadingEntry) -> u32 {
        match (a, b) {
            (ReadingEntry::Han { candidates: ca, .. }, ReadingEntry::Han { candidates: cb, .. }) => ca
                .iter()
                .flat_map(|x| cb.iter().map(move |y| self.syllable_units(x, y)))
                .min()
                .unwrap_or(Self::LITERAL_MISMATCH),
            (ReadingEntry::Literal { ch: x, .. }, ReadingEntry::Literal { ch: y, .. }) if x == y => 0,
            _ => Self::LITERAL_MISMATCH,
        }
    }

    /// Weighted edit distance over two entry sequences, in tenths.
    pub fn sequence_units(&self, a: &[ReadingEntry], b: &[ReadingEntry]) -> u32 {
        let mut prev: Vec<u32> = (0..=b.len() as u32).map(|j| j * self.indel).collect();
        let mut cur = vec![0u32; b.len() + 1];
        for (i, ea) in a.iter().enumerate() {
            cur[0] = (i as u32 + 1) * self.indel;
            for (j, eb) in b.iter().enumerate() {
                let sub = prev[j] + self.substitution_units(ea, eb);
                let del = prev[j + 1] + self.indel;
                let ins = cur[j] + self.indel;
                cur[j + 1] = sub.min(del).min(ins);
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        prev[b.len()]
    }
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// 0.5·[initial differs] + 0.4·[final differs] + 0.1·[tone differs].
pub fn syllable_distance(a: &Syllable, b: &Syllable) -> f64 {
    DistanceWeights::DEFAULT.syllable_units(a, b) as f64 / UNIT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhoneticDistance {
    pub raw: f64,
    pub normalized: f64,
}

pub fn phonetic_distance(a: &Reading, b: &Reading) -> PhoneticDistance {
    phonetic_distance_with(&a.entries, &b.entries, DistanceWeights::DEFAULT)
}

pub fn phonetic_distance_with(a: &[ReadingEntry], b: &[ReadingEntry], weights: DistanceWeights) -> PhoneticDistance {
    let raw = weights.sequence_units(a, b) as f64 / UNIT;
    let longest = a.len().max(b.len());
    let normalized = if longest == 0 { 0.0 } else { raw / longest as f64 };
    PhoneticDistance { raw, normalized }
}

/// Whether a Latin letter stands for the syllable's onset (`k` for `kang4`).
pub fn onset_letter_matches(letter: char, s: &Syllable) -> bool {
    s.onset_letter() == Some(letter.to_ascii_lowercase())
}
