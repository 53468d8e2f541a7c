//! Phonetic rules that recover originals not listed as variants.
//!
//! Windows of the transcript are compared against every original word:
//!
//! * filler insertion: meaningless fillers (`某`, `什么`) inserted between the
//!   characters of a word, or the reduplication frame `小X小Y`;
//! * filler placeholder: a single-character filler standing in for an
//!   interior character of the word (`白某障` for `白内障`);
//! * symbol onset: a Latin letter standing for the first syllable (`k糖`).

use super::{Candidate, MorphSpan, ResolverConfig, Rule};
use crate::lexicon::MorphLexicon;
use crate::phonetics::{is_han, onset_letter_matches, phonetic_distance_with, DistanceWeights, PhoneticsTable, ReadingEntry, UNIT};

/// Cost, in tenths, of a filler occupying one character position of an original.
const PLACEHOLDER_UNITS: u32 = 1;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct OriginalForm {
    pub entry: usize,
    pub text: String,
    pub chars: Vec<char>,
    pub reading: Vec<ReadingEntry>,
}

impl OriginalForm {
    pub fn collect(lexicon: &MorphLexicon, table: &PhoneticsTable) -> Vec<OriginalForm> {
        lexicon
            .entries()
            .iter()
            .enumerate()
            .map(|(entry, e)| OriginalForm {
                entry,
                text: e.original.clone(),
                chars: e.original.chars().collect(),
                reading: table.reading(&e.original).entries,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Stripped {
    pub candidate: Vec<char>,
    /// A removed filler had kept characters on both sides.
    pub interior_filler: bool,
    /// The window ended with a filler.
    pub trailing_filler: bool,
    pub reduplicated: bool,
}

fn filler_at<'a>(chars: &[char], i: usize, fillers: &'a [Vec<char>]) -> Option<&'a [char]> {
    fillers
        .iter()
        .filter(|f| chars[i..].starts_with(f))
        .max_by_key(|f| f.len())
        .map(Vec::as_slice)
}

pub(crate) fn strip_window(window: &[char], config: &ResolverConfig) -> Option<Stripped> {
    let fillers: Vec<Vec<char>> = config.fillers.iter().map(|f| f.chars().collect()).collect();
    let mut kept = Vec::with_capacity(window.len());
    let mut removed_at = Vec::new();
    let mut i = 0;
    while i < window.len() {
        if let Some(f) = filler_at(window, i, &fillers) {
            removed_at.push(kept.len());
            i += f.len();
        } else {
            kept.push(window[i]);
            i += 1;
        }
    }
    let interior_filler = removed_at.iter().any(|&at| at > 0 && at < kept.len());
    let trailing_filler = removed_at.last().is_some_and(|&at| at == kept.len());
    let stripped = !removed_at.is_empty();

    let (candidate, reduplicated) = match reduplication(&kept, &config.reduplication_prefixes) {
        Some(c) => (c, true),
        None => (kept, false),
    };
    if !stripped && !reduplicated {
        return None;
    }
    Some(Stripped { candidate, interior_filler, trailing_filler, reduplicated })
}

/// `p·X·p·Y` → `X·Y` for a prefix character `p`, with X and Y non-empty.
fn reduplication(chars: &[char], prefixes: &[char]) -> Option<Vec<char>> {
    let p = *chars.first()?;
    if chars.len() < 4 || !prefixes.contains(&p) {
        return None;
    }
    let second = chars[2..].iter().position(|&c| c == p)? + 2;
    if second + 1 >= chars.len() {
        return None;
    }
    let mut out = chars[1..second].to_vec();
    out.extend_from_slice(&chars[second + 1..]);
    Some(out)
}

/// Removes every filler occurrence and undoes the reduplication frame.
/// Returns `None` when the window is left unchanged.
pub fn strip_fillers(window: &str, config: &ResolverConfig) -> Option<String> {
    let chars: Vec<char> = window.chars().collect();
    if chars.len() < 2 {
        return None;
    }
    strip_window(&chars, config).map(|s| s.candidate.into_iter().collect())
}

/// Generative spans for `text` against every original of `lexicon`, sorted by position.
pub fn detect_generative(text: &str, lexicon: &MorphLexicon, table: &PhoneticsTable, config: &ResolverConfig) -> Vec<MorphSpan> {
    let originals = OriginalForm::collect(lexicon, table);
    let mut c = detect(text, &originals, table, config);
    c.sort_by_key(|c| (c.span.start, c.span.end, c.entry));
    c.into_iter().map(|c| c.span).collect()
}

pub(crate) fn detect(text: &str, originals: &[OriginalForm], table: &PhoneticsTable, config: &ResolverConfig) -> Vec<Candidate> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let reading = table.reading(text).entries;
    let weights = DistanceWeights::for_options(config.tone_neutral);
    let single_fillers: Vec<char> = config
        .fillers
        .iter()
        .filter(|f| f.chars().count() == 1)
        .filter_map(|f| f.chars().next())
        .collect();
    let filler_starts: Vec<char> = config.fillers.iter().filter_map(|f| f.chars().next()).collect();

    // Windows without a trigger character cannot match any rule.
    let mut triggers = vec![0usize; n + 1];
    for (i, c) in chars.iter().enumerate() {
        let hit = filler_starts.contains(c) || config.reduplication_prefixes.contains(c) || c.is_ascii_alphabetic();
        triggers[i + 1] = triggers[i] + usize::from(hit);
    }

    let mut out = Vec::new();
    for o in originals {
        let m = o.chars.len();
        if m == 0 {
            continue;
        }
        for s in 0..n {
            for w in m..=m + config.max_fillers {
                if s + w > n {
                    break;
                }
                if triggers[s + w] == triggers[s] {
                    continue;
                }
                let window = &chars[s..s + w];
                if window == o.chars.as_slice() {
                    continue;
                }
                let mut emit = |rule: Rule, distance: f64| {
                    out.push(Candidate {
                        span: MorphSpan {
                            start: s,
                            end: s + w,
                            surface: window.iter().collect(),
                            resolved: o.text.clone(),
                            rule,
                            confidence: (1.0 - distance).clamp(0.0, 1.0),
                        },
                        entry: o.entry,
                    });
                };

                if w > m {
                    if let Some(st) = strip_window(window, config) {
                        let shaped = st.reduplicated || (st.interior_filler && !st.trailing_filler);
                        if shaped && st.candidate.len() == m {
                            let cand: Vec<ReadingEntry> = st.candidate.iter().map(|c| table.entry(*c)).collect();
                            let d = phonetic_distance_with(&cand, &o.reading, weights).normalized;
                            if d <= config.threshold + EPS {
                                emit(Rule::FillerInsertion, d);
                            }
                        }
                    }
                    continue;
                }

                if let Some(d) = placeholder_distance(&reading[s..s + w], o, &single_fillers, config.max_fillers, weights) {
                    if d <= config.threshold + EPS {
                        emit(Rule::FillerInsertion, d);
                    }
                }

                if m >= 2 && window[0].is_ascii_alphabetic() && (s == 0 || !chars[s - 1].is_ascii_alphanumeric()) {
                    if let Some(d) = symbol_onset_distance(&reading[s..s + w], o, weights) {
                        if d <= config.threshold + EPS {
                            emit(Rule::SymbolOnset, d);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Same-length window whose interior positions may hold single-character fillers.
fn placeholder_distance(
    window: &[ReadingEntry],
    o: &OriginalForm,
    fillers: &[char],
    max_fillers: usize,
    weights: DistanceWeights,
) -> Option<f64> {
    let m = o.chars.len();
    if m < 3 || fillers.is_empty() {
        return None;
    }
    let is_filler = |e: &ReadingEntry| fillers.contains(&e.ch());
    if is_filler(&window[0]) || is_filler(&window[m - 1]) {
        return None;
    }
    let mut units = 0;
    let mut placed = 0;
    for (i, e) in window.iter().enumerate() {
        if is_filler(e) && o.chars[i] != e.ch() {
            placed += 1;
            units += PLACEHOLDER_UNITS;
        } else {
            units += weights.substitution_units(e, &o.reading[i]);
        }
    }
    if placed == 0 || placed > max_fillers {
        return None;
    }
    Some(units as f64 / UNIT / m as f64)
}

/// Latin letter followed by Han characters; returns the tail distance.
fn symbol_onset_distance(window: &[ReadingEntry], o: &OriginalForm, weights: DistanceWeights) -> Option<f64> {
    let letter = window[0].ch();
    let tail = &window[1..];
    if !tail.iter().all(|e| matches!(e, ReadingEntry::Han { .. }) && is_han(e.ch())) {
        return None;
    }
    let first = o.reading.first()?;
    if !first.candidates().iter().any(|s| onset_letter_matches(letter, s)) {
        return None;
    }
    Some(phonetic_distance_with(tail, &o.reading[1..], weights).normalized)
}
