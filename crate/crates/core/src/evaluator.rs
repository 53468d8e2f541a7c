//! Strict sentence-level scoring.
//!
//! A positive sample counts only when every morph is restored and the rest of
//! the sentence is untouched; a negative sample counts only when nothing was
//! changed. Strings are compared after NFC normalization, without trimming.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Label, TranscriptPair};
use crate::lexicon::{MorphKind, MorphLexicon};
use crate::resolver::{MorphSpan, Resolution, Rule};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction for sample `{0}`")]
    MissingPrediction(String),
    #[error("more than one prediction for sample `{0}`")]
    DuplicatePrediction(String),
    #[error("sample `{id}`: unknown label {label} (expected 0, 1 or 2)")]
    UnknownLabel { id: String, label: i64 },
    #[error("invalid sample `{id}`: {reason}")]
    InvalidSample { id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub id: String,
    pub input: String,
    pub gold_target: String,
    pub label: Label,
    /// `(surface, original)` pairs.
    #[serde(default)]
    pub gold_morphs: Vec<(String, String)>,
    /// Kinds of the gold morphs, where known.
    #[serde(default)]
    pub kinds: Vec<MorphKind>,
}

impl EvalSample {
    /// Kinds are looked up in `lexicon` when one is given.
    pub fn from_pair(pair: &TranscriptPair, lexicon: Option<&MorphLexicon>) -> Self {
        let kinds = match lexicon {
            Some(lex) => {
                let mut k: Vec<MorphKind> =
                    pair.morphs.iter().filter_map(|m| lex.lookup_variant(&m.surface).map(|v| v.variant.kind)).collect();
                k.sort();
                k.dedup();
                k
            }
            None => Vec::new(),
        };
        EvalSample {
            id: pair.id.clone(),
            input: pair.source.clone(),
            gold_target: pair.target.clone(),
            label: pair.label,
            gold_morphs: pair.morphs.iter().map(|m| (m.surface.clone(), m.original.clone())).collect(),
            kinds,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |reason: &str| Err(EvalError::InvalidSample { id: self.id.clone(), reason: reason.into() });
        match self.label {
            Label::Negative if self.gold_target != self.input => bad("negative sample with target != input"),
            Label::Negative if !self.gold_morphs.is_empty() => bad("negative sample with morphs"),
            Label::Positive if self.gold_target == self.input => bad("positive sample with target == input"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spans: Vec<MorphSpan>,
}

impl Prediction {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Prediction { id: id.into(), text: text.into(), spans: Vec::new() }
    }

    pub fn from_resolution(id: impl Into<String>, r: Resolution) -> Self {
        Prediction { id: id.into(), text: r.output, spans: r.spans }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    TP,
    FP,
    FN,
    TN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Count a positive that was edited, but wrongly, as a false positive instead of a false negative.
    pub fp_on_bad_edit: bool,
}

pub fn normalize(s: &str) -> String {
    s.nfc().collect()
}

pub fn verdict(sample: &EvalSample, predicted: &str) -> Verdict {
    verdict_with(sample, predicted, EvalOptions::default())
}

pub fn verdict_with(sample: &EvalSample, predicted: &str, opts: EvalOptions) -> Verdict {
    let predicted = normalize(predicted);
    match sample.label {
        Label::Positive if predicted == normalize(&sample.gold_target) => Verdict::TP,
        Label::Positive if opts.fp_on_bad_edit && predicted != normalize(&sample.input) => Verdict::FP,
        Label::Positive => Verdict::FN,
        Label::Negative if predicted == normalize(&sample.input) => Verdict::TN,
        Label::Negative => Verdict::FP,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = div(tp, tp + fp);
        let recall = div(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Metrics { accuracy: div(tp + tn, tp + fp + fn_ + tn), precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::TP => self.tp += 1,
            Verdict::FP => self.fp += 1,
            Verdict::FN => self.fn_ += 1,
            Verdict::TN => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_counts(self.tp, self.fp, self.fn_, self.tn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub id: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub counts: Counts,
    pub total: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub convention: String,
    pub notes: Vec<String>,
    /// Verdict counts over samples whose gold morphs include each kind.
    pub per_kind: BTreeMap<String, Counts>,
    /// Verdict counts over samples whose prediction used each rule.
    pub per_rule: BTreeMap<String, Counts>,
    pub verdicts: Vec<SampleVerdict>,
}

pub fn evaluate(samples: &[EvalSample], predictions: &[Prediction]) -> Result<EvalReport, EvalError> {
    evaluate_with(samples, predictions, EvalOptions::default())
}

pub fn evaluate_with(samples: &[EvalSample], predictions: &[Prediction], opts: EvalOptions) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(&p.id, p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id.clone()));
        }
    }
    let mut counts = Counts::default();
    let mut per_kind: BTreeMap<String, Counts> = BTreeMap::new();
    let mut per_rule: BTreeMap<String, Counts> = BTreeMap::new();
    let mut verdicts = Vec::with_capacity(samples.len());
    for s in samples {
        let p = by_id.get(s.id.as_str()).ok_or_else(|| EvalError::MissingPrediction(s.id.clone()))?;
        let v = verdict_with(s, &p.text, opts);
        counts.add(v);
        for k in &s.kinds {
            per_kind.entry(k.name().to_string()).or_default().add(v);
        }
        let rules: HashSet<Rule> = p.spans.iter().map(|sp| sp.rule).collect();
        for r in rules {
            per_rule.entry(r.name().to_string()).or_default().add(v);
        }
        verdicts.push(SampleVerdict { id: s.id.clone(), verdict: v });
    }
    verdicts.sort_by(|a, b| a.id.cmp(&b.id));

    let convention = if opts.fp_on_bad_edit {
        "wrongly edited positives count as FP"
    } else {
        "wrongly edited positives count as FN"
    };
    let mut notes = vec![format!("strict sentence-level match on NFC text; {convention}")];
    if counts.tp + counts.fp == 0 {
        notes.push("precision denominator is zero; reported as 0".into());
    }
    if counts.tp + counts.fn_ == 0 {
        notes.push("recall denominator is zero; reported as 0".into());
    }
    Ok(EvalReport {
        total: counts.total(),
        metrics: counts.metrics(),
        counts,
        convention: convention.into(),
        notes,
        per_kind,
        per_rule,
        verdicts,
    })
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let c = &self.counts;
        let m = &self.metrics;
        let _ = writeln!(out, "{:>6} {:>6} {:>6} {:>6} {:>6}", "total", "TP", "FP", "FN", "TN");
        let _ = writeln!(out, "{:>6} {:>6} {:>6} {:>6} {:>6}", self.total, c.tp, c.fp, c.fn_, c.tn);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>8} {:>8} {:>8} {:>8}", "Acc", "Pre", "Recall", "F1");
        let _ = writeln!(out, "{:>8.4} {:>8.4} {:>8.4} {:>8.4}", m.accuracy, m.precision, m.recall, m.f1);
        if !self.per_kind.is_empty() {
            let _ = writeln!(out, "\nby kind (positives restored / positives):");
            for (k, c) in &self.per_kind {
                let _ = writeln!(out, "  {k:<16} {}/{}", c.tp, c.tp + c.fn_ + c.fp);
            }
        }
        if !self.per_rule.is_empty() {
            let _ = writeln!(out, "\nby rule (TP FP FN TN):");
            for (r, c) in &self.per_rule {
                let _ = writeln!(out, "  {r:<16} {} {} {} {}", c.tp, c.fp, c.fn_, c.tn);
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

/// A report for one system on one test set.
#[derive(Debug, Clone)]
pub struct NamedReport {
    pub system: String,
    pub test_set: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub value: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub test_sets: Vec<String>,
    pub systems: Vec<String>,
    /// `cells[system][test_set * 4 + metric]`, metrics in Acc/Pre/Recall/F1 order; `None` where missing.
    pub cells: Vec<Vec<Option<ComparisonCell>>>,
}

pub const METRIC_NAMES: [&str; 4] = ["Acc", "Pre", "Recall", "F1"];

fn metric_values(m: &Metrics) -> [f64; 4] {
    [m.accuracy, m.precision, m.recall, m.f1]
}

/// Lines up systems against test sets; the best value in every column is flagged (ties included).
pub fn compare(reports: &[NamedReport]) -> ComparisonTable {
    let mut test_sets: Vec<String> = Vec::new();
    let mut systems: Vec<String> = Vec::new();
    for r in reports {
        if !test_sets.contains(&r.test_set) {
            test_sets.push(r.test_set.clone());
        }
        if !systems.contains(&r.system) {
            systems.push(r.system.clone());
        }
    }
    let width = test_sets.len() * 4;
    let mut cells: Vec<Vec<Option<ComparisonCell>>> = vec![vec![None; width]; systems.len()];
    for r in reports {
        let s = systems.iter().position(|x| *x == r.system).unwrap_or_default();
        let t = test_sets.iter().position(|x| *x == r.test_set).unwrap_or_default();
        for (i, v) in metric_values(&r.report.metrics).into_iter().enumerate() {
            cells[s][t * 4 + i] = Some(ComparisonCell { value: v, best: false });
        }
    }
    for col in 0..width {
        let best = cells.iter().filter_map(|row| row[col].as_ref().map(|c| c.value)).fold(f64::NEG_INFINITY, f64::max);
        for row in cells.iter_mut() {
            if let Some(c) = row[col].as_mut() {
                c.best = c.value == best;
            }
        }
    }
    ComparisonTable { test_sets, systems, cells }
}

impl ComparisonTable {
    /// Plain-text table; best values carry a trailing `*`.
    pub fn render(&self) -> String {
        let name_w = self.systems.iter().map(|s| s.chars().count()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = write!(out, "{:name_w$}", "");
        for t in &self.test_sets {
            let _ = write!(out, " | {t:<35}");
        }
        let _ = writeln!(out);
        let _ = write!(out, "{:name_w$}", "system");
        for _ in &self.test_sets {
            let _ = write!(out, " |");
            for m in METRIC_NAMES {
                let _ = write!(out, " {m:>8}");
            }
        }
        let _ = writeln!(out);
        for (s, row) in self.systems.iter().zip(&self.cells) {
            let pad = name_w - s.chars().count();
            let _ = write!(out, "{s}{:pad$}", "");
            for (i, cell) in row.iter().enumerate() {
                if i % 4 == 0 {
                    let _ = write!(out, " |");
                }
                match cell {
                    Some(c) => {
                        let v = format!("{:.4}{}", c.value, if c.best { "*" } else { " " });
                        let _ = write!(out, " {v:>8}");
                    }
                    None => {
                        let _ = write!(out, " {:>8}", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
        out
    }
}

pub const CLASS_NAMES: [&str; 3] = ["compliance", "suspected violation", "serious violation"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: u8,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: usize,
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; 3]; 3],
}

fn class_of(id: &str, label: i64) -> Result<usize, EvalError> {
    match label {
        0..=2 => Ok(label as usize),
        _ => Err(EvalError::UnknownLabel { id: id.to_string(), label }),
    }
}

/// Per-class precision, recall and F1 over the three violation classes.
/// Predictions are matched to gold labels by id.
pub fn class_report(gold: &[(String, i64)], predicted: &[(String, i64)]) -> Result<ClassReport, EvalError> {
    let mut by_id: HashMap<&str, i64> = HashMap::with_capacity(predicted.len());
    for (id, l) in predicted {
        if by_id.insert(id, *l).is_some() {
            return Err(EvalError::DuplicatePrediction(id.clone()));
        }
    }
    let mut confusion = [[0usize; 3]; 3];
    for (id, g) in gold {
        let g = class_of(id, *g)?;
        let p = class_of(id, *by_id.get(id.as_str()).ok_or_else(|| EvalError::MissingPrediction(id.clone()))?)?;
        confusion[g][p] += 1;
    }
    let classes = (0..3)
        .map(|c| {
            let tp = confusion[c][c];
            let predicted: usize = (0..3).map(|g| confusion[g][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let precision = div(tp, predicted);
            let recall = div(tp, support);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassMetrics { label: c as u8, name: CLASS_NAMES[c].into(), precision, recall, f1, support }
        })
        .collect();
    let correct: usize = (0..3).map(|c| confusion[c][c]).sum();
    Ok(ClassReport { classes, accuracy: div(correct, gold.len()), total: gold.len(), confusion })
}

impl ClassReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<22} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
        for c in &self.classes {
            let name = format!("{} {}", c.label, c.name);
            let _ = writeln!(out, "{name:<22} {:>9.4} {:>9.4} {:>9.4} {:>8}", c.precision, c.recall, c.f1, c.support);
        }
        let _ = writeln!(out, "accuracy {:.4} over {}", self.accuracy, self.total);
        out
    }
}
