//! Character-level diff between a transcript and a rewritten version of it.

use super::{MorphSpan, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Keep,
    Sub,
    Del,
    Ins,
}

fn table(a: &[char], b: &[char]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let diag = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = diag.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

/// Unit-cost Levenshtein distance over code points.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    table(&a, &b)[a.len()][b.len()]
}

fn script(a: &[char], b: &[char]) -> Vec<Op> {
    let d = table(a, b);
    let (mut i, mut j) = (a.len(), b.len());
    let mut ops = Vec::with_capacity(i.max(j));
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]) {
            ops.push(if a[i - 1] == b[j - 1] { Op::Keep } else { Op::Sub });
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(Op::Del);
            i -= 1;
        } else {
            ops.push(Op::Ins);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Spans turning `input` into `output` along a minimal edit script.
///
/// Each run of edits is widened by one unchanged neighbour on either side so
/// that pure deletions and insertions still cover a non-empty surface, then
/// runs that touch are merged.
pub fn align_diff(input: &str, output: &str) -> Vec<MorphSpan> {
    let a: Vec<char> = input.chars().collect();
    let b: Vec<char> = output.chars().collect();
    if a == b {
        return Vec::new();
    }
    if a.is_empty() {
        return vec![span(&a, &b, (0, 0), (0, b.len()))];
    }

    // (input range, output range) of each maximal run of edits.
    let mut groups: Vec<((usize, usize), (usize, usize))> = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut open: Option<(usize, usize)> = None;
    for op in script(&a, &b) {
        if op == Op::Keep {
            if let Some((si, sj)) = open.take() {
                groups.push(((si, i), (sj, j)));
            }
        } else if open.is_none() {
            open = Some((i, j));
        }
        match op {
            Op::Keep | Op::Sub => {
                i += 1;
                j += 1;
            }
            Op::Del => i += 1,
            Op::Ins => j += 1,
        }
    }
    if let Some((si, sj)) = open {
        groups.push(((si, i), (sj, j)));
    }

    let mut merged: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for ((mut s, mut e), (mut os, mut oe)) in groups {
        if s > 0 {
            s -= 1;
            os -= 1;
        }
        if e < a.len() {
            e += 1;
            oe += 1;
        }
        match merged.last_mut() {
            Some(last) if last.0 .1 >= s => {
                last.0 .1 = e;
                last.1 .1 = oe;
            }
            _ => merged.push(((s, e), (os, oe))),
        }
    }
    merged.into_iter().map(|(ir, or)| span(&a, &b, ir, or)).collect()
}

fn span(a: &[char], b: &[char], (s, e): (usize, usize), (os, oe): (usize, usize)) -> MorphSpan {
    MorphSpan {
        start: s,
        end: e,
        surface: a[s..e].iter().collect(),
        resolved: b[os..oe].iter().collect(),
        rule: Rule::BackendDiff,
        confidence: 1.0,
    }
}
