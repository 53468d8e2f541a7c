use morph_core::corpus::Label;
use morph_core::evaluator::{evaluate, evaluate_with, EvalOptions, EvalSample, Prediction, Verdict};
use proptest::prelude::*;

/// A sample plus a choice of what the system predicts for it.
#[derive(Debug, Clone, Copy)]
enum Outcome {
    Unchanged,
    Gold,
    Wrong,
}

fn case() -> impl Strategy<Value = (bool, Outcome)> {
    (any::<bool>(), prop_oneof![Just(Outcome::Unchanged), Just(Outcome::Gold), Just(Outcome::Wrong)])
}

fn build(cases: &[(bool, Outcome)]) -> (Vec<EvalSample>, Vec<Prediction>) {
    let mut samples = Vec::new();
    let mut preds = Vec::new();
    for (i, &(positive, outcome)) in cases.iter().enumerate() {
        let id = format!("s{i:04}");
        let input = format!("去找白大褂{i}");
        let gold = if positive { format!("去找医生{i}") } else { input.clone() };
        let text = match outcome {
            Outcome::Unchanged => input.clone(),
            Outcome::Gold => gold.clone(),
            Outcome::Wrong => format!("去找护士{i}"),
        };
        samples.push(EvalSample {
            id: id.clone(),
            input,
            gold_target: gold,
            label: if positive { Label::Positive } else { Label::Negative },
            gold_morphs: if positive { vec![("白大褂".into(), "医生".into())] } else { Vec::new() },
            kinds: Vec::new(),
        });
        preds.push(Prediction::new(id, text));
    }
    (samples, preds)
}

/// Counts straight from the case table.
fn oracle(cases: &[(bool, Outcome)], fp_on_bad_edit: bool) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for &(positive, outcome) in cases {
        match (positive, outcome) {
            (true, Outcome::Gold) => tp += 1,
            (true, Outcome::Wrong) if fp_on_bad_edit => fp += 1,
            (true, _) => fn_ += 1,
            (false, Outcome::Unchanged) | (false, Outcome::Gold) => tn += 1,
            (false, Outcome::Wrong) => fp += 1,
        }
    }
    (tp, fp, fn_, tn)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn recount_matches_oracle(cases in prop::collection::vec(case(), 0..40), flag in any::<bool>()) {
        let (samples, preds) = build(&cases);
        let report = evaluate_with(&samples, &preds, EvalOptions { fp_on_bad_edit: flag }).unwrap();
        let (tp, fp, fn_, tn) = oracle(&cases, flag);
        prop_assert_eq!((report.counts.tp, report.counts.fp, report.counts.fn_, report.counts.tn), (tp, fp, fn_, tn));
        prop_assert_eq!(report.total, cases.len());
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
        prop_assert!((report.metrics.precision - p).abs() < 1e-12);
        prop_assert!((report.metrics.recall - r).abs() < 1e-12);
        prop_assert!((report.metrics.f1 - f1).abs() < 1e-12);
        prop_assert!((report.metrics.accuracy - ratio(tp + tn, cases.len())).abs() < 1e-12);
    }

    #[test]
    fn verdicts_are_exclusive(cases in prop::collection::vec(case(), 1..40)) {
        let (samples, preds) = build(&cases);
        let report = evaluate(&samples, &preds).unwrap();
        prop_assert_eq!(report.verdicts.len(), samples.len());
        for (s, v) in samples.iter().zip(&report.verdicts) {
            prop_assert_eq!(&s.id, &v.id);
            let allowed: &[Verdict] = match s.label {
                Label::Positive => &[Verdict::TP, Verdict::FN],
                Label::Negative => &[Verdict::TN, Verdict::FP],
            };
            prop_assert!(allowed.contains(&v.verdict));
        }
    }

    #[test]
    fn permutation_invariant(cases in prop::collection::vec(case(), 1..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (mut samples, mut preds) = build(&cases);
        let before = evaluate(&samples, &preds).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        samples.shuffle(&mut rng);
        preds.shuffle(&mut rng);
        prop_assert_eq!(evaluate(&samples, &preds).unwrap(), before);
    }

    #[test]
    fn fixing_a_sample_never_hurts(cases in prop::collection::vec(case(), 1..30), pick in any::<prop::sample::Index>()) {
        let (samples, mut preds) = build(&cases);
        let before = evaluate(&samples, &preds).unwrap().metrics;
        let i = pick.index(samples.len());
        preds[i].text = samples[i].gold_target.clone();
        let after = evaluate(&samples, &preds).unwrap().metrics;
        prop_assert!(after.accuracy >= before.accuracy - 1e-12);
        match samples[i].label {
            Label::Positive => prop_assert!(after.recall >= before.recall - 1e-12),
            Label::Negative => prop_assert!(after.precision >= before.precision - 1e-12),
        }
    }
}

#[test]
fn nfc_equivalent_text_matches() {
    let s = EvalSample {
        id: "a".into(),
        input: "cafe\u{301}x".into(),
        gold_target: "caf\u{e9}".into(),
        label: Label::Positive,
        gold_morphs: vec![],
        kinds: vec![],
    };
    let report = evaluate(&[s], &[Prediction::new("a", "cafe\u{301}")]).unwrap();
    assert_eq!(report.counts.tp, 1);
}
