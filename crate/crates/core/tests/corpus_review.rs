use std::sync::Arc;

use morph_core::corpus::review::{apply_decisions, collaborative_filter, replay, Action, AuditEntry, Decision, Reason, ReviewState, Status};
use morph_core::corpus::{split_check, Corpus, Label, LoadMode, Split};
use morph_core::evaluator::{evaluate, EvalSample, Prediction};
use morph_core::fixtures::{fixture_lexicon, shipped_corpus, shipped_noisy_corpus, OMITTED_MORPHS};
use morph_core::lexicon::MorphKind;
use morph_core::resolver::{Resolver, ResolverConfig};
use proptest::prelude::*;

fn resolver() -> Resolver {
    Resolver::new(Arc::new(fixture_lexicon()), ResolverConfig::default()).unwrap()
}

fn noisy_state() -> ReviewState {
    let corpus = shipped_noisy_corpus();
    let queue = collaborative_filter(&corpus, &resolver()).unwrap();
    ReviewState::new(corpus, fixture_lexicon(), queue)
}

#[test]
fn shipped_corpora_are_valid() {
    for c in [shipped_corpus(), shipped_noisy_corpus()] {
        let again = Corpus::parse(std::str::from_utf8(&c.to_jsonl()).unwrap(), "mem", LoadMode::Strict).unwrap();
        assert_eq!(again.corpus, c);
        assert!(split_check(&c).is_clean());
        for s in Split::ALL {
            assert!(c.split(s).count() > 0, "{}", s.name());
        }
    }
}

#[test]
fn gold_predictions_score_perfectly() {
    let c = shipped_corpus();
    let samples: Vec<EvalSample> = c.records.iter().map(|r| EvalSample::from_pair(r, Some(&fixture_lexicon()))).collect();
    let preds: Vec<Prediction> = c.records.iter().map(|r| Prediction::new(r.id.clone(), r.target.clone())).collect();
    let report = evaluate(&samples, &preds).unwrap();
    assert_eq!(report.metrics.f1, 1.0);
    assert_eq!(report.metrics.accuracy, 1.0);
    assert!(c.records.iter().all(|r| r.check().is_ok()));
}

#[test]
fn filter_finds_every_omitted_morph() {
    let clean = collaborative_filter(&shipped_corpus(), &resolver()).unwrap();
    assert!(clean.is_empty(), "{:?}", clean.iter().map(|i| &i.record_id).collect::<Vec<_>>());
    let noisy = collaborative_filter(&shipped_noisy_corpus(), &resolver()).unwrap();
    assert_eq!(noisy.len(), OMITTED_MORPHS);
    assert!(noisy.iter().all(|i| i.reason == Reason::UnannotatedDictionaryHit && i.status == Status::Pending));
}

#[test]
fn accepting_everything_restores_the_clean_corpus() {
    let mut state = noisy_state();
    let decisions: Vec<Decision> = state
        .queue
        .iter()
        .map(|i| Decision { item: i.id.clone(), action: Action::Accept, spans: None, reviewer: None, timestamp: None })
        .collect();
    apply_decisions(&mut state, &decisions).unwrap();
    let clean = shipped_corpus();
    for r in &state.corpus.records {
        let c = clean.get(&r.id).unwrap();
        assert_eq!((&r.target, r.label), (&c.target, c.label), "{}", r.id);
    }
    assert_eq!(state.lexicon, fixture_lexicon());
    assert!(state.corpus.records.iter().all(|r| r.label == Label::Negative || r.target != r.source));
}

#[derive(Debug, Clone)]
enum Step {
    Decide(usize, Action, bool),
    AddVariant(usize, char),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        4 => (0usize..64, prop_oneof![Just(Action::Accept), Just(Action::Reject), Just(Action::Edit)], any::<bool>())
            .prop_map(|(i, a, b)| Step::Decide(i, a, b)),
        1 => (0usize..64, prop::sample::select(vec!['甲', '乙', '丙', '丁'])).prop_map(|(i, c)| Step::AddVariant(i, c)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replay_reproduces_any_history(steps in prop::collection::vec(step(), 1..40)) {
        let initial = noisy_state();
        let mut state = initial.clone();
        let mut log: Vec<AuditEntry> = Vec::new();
        for s in steps {
            let entry = match s {
                Step::Decide(i, action, with_spans) => {
                    let item = &state.queue[i % state.queue.len()];
                    let spans = with_spans.then(|| item.suggested.clone());
                    let d = Decision { item: item.id.clone(), action, spans, reviewer: Some("p".into()), timestamp: None };
                    state.apply(&d)
                }
                Step::AddVariant(i, c) => {
                    let original = state.lexicon.entries()[i % state.lexicon.entries().len()].original.clone();
                    let surface = format!("{c}{original}");
                    state.add_variant(&original, &surface, MorphKind::Synonym, None, None)
                }
            };
            if let Ok(e) = entry {
                log.push(e);
            }
        }
        let lines: Vec<String> = log.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
        let parsed: Vec<AuditEntry> = lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
        prop_assert_eq!(&parsed, &log);
        prop_assert_eq!(replay(&initial, &parsed).unwrap(), state.clone());
        prop_assert!(state.corpus.records.iter().all(|r| r.check().is_ok()));
    }
}
