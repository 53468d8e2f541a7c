use std::sync::Arc;

use morph_core::augmenter::{build_prompt, parse_reply, run_augmentation, AugmentConfig, OfflineGenerator};
use morph_core::corpus::Label;
use morph_core::evaluator::{evaluate, EvalSample, Prediction};
use morph_core::fixtures::{fixture_corpus, fixture_lexicon, synthetic_lexicon};
use morph_core::resolver::{Resolver, ResolverConfig};
use proptest::prelude::*;

fn config(k: usize, seed: u64) -> AugmentConfig {
    AugmentConfig { k, seed, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn count_law(k in 1usize..=6, originals in 1usize..30, extra in 0usize..40, seed in any::<u64>()) {
        let lex = synthetic_lexicon(originals, originals + extra, seed);
        let out = run_augmentation(&[], &lex, &config(k, seed), &OfflineGenerator { seed }).unwrap();
        let m = &out.manifest;
        prop_assert_eq!(m.positives, k * lex.variant_count());
        prop_assert_eq!(m.expected_positives, m.positives);
        prop_assert_eq!(m.negatives, k * originals);
        prop_assert_eq!(m.skipped_sentences, 0);
        let positives = out.corpus.records.iter().filter(|r| r.label == Label::Positive).count();
        prop_assert_eq!(positives, m.positives);
        for r in &out.corpus.records {
            prop_assert!(r.check().is_ok(), "{}", r.id);
        }
    }
}

#[test]
fn generated_positives_resolve_back() {
    let lex = synthetic_lexicon(40, 120, 3);
    let out = run_augmentation(&[], &lex, &config(3, 9), &OfflineGenerator { seed: 9 }).unwrap();
    let resolver = Resolver::new(Arc::new(lex), ResolverConfig::default()).unwrap();
    let samples: Vec<EvalSample> = out.corpus.records.iter().map(|r| EvalSample::from_pair(r, None)).collect();
    let preds: Vec<Prediction> =
        out.corpus.records.iter().map(|r| Prediction::from_resolution(r.id.clone(), resolver.resolve(&r.source))).collect();
    let report = evaluate(&samples, &preds).unwrap();
    assert_eq!(report.counts.fn_ + report.counts.fp, 0, "{:?}", report.counts);
    assert_eq!(report.counts.tp, 360);
}

#[test]
fn runs_are_byte_identical() {
    let lex = fixture_lexicon();
    let train: Vec<_> = fixture_corpus().records;
    let run = |seed| {
        let cfg = AugmentConfig { targets: morph_core::augmenter::Targets::Sampled { draws: 20 }, ..config(4, seed) };
        let out = run_augmentation(&train, &lex, &cfg, &OfflineGenerator { seed }).unwrap();
        (out.corpus.to_jsonl(), serde_json::to_vec(&out.manifest).unwrap())
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).0, run(6).0);
}

#[test]
fn prompt_and_reply_handling() {
    let prompt = build_prompt(&["抗糖", "医生"], &["例句一".to_string()], 3);
    assert!(prompt.contains("抗糖") && prompt.contains("医生") && prompt.contains("例句一"));
    assert!(prompt.contains("three"));
    let lines = parse_reply("1. 第一句抗糖\n\n2) 第二句抗糖\n- 第三句");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "第一句抗糖");
}
