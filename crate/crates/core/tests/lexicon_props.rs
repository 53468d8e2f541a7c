use morph_core::fixtures::{fixture_lexicon, synthetic_lexicon};
use morph_core::lexicon::{LexiconError, MorphEntry, MorphKind, MorphLexicon, MorphVariant, Provenance};
use proptest::prelude::*;

const ALPHABET: [char; 3] = ['某', '医', '院'];

fn word(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(ALPHABET.to_vec()), 1..=max).prop_map(|v| v.into_iter().collect())
}

fn small_lexicon() -> impl Strategy<Value = MorphLexicon> {
    prop::collection::btree_set(word(3), 1..6).prop_map(|surfaces| {
        let entries = surfaces
            .into_iter()
            .enumerate()
            .map(|(i, s)| MorphEntry {
                original: format!("原{i}"),
                variants: vec![MorphVariant { surface: s, kind: MorphKind::Homophone, provenance: Provenance::Annotated }],
            })
            .collect();
        MorphLexicon::from_entries(entries).unwrap()
    })
}

/// Greedy scan: at each position take the longest surface starting there.
fn brute_force(text: &str, lexicon: &MorphLexicon) -> Vec<(usize, usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let best = lexicon
            .variants()
            .map(|(_, v)| v.surface.chars().collect::<Vec<_>>())
            .filter(|s| chars[i..].starts_with(s))
            .map(|s| s.len())
            .max();
        match best {
            Some(n) => {
                out.push((i, i + n, chars[i..i + n].iter().collect()));
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

proptest! {
    #[test]
    fn matcher_agrees_with_brute_force(lex in small_lexicon(), text in word(12)) {
        let got: Vec<(usize, usize, String)> = lex
            .build_matcher()
            .find_all(&text)
            .into_iter()
            .map(|h| (h.start, h.end, lex.entries()[h.entry].variants[h.variant].surface.clone()))
            .collect();
        prop_assert_eq!(got, brute_force(&text, &lex));
    }

    #[test]
    fn tsv_round_trip(seed in any::<u64>(), originals in 1usize..20, extra in 0usize..20) {
        let lex = synthetic_lexicon(originals, originals + extra, seed);
        let mut buf = Vec::new();
        lex.write(&mut buf).unwrap();
        let back = MorphLexicon::read(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &lex);
        prop_assert_eq!(back.variant_count(), originals + extra);
    }
}

#[test]
fn every_variant_finds_itself() {
    for lex in [fixture_lexicon(), synthetic_lexicon(430, 2688, 7)] {
        let matcher = lex.build_matcher();
        for (entry, v) in lex.variants() {
            let hits = matcher.find_all(&v.surface);
            assert_eq!(hits.len(), 1, "{}", v.surface);
            assert_eq!(lex.entries()[hits[0].entry].original, entry.original);
            assert_eq!((hits[0].start, hits[0].end), (0, v.surface.chars().count()));
        }
    }
}

#[test]
fn file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lex.tsv");
    let lex = fixture_lexicon();
    lex.save(&path).unwrap();
    assert_eq!(MorphLexicon::load(&path).unwrap(), lex);

    let dup = "抗糖\tk糖\tH\tannotated\n抗老\tk糖\tH\tannotated\n";
    assert!(matches!(MorphLexicon::read(dup.as_bytes()), Err(LexiconError::DuplicateVariant { .. })));
    let bad = "抗糖\tk糖\tZ\tannotated\n";
    assert!(matches!(MorphLexicon::read(bad.as_bytes()), Err(LexiconError::MalformedLine { line: 1, .. })));
    assert!(matches!(MorphLexicon::read("# only a comment\n".as_bytes()), Err(LexiconError::EmptyLexicon)));
}

#[test]
fn add_variant_returns_new_version() {
    let lex = fixture_lexicon();
    let next = lex.add_variant("医院", "医某院", MorphKind::Transformation).unwrap();
    assert_eq!(next.variant_count(), lex.variant_count() + 1);
    assert!(lex.lookup_variant("医某院").is_none());
    let hit = next.lookup_variant("医某院").unwrap();
    assert_eq!((hit.original, hit.variant.provenance), ("医院", Provenance::Reviewed));
    assert!(matches!(next.add_variant("抗老", "医某院", MorphKind::Homophone), Err(LexiconError::DuplicateVariant { .. })));
}
