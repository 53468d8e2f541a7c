//! Morph resolution for live-stream transcripts.
//!
//! Streamers disguise sensitive words with fillers (`手某术`), letters
//! standing for syllables (`k糖`) or stand-in phrases (`白大褂`). This crate
//! finds those morphs and restores the original words, scores predictions
//! sentence by sentence, grows training data from the lexicon, and runs the
//! review loop that keeps corpus annotations honest.

pub mod augmenter;
pub mod corpus;
pub mod evaluator;
pub mod fixtures;
pub mod io;
pub mod lexicon;
pub mod phonetics;
pub mod resolver;

pub use lexicon::{MorphEntry, MorphKind, MorphLexicon, MorphVariant, Provenance};
pub use phonetics::{PhoneticsTable, Reading, Syllable};
pub use resolver::{MorphSpan, Resolution, ResolveMode, Resolver, ResolverConfig, Rule};
