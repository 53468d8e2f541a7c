//! Lexicon-guided data augmentation.
//!
//! For each covered original word, `k` promotional sentences containing the
//! word are obtained (from a text-generation service or the built-in template
//! bank), then every variant of the word is substituted in, one positive
//! sample per variant.

use std::collections::BTreeSet;
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusStats, GoldMorph, Label, Meta, Split, TranscriptPair};
use crate::lexicon::{MorphKind, MorphLexicon, Provenance};

pub const GEN_URL_VAR: &str = "MORPH_GEN_URL";
pub const GEN_TOKEN_VAR: &str = "MORPH_GEN_TOKEN";

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("training set has no positive samples")]
    NoPositives,
    #[error("generation service unavailable: {0}")]
    GenerationServiceUnavailable(String),
    #[error("could not obtain enough sentences containing `{0}`")]
    ExhaustedRetries(String),
    #[error("`{0}` is not an original word of the lexicon")]
    UnknownOriginal(String),
    #[error("sentence does not contain `{original}`: {sentence}")]
    MissingOriginal { original: String, sentence: String },
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    #[default]
    Offline,
    Llm,
}

impl std::str::FromStr for GenMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offline" => Ok(GenMode::Offline),
            "llm" => Ok(GenMode::Llm),
            other => Err(format!("unknown generation mode `{other}` (expected offline or llm)")),
        }
    }
}

/// Which originals get new sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Targets {
    /// Every original of the lexicon, in lexicon order.
    #[default]
    All,
    /// Originals reached by drawing this many positives from the training set.
    Sampled { draws: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub k: usize,
    pub mode: GenMode,
    pub seed: u64,
    pub keep_original_as_negative: bool,
    pub targets: Targets,
    pub temperature: f64,
    /// Extra requests allowed per original when replies lack the word.
    pub retry_budget: u32,
    /// Example sentences shown to the generation service.
    pub examples: usize,
    pub max_in_flight: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            k: 5,
            mode: GenMode::Offline,
            seed: 42,
            keep_original_as_negative: true,
            targets: Targets::All,
            temperature: 0.7,
            retry_budget: 3,
            examples: 3,
            max_in_flight: 4,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.k == 0 {
            return Err(AugmentError::InvalidConfig("k must be at least 1".into()));
        }
        if self.mode == GenMode::Offline && self.k > TEMPLATE_BANK.len() {
            return Err(AugmentError::InvalidConfig(format!(
                "offline mode has {} templates; k = {} is too large",
                TEMPLATE_BANK.len(),
                self.k
            )));
        }
        Ok(())
    }
}

/// Picks one positive uniformly and returns it with its morph surfaces.
pub fn sample_positive<'a, R: Rng + ?Sized>(trainset: &'a [TranscriptPair], rng: &mut R) -> Result<(&'a TranscriptPair, Vec<String>), AugmentError> {
    let positives: Vec<&TranscriptPair> = trainset.iter().filter(|r| r.label == Label::Positive && !r.morphs.is_empty()).collect();
    let chosen = *positives.choose(rng).ok_or(AugmentError::NoPositives)?;
    Ok((chosen, chosen.morphs.iter().map(|m| m.surface.clone()).collect()))
}

const NUMBER_WORDS: [&str; 11] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];

fn count_word(k: usize) -> String {
    NUMBER_WORDS.get(k).map(|w| w.to_string()).unwrap_or_else(|| k.to_string())
}

/// The generation prompt with the requested count, target words and examples filled in.
pub fn build_prompt(targets: &[&str], examples: &[String], k: usize) -> String {
    let mut p = format!(
        "Your role is that of a live-streaming host promoting products. You need to generate {} promotional sentences that include the target words. \
Here are some real promotional sentences for you to mimic. The sentences should not have repeated meanings. The target word should remain unchanged. \
The length of the sentences should be as consistent as possible with the examples provided.\n",
        count_word(k)
    );
    p.push_str("Target Words:\n");
    p.push_str(&targets.join("、"));
    p.push_str("\nExamples:\n");
    for e in examples {
        p.push_str(e);
        p.push('\n');
    }
    p.push_str("Generated Sentences:\n");
    p
}

/// Splits a free-text reply into sentences, dropping list markers.
pub fn parse_reply(reply: &str) -> Vec<String> {
    reply
        .lines()
        .map(|l| {
            let l = l.trim();
            let l = l.trim_start_matches(|c: char| c.is_ascii_digit());
            let l = l.trim_start_matches(['.', '、', ')', '）', '-', '*', ':', '：']);
            l.trim().to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

/// Source of candidate sentences for one original word.
pub trait SentenceGenerator: Send + Sync {
    fn generate(&self, original: &str, k: usize, examples: &[String], attempt: u32) -> Result<Vec<String>, AugmentError>;
}

/// Live-commerce frames across four product registers; `{w}` marks the word.
pub const TEMPLATE_BANK: [&str; 24] = [
    // health supplements
    "家人们，今天这款{w}真的值得入手，库存不多了。",
    "我自己每天都在用{w}，坚持一个月感觉很不一样。",
    "关于{w}大家有疑问的可以在评论区问我。",
    "{w}这个话题很多宝宝都关心，我们今天好好聊一聊。",
    "直播间的朋友们，想了解{w}的扣个一。",
    "今天给大家讲讲{w}，听完再决定要不要下单。",
    // pharmaceuticals
    "这盒产品跟{w}有关的说明都写在包装背面了。",
    "很多老朋友问{w}的事情，我统一回复一下。",
    "{w}方面的内容一定要看清楚说明书再用。",
    "我们家的老人之前也碰到过{w}的情况。",
    "说到{w}，大家一定要听专业人士的建议。",
    "有{w}困扰的朋友可以先收藏一下直播间。",
    // medical devices
    "这台仪器操作简单，跟{w}相关的功能一键就能打开。",
    "买回家给爸妈用，{w}的问题不用再跑来跑去。",
    "我们的售后团队会跟进{w}的所有疑问。",
    "三年质保，关于{w}的任何情况都可以找客服。",
    "今天下单还送一份{w}的使用手册。",
    "先别急着拍，我把{w}的细节讲清楚。",
    // cosmetics
    "姐妹们，{w}这一步千万不能省。",
    "这支精华主打{w}，上脸非常清爽。",
    "想要{w}的效果，晚上用完第二天就能看到。",
    "我们的配方专门针对{w}做了升级。",
    "{w}一直是大家最关心的，今天价格也很给力。",
    "评论区好多人在问{w}，我现在就来回答。",
];

fn word_hash(seed: u64, word: &str) -> u64 {
    word.chars().fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, c| (h ^ c as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Deterministic template filling; no network.
#[derive(Debug, Clone, Copy)]
pub struct OfflineGenerator {
    pub seed: u64,
}

impl SentenceGenerator for OfflineGenerator {
    fn generate(&self, original: &str, k: usize, _examples: &[String], _attempt: u32) -> Result<Vec<String>, AugmentError> {
        let n = TEMPLATE_BANK.len();
        let start = (word_hash(self.seed, original) % n as u64) as usize;
        Ok((0..k.min(n)).map(|i| TEMPLATE_BANK[(start + i) % n].replace("{w}", original)).collect())
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Text-completion endpoint: POST `{prompt, temperature}`, reply `{text}`.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    url: String,
    token: Option<String>,
    temperature: f64,
    client: reqwest::blocking::Client,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>, token: Option<String>, temperature: f64, timeout: Duration) -> Result<Self, AugmentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AugmentError::GenerationServiceUnavailable(e.to_string()))?;
        Ok(HttpGenerator { url: url.into(), token, temperature, client })
    }

    /// Reads the endpoint and token from the environment.
    pub fn from_env(temperature: f64) -> Result<Self, AugmentError> {
        let url = std::env::var(GEN_URL_VAR)
            .map_err(|_| AugmentError::GenerationServiceUnavailable(format!("{GEN_URL_VAR} is not set")))?;
        Self::new(url, std::env::var(GEN_TOKEN_VAR).ok(), temperature, Duration::from_secs(60))
    }
}

impl SentenceGenerator for HttpGenerator {
    fn generate(&self, original: &str, k: usize, examples: &[String], _attempt: u32) -> Result<Vec<String>, AugmentError> {
        let prompt = build_prompt(&[original], examples, k);
        let mut req = self.client.post(&self.url).json(&CompletionRequest { prompt: &prompt, temperature: self.temperature });
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let unavailable = |e: String| AugmentError::GenerationServiceUnavailable(format!("{}: {e}", self.url));
        let resp = req.send().map_err(|e| unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable(format!("HTTP {}", resp.status())));
        }
        let body: CompletionResponse = resp.json().map_err(|e| unavailable(e.to_string()))?;
        Ok(parse_reply(&body.text))
    }
}

/// Collects up to `k` distinct sentences containing `original`, re-asking up to `retry_budget` times.
fn collect_sentences(
    original: &str,
    k: usize,
    examples: &[String],
    generator: &dyn SentenceGenerator,
    retry_budget: u32,
) -> Result<Vec<String>, AugmentError> {
    let mut got: Vec<String> = Vec::with_capacity(k);
    for attempt in 0..=retry_budget {
        for s in generator.generate(original, k - got.len(), examples, attempt)? {
            if got.len() == k {
                break;
            }
            if !s.contains(original) {
                log::debug!("rejected sentence without `{original}`: {s}");
                continue;
            }
            if !got.contains(&s) {
                got.push(s);
            }
        }
        if got.len() == k {
            break;
        }
    }
    if got.len() < k {
        log::warn!("only {} of {k} sentences for `{original}` after {} retries", got.len(), retry_budget);
    }
    Ok(got)
}

/// Exactly `k` sentences containing `original`, or [`AugmentError::ExhaustedRetries`].
pub fn generate_sentences(
    original: &str,
    k: usize,
    examples: &[String],
    generator: &dyn SentenceGenerator,
    retry_budget: u32,
) -> Result<Vec<String>, AugmentError> {
    if original.is_empty() {
        return Err(AugmentError::InvalidConfig("empty original word".into()));
    }
    let got = collect_sentences(original, k, examples, generator, retry_budget)?;
    if got.len() < k {
        return Err(AugmentError::ExhaustedRetries(original.to_string()));
    }
    Ok(got)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub id: String,
    /// The sentence with the variant in place of the original.
    pub sentence: String,
    /// The sentence as generated, containing the original.
    pub target: String,
    pub original: String,
    pub variant: String,
    pub kind: MorphKind,
    pub morphs: Vec<GoldMorph>,
}

impl GeneratedSample {
    pub fn into_pair(self, split: Split) -> TranscriptPair {
        TranscriptPair {
            id: self.id,
            source: self.sentence,
            target: self.target,
            label: Label::Positive,
            morphs: self.morphs,
            split,
            meta: Meta { provenance: Provenance::Generated, ..Meta::default() },
        }
    }
}

/// One sample per variant of `original`, with every occurrence replaced.
/// `id_prefix` is extended with the variant index.
pub fn substitute_variants(sentence: &str, original: &str, lexicon: &MorphLexicon, id_prefix: &str) -> Result<Vec<GeneratedSample>, AugmentError> {
    let entry = lexicon.entry(original).ok_or_else(|| AugmentError::UnknownOriginal(original.to_string()))?;
    if original.is_empty() || !sentence.contains(original) {
        return Err(AugmentError::MissingOriginal { original: original.into(), sentence: sentence.into() });
    }
    let pieces: Vec<&str> = sentence.split(original).collect();
    Ok(entry
        .variants
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let mut out = String::with_capacity(sentence.len());
            let mut morphs = Vec::new();
            let mut pos = 0;
            let vlen = v.surface.chars().count();
            for (i, piece) in pieces.iter().enumerate() {
                if i > 0 {
                    morphs.push(GoldMorph { surface: v.surface.clone(), original: original.into(), start: pos, end: pos + vlen });
                    out.push_str(&v.surface);
                    pos += vlen;
                }
                out.push_str(piece);
                pos += piece.chars().count();
            }
            GeneratedSample {
                id: format!("{id_prefix}-v{vi}"),
                sentence: out,
                target: sentence.to_string(),
                original: original.into(),
                variant: v.surface.clone(),
                kind: v.kind,
                morphs,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalCount {
    pub original: String,
    pub variants: usize,
    pub sentences: usize,
    pub positives: usize,
    pub skipped_sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub k: usize,
    pub mode: GenMode,
    pub targets: Targets,
    pub keep_original_as_negative: bool,
    pub originals: usize,
    /// `k` times the variant count of the covered originals.
    pub expected_positives: usize,
    pub positives: usize,
    pub negatives: usize,
    pub skipped_sentences: usize,
    pub per_original: Vec<OriginalCount>,
}

#[derive(Debug, Clone)]
pub struct AugmentOutput {
    pub corpus: Corpus,
    pub manifest: Manifest,
}

/// Originals to cover, in first-seen order.
fn choose_originals(trainset: &[TranscriptPair], lexicon: &MorphLexicon, config: &AugmentConfig, rng: &mut ChaCha8Rng) -> Result<Vec<String>, AugmentError> {
    match config.targets {
        Targets::All => Ok(lexicon.originals().map(str::to_string).collect()),
        Targets::Sampled { draws } => {
            let mut out: Vec<String> = Vec::new();
            for _ in 0..draws {
                let (_, ws) = sample_positive(trainset, rng)?;
                let known: Vec<&String> = ws.iter().filter(|w| lexicon.lookup_variant(w).is_some()).collect();
                for o in lexicon.originals_of(&known).map_err(|e| AugmentError::UnknownOriginal(e.to_string()))? {
                    if !out.contains(&o) {
                        out.push(o);
                    }
                }
            }
            Ok(out)
        }
    }
}

fn examples_for(original: &str, trainset: &[TranscriptPair], n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let positives: Vec<&TranscriptPair> = trainset.iter().filter(|r| r.label == Label::Positive).collect();
    let mut matching: Vec<&TranscriptPair> = positives.iter().copied().filter(|r| r.morphs.iter().any(|m| m.original == original)).collect();
    if matching.is_empty() {
        matching = positives;
    }
    matching.choose_multiple(rng, n).map(|r| r.source.clone()).collect()
}

pub fn run_augmentation(
    trainset: &[TranscriptPair],
    lexicon: &MorphLexicon,
    config: &AugmentConfig,
    generator: &dyn SentenceGenerator,
) -> Result<AugmentOutput, AugmentError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let originals = choose_originals(trainset, lexicon, config, &mut rng)?;
    let jobs: Vec<(usize, String, Vec<String>)> = originals
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            let ex = examples_for(&o, trainset, config.examples, &mut rng);
            (i, o, ex)
        })
        .collect();

    let generate = |(_, o, ex): &(usize, String, Vec<String>)| collect_sentences(o, config.k, ex, generator, config.retry_budget);
    let sentences: Vec<Vec<String>> = match config.mode {
        GenMode::Offline => jobs.iter().map(generate).collect::<Result<_, _>>()?,
        GenMode::Llm => rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_in_flight.max(1))
            .build()
            .map_err(|e| AugmentError::GenerationServiceUnavailable(e.to_string()))?
            .install(|| jobs.par_iter().map(generate).collect::<Result<_, _>>())?,
    };

    let mut records = Vec::new();
    let mut per_original = Vec::with_capacity(jobs.len());
    let mut expected = 0;
    let mut negatives = 0;
    for ((i, o, _), sents) in jobs.iter().zip(sentences) {
        let variants = lexicon.entry(o).ok_or_else(|| AugmentError::UnknownOriginal(o.clone()))?.variants.len();
        expected += config.k * variants;
        let mut positives = 0;
        for (si, s) in sents.iter().enumerate() {
            let prefix = format!("aug-{i}-{si}");
            for g in substitute_variants(s, o, lexicon, &prefix)? {
                records.push(g.into_pair(Split::Train));
                positives += 1;
            }
            if config.keep_original_as_negative {
                let mut neg = TranscriptPair::negative(format!("{prefix}-neg"), s.clone(), Split::Train);
                neg.meta.provenance = Provenance::Generated;
                records.push(neg);
                negatives += 1;
            }
        }
        per_original.push(OriginalCount {
            original: o.clone(),
            variants,
            sentences: sents.len(),
            positives,
            skipped_sentences: config.k - sents.len(),
        });
    }
    let positives = records.len() - negatives;
    let manifest = Manifest {
        seed: config.seed,
        k: config.k,
        mode: config.mode,
        targets: config.targets,
        keep_original_as_negative: config.keep_original_as_negative,
        originals: per_original.len(),
        expected_positives: expected,
        positives,
        negatives,
        skipped_sentences: per_original.iter().map(|c| c.skipped_sentences).sum(),
        per_original,
    };
    Ok(AugmentOutput { corpus: Corpus::new(records), manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub positives: usize,
    pub negatives: usize,
    pub distinct_originals: usize,
    pub distinct_variants: usize,
    pub mean_morphs_per_positive: f64,
}

pub fn dataset_stats(corpus: &Corpus) -> DatasetStats {
    let s: CorpusStats = corpus.stats();
    DatasetStats {
        positives: s.positive,
        negatives: s.negative,
        distinct_originals: s.distinct_originals,
        distinct_variants: s.distinct_variants,
        mean_morphs_per_positive: s.mean_morphs_per_positive,
    }
}

/// Characters of every template outside the `{w}` slot.
pub fn template_chars() -> BTreeSet<char> {
    TEMPLATE_BANK.iter().flat_map(|t| t.replace("{w}", "").chars().collect::<Vec<_>>()).collect()
}
