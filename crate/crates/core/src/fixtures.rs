//! Small lexicon and corpora shipped with the crate for tests, demos and
//! reference reports.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augmenter::template_chars;
use crate::corpus::{Corpus, GoldMorph, Split, TranscriptPair};
use crate::lexicon::{MorphEntry, MorphKind, MorphLexicon, MorphVariant, Provenance};
use crate::phonetics::PhoneticsTable;

pub const LEXICON_TSV: &str = include_str!("../data/lexicon.tsv");
pub const CORPUS_JSONL: &str = include_str!("../data/corpus.jsonl");
pub const NOISY_CORPUS_JSONL: &str = include_str!("../data/corpus_noisy.jsonl");

/// Number of gold morphs removed from the clean corpus to build the noisy one.
pub const OMITTED_MORPHS: usize = 50;

pub fn fixture_lexicon() -> MorphLexicon {
    MorphLexicon::read(LEXICON_TSV.as_bytes()).expect("shipped lexicon is valid")
}

/// A sentence with a known correct restoration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkedExample {
    pub name: &'static str,
    pub input: &'static str,
    pub expected: &'static str,
}

const fn ex(name: &'static str, input: &'static str, expected: &'static str) -> WorkedExample {
    WorkedExample { name, input, expected }
}

/// Morph examples with their restorations. Restorations are themselves morph-free.
pub fn worked_examples() -> Vec<WorkedExample> {
    vec![
        ex("filler pair", "某医某院", "医院"),
        ex("filler word", "祛什么斑", "祛斑"),
        ex("reduplication", "小问小题", "问题"),
        ex("letter onset", "k糖", "抗糖"),
        ex("letter onset 2", "k老", "抗老"),
        ex("synonym", "白大褂", "医生"),
        ex("single filler", "手某术", "手术"),
        ex(
            "two-morph sentence",
            "咱们一些小糖人都是一样可以放心去喝，也不用去找白褂褂了。",
            "咱们一些糖尿病患者都是一样可以放心去喝，也不用去找医生了。",
        ),
        ex("asr filler", "白某障", "白内障"),
        ex("asr homophone", "白母障", "白内障"),
        ex("asr filler tone", "白某张", "白内障"),
        ex("asr filler tone 2", "白某章", "白内障"),
        ex(
            "real: immunity and cold",
            "BC组合在三号选项三宝贝那维生c呢孩子，我们自己老年人免某粒特别弱，经常被其他人连带，经常阿秋阿秋的。",
            "BC组合在三号选项三宝贝那维生c呢孩子，我们自己老年人免疫力特别弱，经常被其他人连带，经常感冒的。",
        ),
        ex("real: approval mark", "都知道用小蓝帽什么意思吧，对不对？", "都知道用保健食品标志什么意思吧，对不对？"),
        ex("real: currency", "我们一号链接三百一十八米，两桶。", "我们一号链接三百一十八元，两桶。"),
        ex(
            "generated: balance",
            "想要改某善身体某平某衡？试试我们的新品，今天下单有特别优惠，立减50米！",
            "想要改善身体平衡？试试我们的新品，今天下单有特别优惠，立减50元！",
        ),
        ex(
            "generated: pregnancy",
            "我们的产品专为孕妈妈设计，能够帮助控制糖高，减轻身体猛副某用，让孕期更加轻松。",
            "我们的产品专为孕妇设计，能够帮助控制高血糖，减轻身体副作用，让孕期更加轻松。",
        ),
        ex(
            "generated: exercise",
            "运和动不仅有助于心血管健康，还能减少某血某栓形成的风险，百大褂也经常强调这一点。",
            "运动不仅有助于心血管健康，还能减少血栓形成的风险，医生也经常强调这一点。",
        ),
    ]
}

/// Carrier sentences for one morph; `{a}` is the slot.
const ONE_SLOT: [&str; 6] = [
    "家人们注意看，{a}这个事情我们一定要重视。",
    "今天直播间给大家讲讲{a}，大家认真听。",
    "有朋友在评论区问{a}，我来统一说一下。",
    "说到{a}，我们家这款产品真的很有优势。",
    "关于{a}的问题，主播今天一次讲清楚。",
    "我身边好多朋友都在关注{a}这一块。",
];

/// Carrier sentences for two morphs.
const TWO_SLOT: [&str; 3] = ["先说{a}，再说{b}，两个都很重要。", "{a}和{b}我们今天都会讲到。", "很多人关心{a}，也有人问{b}。"];

/// Sentences free of any morph.
const NEGATIVES: [&str; 24] = [
    "欢迎来到直播间，喜欢主播的点点关注。",
    "今天的福利已经给大家准备好了。",
    "这款产品口感清爽，适合全家人一起喝。",
    "库存不多了，需要的抓紧时间下单。",
    "我们家的快递都是当天发货。",
    "有问题随时在评论区留言。",
    "这个价格只有今天直播间才有。",
    "买二送一，活动马上就要结束了。",
    "老粉都知道我们家的品质。",
    "包装都是独立密封的，出门携带很方便。",
    "主播自己也一直在用这一款。",
    "收到货有任何不满意都可以联系客服。",
    "大家可以先加入购物车再慢慢看。",
    "这一批是新到的货，日期都很新鲜。",
    "还没有点关注的朋友点一下关注。",
    "今天给大家带来的是我们的招牌产品。",
    "上一场直播没抢到的朋友这次不要错过。",
    "我们会根据大家的反馈继续改进。",
    "这个颜色也很好看，适合日常搭配。",
    "我们的客服晚上十点之前都在线。",
    "大家把想要的款式打在公屏上。",
    "这个套装比单买划算很多。",
    "家里有老人的可以考虑给他们带一份。",
    "下单之前看清楚规格再拍。",
];

struct Placed {
    text: String,
    morphs: Vec<GoldMorph>,
}

fn fill(template: &str, slots: &[(&str, &str)]) -> Placed {
    let mut text = String::new();
    let mut morphs = Vec::new();
    let mut rest = template;
    let mut pos = 0;
    loop {
        let next = slots.iter().filter_map(|(name, _)| rest.find(name).map(|i| (i, *name))).min();
        let Some((i, name)) = next else {
            text.push_str(rest);
            break;
        };
        let head = &rest[..i];
        text.push_str(head);
        pos += head.chars().count();
        let surface = slots.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).unwrap_or_default();
        let len = surface.chars().count();
        morphs.push(GoldMorph { surface: surface.to_string(), original: String::new(), start: pos, end: pos + len });
        text.push_str(surface);
        pos += len;
        rest = &rest[i + name.len()..];
    }
    Placed { text, morphs }
}

fn positive(id: String, template: &str, variants: &[(&str, &str)], split: Split) -> TranscriptPair {
    let slots: Vec<(&str, &str)> = ["{a}", "{b}"].iter().copied().zip(variants.iter().map(|(s, _)| *s)).collect();
    let mut placed = fill(template, &slots);
    for m in placed.morphs.iter_mut() {
        m.original = variants.iter().find(|(s, _)| *s == m.surface).map(|(_, o)| o.to_string()).unwrap_or_default();
    }
    TranscriptPair::positive(id, placed.text, placed.morphs, split)
}

fn split_of(i: usize) -> Split {
    match i % 10 {
        0..=5 => Split::Train,
        6 => Split::Valid,
        7 | 8 => Split::Test1,
        _ => Split::Test2,
    }
}

fn with_meta(mut r: TranscriptPair, i: usize) -> TranscriptPair {
    if r.split == Split::Test2 {
        r.meta.asr = "asr-b".into();
        r.meta.channel = format!("room-{}", 7 + i % 2);
    } else {
        r.meta.asr = "asr-a".into();
        r.meta.channel = format!("room-{}", 1 + i % 5);
    }
    r
}

/// Morphs the lexicon does not list but the phonetic rules restore.
const GENERATIVE_ONLY: [(&str, &str); 4] = [("白某障", "白内障"), ("白某章", "白内障"), ("医某院", "医院"), ("手什么术", "手术")];

/// Clean corpus: every gold morph annotated, every record restorable by the default resolver.
pub fn fixture_corpus() -> Corpus {
    let lex = fixture_lexicon();
    let pairs: Vec<(&str, &str)> = lex.variants().map(|(e, v)| (v.surface.as_str(), e.original.as_str())).collect();
    let mut records = Vec::new();
    let mut n = 0;
    let mut push = |r: TranscriptPair, records: &mut Vec<TranscriptPair>| {
        records.push(with_meta(r, n));
        n += 1;
    };
    for (vi, (surface, original)) in pairs.iter().enumerate() {
        for t in 0..2 {
            let template = ONE_SLOT[(vi + t * 3) % ONE_SLOT.len()];
            let id = format!("fx-{:04}", records.len());
            let split = split_of(vi * 2 + t);
            push(positive(id, template, &[(surface, original)], split), &mut records);
        }
    }
    for i in 0..20 {
        let a = pairs[(i * 7) % pairs.len()];
        let b = pairs[(i * 7 + 11) % pairs.len()];
        if a.1 == b.1 {
            continue;
        }
        let id = format!("fx-{:04}", records.len());
        push(positive(id, TWO_SLOT[i % TWO_SLOT.len()], &[a, b], split_of(i)), &mut records);
    }
    for (i, pair) in GENERATIVE_ONLY.iter().enumerate() {
        let id = format!("fx-{:04}", records.len());
        push(positive(id, ONE_SLOT[i % ONE_SLOT.len()], &[*pair], split_of(i)), &mut records);
    }
    for (i, w) in worked_examples().iter().filter(|w| w.input.chars().count() > 8).enumerate() {
        let res = crate::resolver::resolve(w.input, &lex, &Default::default()).expect("default config is valid");
        let morphs = res
            .spans
            .iter()
            .map(|s| GoldMorph { surface: s.surface.clone(), original: s.resolved.clone(), start: s.start, end: s.end })
            .collect();
        let id = format!("fx-{:04}", records.len());
        push(TranscriptPair::positive(id, w.input, morphs, split_of(i)), &mut records);
    }
    for (i, text) in NEGATIVES.iter().enumerate() {
        let id = format!("fx-{:04}", records.len());
        push(TranscriptPair::negative(id, *text, split_of(i)), &mut records);
    }
    // Originals on their own are not morphs.
    let mut seen = HashSet::new();
    for (i, e) in lex.entries().iter().enumerate() {
        if !seen.insert(e.original.as_str()) {
            continue;
        }
        let text = ONE_SLOT[i % ONE_SLOT.len()].replace("{a}", &e.original);
        let id = format!("fx-{:04}", records.len());
        push(TranscriptPair::negative(id, text, split_of(i)), &mut records);
    }
    Corpus::new(records)
}

/// The clean corpus with [`OMITTED_MORPHS`] gold morphs dropped, one per record.
/// A record left without morphs becomes a negative whose target keeps the morph.
pub fn noisy_corpus() -> Corpus {
    let mut corpus = fixture_corpus();
    let lex = fixture_lexicon();
    let mut omitted = 0;
    for r in corpus.records.iter_mut() {
        if omitted == OMITTED_MORPHS {
            break;
        }
        let Some(idx) = r.morphs.iter().position(|m| lex.lookup_variant(&m.surface).is_some()) else {
            continue;
        };
        let mut morphs = r.morphs.clone();
        morphs.remove(idx);
        let mut next = if morphs.is_empty() {
            TranscriptPair::negative(r.id.clone(), r.source.clone(), r.split)
        } else {
            TranscriptPair::positive(r.id.clone(), r.source.clone(), morphs, r.split)
        };
        next.meta = r.meta.clone();
        *r = next;
        omitted += 1;
    }
    corpus
}

pub fn shipped_corpus() -> Corpus {
    Corpus::parse(CORPUS_JSONL, "corpus.jsonl", Default::default()).expect("shipped corpus is valid").corpus
}

pub fn shipped_noisy_corpus() -> Corpus {
    Corpus::parse(NOISY_CORPUS_JSONL, "corpus_noisy.jsonl", Default::default()).expect("shipped corpus is valid").corpus
}

/// Han characters usable in synthetic words: in the phonetics table, outside
/// the augmentation templates, and free of filler and prefix characters.
fn synthetic_pool() -> Vec<char> {
    let table = PhoneticsTable::builtin();
    let banned = template_chars();
    (0x5200u32..0x6800)
        .filter_map(char::from_u32)
        .filter(|c| table.contains(*c) && !banned.contains(c) && !"某什么小米".contains(*c))
        .collect()
}

fn random_word(pool: &[char], len: usize, rng: &mut ChaCha8Rng) -> String {
    (0..len).map(|_| *pool.choose(rng).expect("non-empty pool")).collect()
}

/// A lexicon of the requested shape with made-up words; variants are spread
/// as evenly as possible across originals.
pub fn synthetic_lexicon(originals: usize, variants: usize, seed: u64) -> MorphLexicon {
    assert!(originals > 0 && variants >= originals, "each original needs a variant");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = synthetic_pool();
    let mut used: HashSet<String> = HashSet::new();
    let fresh = |len: usize, used: &mut HashSet<String>, rng: &mut ChaCha8Rng| loop {
        let w = random_word(&pool, len, rng);
        if used.insert(w.clone()) {
            return w;
        }
    };
    let base = variants / originals;
    let extra = variants % originals;
    let mut order: Vec<usize> = (0..originals).collect();
    order.shuffle(&mut rng);
    let extra_set: HashSet<usize> = order.into_iter().take(extra).collect();
    let entries = (0..originals)
        .map(|i| {
            let len = rng.random_range(2..=3);
            let original = fresh(len, &mut used, &mut rng);
            let count = base + usize::from(extra_set.contains(&i));
            let variants = (0..count)
                .map(|j| {
                    let kind = [MorphKind::Transformation, MorphKind::Homophone, MorphKind::Synonym][j % 3];
                    let surface = match kind {
                        MorphKind::Transformation => {
                            let chars: Vec<char> = original.chars().collect();
                            let mut s: String = chars[..1].iter().collect();
                            s.push_str(&random_word(&pool, 1 + j / 3 % 2, &mut rng));
                            s.extend(&chars[1..]);
                            if used.insert(s.clone()) {
                                s
                            } else {
                                fresh(len + 1, &mut used, &mut rng)
                            }
                        }
                        _ => fresh(len, &mut used, &mut rng),
                    };
                    MorphVariant { surface, kind, provenance: Provenance::Annotated }
                })
                .collect();
            MorphEntry { original, variants }
        })
        .collect();
    MorphLexicon::from_entries(entries).expect("synthetic words are unique")
}
