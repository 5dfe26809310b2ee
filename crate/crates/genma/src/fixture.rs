//! Bundled synthetic corpora and the seeded template grammar that produces
//! them.
//!
//! Real code-mixed tweet corpora are not redistributable, so the repository
//! ships two small synthetic stand-ins under `data/`:
//!
//! * `data/train_60.sentimix` ([`TRAIN_60`]) — 60 tweets, 20 per class,
//!   code-mixed from two invented lexicons and decorated with URL, emoji,
//!   hashtag, mention, and punctuation noise. Used for end-to-end command
//!   examples and determinism checks.
//! * `data/separable_30.sentimix` ([`SEPARABLE_30`]) — 30 tweets, 10 per
//!   class, each opening with three class-marker words so the classes are
//!   trivially separable from character patterns alone. Used as the
//!   memorization target for small training runs.
//!
//! Both files are pure functions of a fixed seed: [`train_60`] and
//! [`separable_30`] regenerate them byte for byte, and unit tests pin the
//! bundled bytes to the generator output.
//!
//! # Template grammar
//!
//! Every tweet is drawn from one ChaCha8 stream per corpus:
//!
//! ```text
//! tweet    := marker? body noise*        (train corpus; marker with p = 0.5)
//! tweet    := marker marker marker body  (separable corpus; no noise)
//! body     := class-word filler-or-class{4..7}   (train)
//! body     := filler{2..3}                        (separable)
//! filler   := word from LEX1 | word from LEX2    (fair coin per slot)
//! noise    := emoji | punct | hashtag | mention | url   (0..2 per tweet)
//! ```
//!
//! The two filler lexicons are invented words over the letters
//! `a e i o u t l m s r n g p d b`; each is tagged with its pseudo-language
//! (`l1` or `l2`) and noise tokens are tagged `o`. Class words reserve
//! letters that never appear in fillers — positive uses `z`/`w`, negative
//! `k`/`f`, neutral `v`/`j` — so class identity is carried by character
//! patterns, which is what a character-level model can learn. In the
//! separable corpus the three opening markers put those letters entirely
//! inside the first 17 characters, the stretch of text covered by the first
//! pooled position of the default convolution stack.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{self, CharVocabulary, Example, Sentiment};
use crate::error::Result;

/// Bundled 60-tweet training corpus; byte-identical to [`train_60`]'s output.
pub const TRAIN_60: &str = include_str!("../../../data/train_60.sentimix");

/// Bundled 30-tweet separable corpus; byte-identical to [`separable_30`]'s
/// output.
pub const SEPARABLE_30: &str = include_str!("../../../data/separable_30.sentimix");

/// First pseudo-language filler lexicon, tagged `l1`.
const LEX1: [&str; 8] = [
    "talo", "misu", "renta", "lomi", "surel", "timbo", "garen", "podul",
];

/// Second pseudo-language filler lexicon, tagged `l2`.
const LEX2: [&str; 8] = [
    "gupan", "dolem", "nibus", "pagor", "tugel", "sadin", "borem", "ligad",
];

const EMOJI: [&str; 8] = ["😀", "🔥", "💯", "😡", "🙄", "✨", "🎉", "😢"];
const PUNCT: [&str; 4] = ["!!!", "...", "?!", "!?"];
const URLS: [&str; 3] = [
    "http://exa.mp/le",
    "www.talo.example",
    "http://misu.example/p",
];

/// Sentiment-bearing words for one class: short `markers` built purely from
/// the class's reserved letters plus vowels, and longer in-sentence `words`.
struct ClassBank {
    markers: [&'static str; 4],
    words: [&'static str; 4],
}

const BANKS: [ClassBank; 3] = [
    // positive: z, w
    ClassBank {
        markers: ["zaza", "wizo", "zewa", "wozi"],
        words: ["zowa", "wizel", "zunta", "wazol"],
    },
    // negative: k, f
    ClassBank {
        markers: ["kofa", "fiko", "kufe", "kufo"],
        words: ["kafu", "fekor", "kilfo", "fugak"],
    },
    // neutral: v, j
    ClassBank {
        markers: ["vija", "javo", "vuje", "vijo"],
        words: ["vajo", "jivel", "voju", "javun"],
    },
];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// A filler word with its pseudo-language tag.
fn filler(rng: &mut ChaCha8Rng) -> (String, String) {
    if rng.gen_bool(0.5) {
        (pick(rng, &LEX1).to_string(), "l1".to_string())
    } else {
        (pick(rng, &LEX2).to_string(), "l2".to_string())
    }
}

/// A class word tagged with a random pseudo-language, as code-mixed
/// sentiment words borrow from both.
fn class_word(rng: &mut ChaCha8Rng, pool: &[&str]) -> (String, String) {
    let tag = if rng.gen_bool(0.5) { "l1" } else { "l2" };
    (pick(rng, pool).to_string(), tag.to_string())
}

fn noise_token(rng: &mut ChaCha8Rng) -> (String, String) {
    let token = match rng.gen_range(0..5) {
        0 => pick(rng, &EMOJI).to_string(),
        1 => pick(rng, &PUNCT).to_string(),
        2 => format!("#{}", pick(rng, &LEX1)),
        3 => format!("@{}", pick(rng, &LEX2)),
        _ => pick(rng, &URLS).to_string(),
    };
    (token, "o".to_string())
}

fn tweet_tokens(rng: &mut ChaCha8Rng, class: usize, strong: bool) -> Vec<(String, String)> {
    let bank = &BANKS[class];
    let mut tokens = Vec::new();
    if strong {
        for _ in 0..3 {
            tokens.push(class_word(rng, &bank.markers));
        }
        let body = rng.gen_range(2..=3);
        for _ in 0..body {
            tokens.push(filler(rng));
        }
        return tokens;
    }
    if rng.gen_bool(0.5) {
        tokens.push(class_word(rng, &bank.markers));
    }
    // The first body slot is always a sentiment word so every tweet carries
    // class signal; later slots mix fillers in.
    tokens.push(class_word(rng, &bank.words));
    let body = rng.gen_range(4..=7);
    for _ in 0..body {
        if rng.gen_bool(0.45) {
            tokens.push(class_word(rng, &bank.words));
        } else {
            tokens.push(filler(rng));
        }
    }
    let noise = rng.gen_range(0..=2);
    for _ in 0..noise {
        let tok = noise_token(rng);
        let at = rng.gen_range(0..=tokens.len());
        tokens.insert(at, tok);
    }
    tokens
}

/// Renders `n` tweets in SentiMix format: classes cycle
/// positive/negative/neutral so every prefix is near-balanced, uids are
/// `<prefix><2-digit index>`, and the whole corpus is a pure function of
/// `seed`.
fn generate(n: usize, seed: u64, strong: bool, prefix: &str) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..n {
        let class = i % 3;
        let label = Sentiment::from_label_id(class).expect("class id in range");
        out.push_str(&format!("meta {prefix}{:02} {}\n", i + 1, label.as_str()));
        for (token, tag) in tweet_tokens(&mut rng, class, strong) {
            out.push_str(&format!("{token}\t{tag}\n"));
        }
        out.push('\n');
    }
    out
}

/// Regenerates the bundled 60-tweet training corpus.
pub fn train_60() -> String {
    generate(60, 7, false, "fx")
}

/// Regenerates the bundled 30-tweet separable corpus.
pub fn separable_30() -> String {
    generate(30, 11, true, "sep")
}

/// Parses a SentiMix corpus and prepares model-ready examples: normalizes
/// every tweet, builds the character vocabulary from the normalized texts,
/// and encodes each tweet to exactly `max_len` character indices.
pub fn prepare(text: &str, max_len: usize) -> Result<(Vec<Example>, CharVocabulary)> {
    let tweets = corpus::parse_sentimix(text)?;
    let texts: Vec<String> = tweets
        .iter()
        .map(|t| corpus::normalize(&t.joined_text()))
        .collect();
    let vocab = corpus::build_vocab(&texts)?;
    let examples = corpus::examples_from_tweets(&tweets, &vocab, max_len)?;
    Ok((examples, vocab))
}
