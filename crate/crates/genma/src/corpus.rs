//! Corpus ingestion: SentiMix-format parsing, tweet normalization, character
//! vocabulary construction, and index encoding.
//!
//! Normalization applies, in order: lower-casing, URL removal, punctuation
//! removal, emoji removal, and whitespace collapsing. The exact rules are
//! part of this crate's external contract:
//!
//! * URLs are substrings matching `https?://\S+` or `www\.\S+`.
//! * Punctuation is every character in the Unicode `P*` categories.
//! * Emoji are the codepoints `U+1F000` and above, plus `U+2600–U+27BF`
//!   (miscellaneous symbols and dingbats), `U+FE00–U+FE0F` (variation
//!   selectors), and `U+200D` (zero-width joiner).

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};

/// Index reserved for padding in every vocabulary.
pub const PAD_ID: usize = 0;
/// Index reserved for characters unseen at vocabulary-build time.
pub const UNK_ID: usize = 1;

/// One of the three sentiment classes, with the fixed label-id mapping
/// positive → 0, negative → 1, neutral → 2 used across the whole crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral];

    pub fn label_id(self) -> usize {
        match self {
            Sentiment::Positive => 0,
            Sentiment::Negative => 1,
            Sentiment::Neutral => 2,
        }
    }

    pub fn from_label_id(id: usize) -> Option<Sentiment> {
        Sentiment::ALL.get(id).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Sentiment> {
        match s {
            "positive" => Some(Sentiment::Positive),
            "negative" => Some(Sentiment::Negative),
            "neutral" => Some(Sentiment::Neutral),
            _ => None,
        }
    }
}

/// One tweet as read from a SentiMix-format file: surface tokens with their
/// word-level language tags. The tags are parsed for fidelity to the input
/// format but deliberately never used downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub uid: String,
    /// `(surface token, language tag)` pairs, in tweet order; never empty.
    pub tokens: Vec<(String, String)>,
    /// Absent for unlabeled test files.
    pub label: Option<Sentiment>,
}

impl RawTweet {
    /// The tweet's surface text: tokens joined with single spaces, before
    /// any normalization.
    pub fn joined_text(&self) -> String {
        let parts: Vec<&str> = self.tokens.iter().map(|(t, _)| t.as_str()).collect();
        parts.join(" ")
    }
}

/// A tweet ready for a model: normalized text, its character-index encoding,
/// and the gold label when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub uid: String,
    pub text: String,
    pub char_ids: Vec<usize>,
    pub label_id: Option<usize>,
}

/// Bidirectional character ↔ index mapping. Index 0 is reserved for padding
/// and index 1 for unknown characters; real characters occupy indices ≥ 2 in
/// first-occurrence order over the corpus the vocabulary was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocabulary {
    char_to_id: HashMap<char, usize>,
    chars: Vec<char>,
}

impl CharVocabulary {
    /// Builds a vocabulary from characters already in id order (index 2
    /// onward); duplicates are ignored. Used when loading checkpoints.
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> CharVocabulary {
        let mut vocab = CharVocabulary {
            char_to_id: HashMap::new(),
            chars: Vec::new(),
        };
        for c in chars {
            vocab.insert(c);
        }
        vocab
    }

    fn insert(&mut self, c: char) {
        if !self.char_to_id.contains_key(&c) {
            self.char_to_id.insert(c, self.chars.len() + 2);
            self.chars.push(c);
        }
    }

    /// Total size including the two reserved indices.
    pub fn size(&self) -> usize {
        self.chars.len() + 2
    }

    /// The index of an in-vocabulary character.
    pub fn id_of(&self, c: char) -> Option<usize> {
        self.char_to_id.get(&c).copied()
    }

    /// The character at an index ≥ 2; `None` for the reserved indices and
    /// anything out of range.
    pub fn char_of(&self, id: usize) -> Option<char> {
        if id < 2 {
            None
        } else {
            self.chars.get(id - 2).copied()
        }
    }

    /// The real characters in id order (index 2 onward).
    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// Reads a SentiMix-format file: blocks separated by blank lines, each block
/// a `meta <uid> <label>` line (label absent in unlabeled files) followed by
/// `token<TAB>langtag` lines.
pub fn load_sentimix(path: &Path) -> Result<Vec<RawTweet>> {
    let content = fs::read_to_string(path).map_err(|e| {
        Error::InvalidArgument(format!("cannot read `{}`: {}", path.display(), e))
    })?;
    parse_sentimix(&content)
}

/// Parses SentiMix-format text. Errors carry the 1-based line number of the
/// offending line.
pub fn parse_sentimix(input: &str) -> Result<Vec<RawTweet>> {
    let mut tweets = Vec::new();
    let mut current: Option<(usize, RawTweet)> = None;

    let finish = |current: &mut Option<(usize, RawTweet)>, tweets: &mut Vec<RawTweet>| -> Result<()> {
        if let Some((start_line, tweet)) = current.take() {
            if tweet.tokens.is_empty() {
                return Err(Error::parse(
                    start_line,
                    format!("tweet block `{}` has no token lines", tweet.uid),
                ));
            }
            tweets.push(tweet);
        }
        Ok(())
    };

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            finish(&mut current, &mut tweets)?;
            continue;
        }
        match current {
            None => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                let tweet = match fields.as_slice() {
                    ["meta", uid] => RawTweet {
                        uid: uid.to_string(),
                        tokens: Vec::new(),
                        label: None,
                    },
                    ["meta", uid, label] => {
                        let label = Sentiment::parse(label).ok_or_else(|| {
                            Error::parse(line_no, format!("unknown label `{label}`"))
                        })?;
                        RawTweet {
                            uid: uid.to_string(),
                            tokens: Vec::new(),
                            label: Some(label),
                        }
                    }
                    _ => {
                        return Err(Error::parse(
                            line_no,
                            format!("malformed meta line `{line}` (expected `meta <uid> [<label>]`)"),
                        ))
                    }
                };
                current = Some((line_no, tweet));
            }
            Some((_, ref mut tweet)) => {
                let (token, tag) = line.split_once('\t').ok_or_else(|| {
                    Error::parse(line_no, "expected `token<TAB>langtag`".to_string())
                })?;
                tweet.tokens.push((token.to_string(), tag.to_string()));
            }
        }
    }
    finish(&mut current, &mut tweets)?;
    Ok(tweets)
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"https?://\S+|www\.\S+").expect("static regex"))
}

/// True for the codepoints this crate strips as emoji; see the module docs
/// for the exact ranges.
fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    cp >= 0x1F000
        || (0x2600..=0x27BF).contains(&cp)
        || (0xFE00..=0xFE0F).contains(&cp)
        || cp == 0x200D
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// Normalizes a tweet: lower-cases, strips URLs, punctuation, and emoji,
/// collapses whitespace runs to single spaces, and trims the ends. Total and
/// idempotent — normalizing twice equals normalizing once.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let without_urls = url_regex().replace_all(&lowered, "");
    let filtered: String = without_urls
        .chars()
        .filter(|&c| !is_punctuation(c) && !is_emoji(c))
        .collect();
    filtered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Builds the character vocabulary of a normalized corpus: every distinct
/// character, indexed from 2 in first-occurrence order.
pub fn build_vocab<S: AsRef<str>>(texts: &[S]) -> Result<CharVocabulary> {
    if texts.is_empty() {
        return Err(Error::InvalidArgument(
            "build_vocab: empty corpus".to_string(),
        ));
    }
    let mut vocab = CharVocabulary {
        char_to_id: HashMap::new(),
        chars: Vec::new(),
    };
    for text in texts {
        for c in text.as_ref().chars() {
            vocab.insert(c);
        }
    }
    Ok(vocab)
}

/// Encodes a normalized text as exactly `max_len` indices: per-character
/// lookup with unknown characters mapped to [`UNK_ID`], truncated at
/// `max_len`, padded with [`PAD_ID`].
pub fn encode(text: &str, vocab: &CharVocabulary, max_len: usize) -> Result<Vec<usize>> {
    if max_len == 0 {
        return Err(Error::InvalidArgument(
            "encode: max_len must be positive".to_string(),
        ));
    }
    let mut ids: Vec<usize> = text
        .chars()
        .take(max_len)
        .map(|c| vocab.id_of(c).unwrap_or(UNK_ID))
        .collect();
    ids.resize(max_len, PAD_ID);
    Ok(ids)
}

/// Normalizes and encodes raw tweets against a fixed vocabulary.
pub fn examples_from_tweets(
    tweets: &[RawTweet],
    vocab: &CharVocabulary,
    max_len: usize,
) -> Result<Vec<Example>> {
    tweets
        .iter()
        .map(|tweet| {
            let text = normalize(&tweet.joined_text());
            let char_ids = encode(&text, vocab, max_len)?;
            Ok(Example {
                uid: tweet.uid.clone(),
                text,
                char_ids,
                label_id: tweet.label.map(Sentiment::label_id),
            })
        })
        .collect()
}
