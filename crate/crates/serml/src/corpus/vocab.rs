//! Vocabulary construction and review tokenization.
//!
//! Reviews are segmented into sentences on terminal punctuation, lowercased,
//! and split into alphanumeric word tokens. The vocabulary is built from the
//! train split only; everything else maps to `UNK_ID`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SermlError};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token <-> id map with the document caps used at tokenization time.
#[derive(Clone, Debug, Serialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    pub max_sentences: usize,
    pub max_words: usize,
}

// The reverse index is rebuilt on deserialization.
impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            tokens: Vec<String>,
            max_sentences: usize,
            max_words: usize,
        }
        let raw = Raw::deserialize(deserializer)?;
        let index = raw
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            tokens: raw.tokens,
            index,
            max_sentences: raw.max_sentences,
            max_words: raw.max_words,
        })
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.max_sentences == other.max_sentences
            && self.max_words == other.max_words
    }
}

impl Vocabulary {
    /// Build from an explicit token list (tests and probes).
    pub fn from_tokens<I: IntoIterator<Item = S>, S: Into<String>>(
        tokens: I,
        max_sentences: usize,
        max_words: usize,
    ) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens.into_iter().map(Into::into));
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens: all,
            index,
            max_sentences,
            max_words,
        }
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Count tokens over train reviews and keep those with frequency at least
/// `min_freq`. Ids are assigned by descending count, ties by token, so the
/// result is independent of input order.
pub fn build_vocabulary<'a, I: IntoIterator<Item = &'a str>>(
    train_reviews: I,
    min_freq: usize,
    max_sentences: usize,
    max_words: usize,
) -> Vocabulary {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for review in train_reviews {
        for sentence in segment(review) {
            for word in sentence {
                *counts.entry(word).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_freq)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t), max_sentences, max_words)
}

/// Lowercased word tokens per sentence. Sentences end on `.`, `!` or `?`;
/// words are maximal alphanumeric runs.
pub fn segment(review: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut words = Vec::new();
    let mut current = String::new();

    let flush_word = |current: &mut String, words: &mut Vec<String>| {
        if !current.is_empty() {
            words.push(std::mem::take(current));
        }
    };

    for ch in review.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            flush_word(&mut current, &mut words);
            if matches!(ch, '.' | '!' | '?') && !words.is_empty() {
                sentences.push(std::mem::take(&mut words));
            }
        }
    }
    flush_word(&mut current, &mut words);
    if !words.is_empty() {
        sentences.push(words);
    }
    sentences
}

/// A review as sentence rows of token ids. Rows may carry trailing `PAD_ID`
/// entries; `sentence_lengths` gives the effective prefix of each row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub sentences: Vec<Vec<u32>>,
    pub sentence_lengths: Vec<usize>,
    pub num_sentences: usize,
}

impl TokenizedDoc {
    pub fn empty() -> Self {
        TokenizedDoc {
            sentences: Vec::new(),
            sentence_lengths: Vec::new(),
            num_sentences: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.num_sentences == 0
    }

    /// Check the structural invariants: length bookkeeping consistent and
    /// padding confined to row tails.
    pub fn validate(&self, max_sentences: usize, max_words: usize) -> Result<()> {
        if self.sentences.len() != self.sentence_lengths.len() {
            return Err(SermlError::Data("sentence/length arity mismatch".into()));
        }
        if self.num_sentences > max_sentences {
            return Err(SermlError::Data("sentence cap exceeded".into()));
        }
        let non_empty = self.sentence_lengths.iter().filter(|l| **l > 0).count();
        if non_empty != self.num_sentences {
            return Err(SermlError::Data("num_sentences inconsistent".into()));
        }
        for (row, len) in self.sentences.iter().zip(&self.sentence_lengths) {
            if *len > row.len() || *len > max_words {
                return Err(SermlError::Data("word cap exceeded".into()));
            }
            if row[..*len].contains(&PAD_ID) {
                return Err(SermlError::Data("pad inside effective prefix".into()));
            }
            if row[*len..].iter().any(|t| *t != PAD_ID) {
                return Err(SermlError::Data("non-pad token after tail".into()));
            }
        }
        Ok(())
    }
}

/// Tokenize a review against a vocabulary, truncating to the vocabulary's
/// sentence and word caps. An empty review yields a doc with zero sentences.
pub fn tokenize(review: &str, vocab: &Vocabulary) -> TokenizedDoc {
    let mut sentences = Vec::new();
    let mut lengths = Vec::new();
    for words in segment(review) {
        if sentences.len() == vocab.max_sentences {
            break;
        }
        let ids: Vec<u32> = words
            .iter()
            .take(vocab.max_words)
            .map(|w| vocab.id(w))
            .collect();
        if ids.is_empty() {
            continue;
        }
        lengths.push(ids.len());
        sentences.push(ids);
    }
    let num_sentences = sentences.len();
    TokenizedDoc {
        sentences,
        sentence_lengths: lengths,
        num_sentences,
    }
}
