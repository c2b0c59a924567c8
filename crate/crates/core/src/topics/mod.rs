//! LDA topic controls: corpus filtering, collapsed Gibbs fitting, fold-in
//! inference, document-completion perplexity and perplexity-based choice of
//! the topic count.

mod lda;

use std::collections::{BTreeSet, HashMap};

pub use lda::{doc_topics, fit_lda, perplexity, select_k, LdaConfig, SelectionResult, TopicModel};

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::scorer::{Document, ModifierDictionaries};

/// Default minimum share of documents a token must appear in.
pub const DEFAULT_MIN_DOC_FREQ: f64 = 0.001;

/// Document tokens without negation and degree words, which carry no topic.
pub fn content_tokens<'a>(docs: &'a [Document], modifiers: &ModifierDictionaries) -> Vec<Vec<&'a str>> {
    docs.iter()
        .map(|d| {
            d.tokens
                .iter()
                .map(String::as_str)
                .filter(|t| !modifiers.is_negation(t) && modifiers.degree(t).is_none())
                .collect()
        })
        .collect()
}

/// Bag-of-words corpus over a filtered vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocabulary: Vec<String>,
    index: HashMap<String, u32>,
    /// Token ids per document, in original order.
    pub documents: Vec<Vec<u32>>,
    /// Number of documents containing each vocabulary word.
    pub doc_freq: Vec<usize>,
    /// Documents left empty by filtering.
    pub empty_documents: Vec<usize>,
}

impl Corpus {
    /// Builds a corpus over an explicit vocabulary; out-of-vocabulary tokens
    /// are dropped.
    pub fn with_vocabulary<S: AsRef<str>>(vocabulary: Vec<String>, docs: &[Vec<S>]) -> Self {
        let index: HashMap<String, u32> = vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let documents: Vec<Vec<u32>> = docs
            .iter()
            .map(|d| d.iter().filter_map(|t| index.get(t.as_ref()).copied()).collect())
            .collect();
        let mut doc_freq = vec![0; vocabulary.len()];
        for d in &documents {
            for w in d.iter().collect::<BTreeSet<_>>() {
                doc_freq[*w as usize] += 1;
            }
        }
        let empty_documents = documents.iter().enumerate().filter(|(_, d)| d.is_empty()).map(|(i, _)| i).collect();
        Self {
            vocabulary,
            index,
            documents,
            doc_freq,
            empty_documents,
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn word_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    /// A corpus holding only the given documents, sharing this vocabulary.
    pub fn subset(&self, docs: &[usize]) -> Corpus {
        let documents: Vec<Vec<u32>> = docs.iter().map(|&i| self.documents[i].clone()).collect();
        let mut doc_freq = vec![0; self.vocabulary.len()];
        for d in &documents {
            for w in d.iter().collect::<BTreeSet<_>>() {
                doc_freq[*w as usize] += 1;
            }
        }
        let empty_documents = documents.iter().enumerate().filter(|(_, d)| d.is_empty()).map(|(i, _)| i).collect();
        Corpus {
            vocabulary: self.vocabulary.clone(),
            index: self.index.clone(),
            documents,
            doc_freq,
            empty_documents,
        }
    }
}

/// Removes lexicon (emotion) words and tokens found in fewer than
/// `min_doc_freq` of the documents. Emptied documents are kept and flagged.
pub fn preprocess<S: AsRef<str>>(docs: &[Vec<S>], lexicon: Option<&Lexicon>, min_doc_freq: f64) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&min_doc_freq) {
        return Err(Error::invalid("min_doc_freq must be in [0, 1]"));
    }
    let is_emotion = |t: &str| lexicon.is_some_and(|l| l.contains(t));
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        let uniq: BTreeSet<&str> = d.iter().map(AsRef::as_ref).filter(|t| !is_emotion(t)).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    let vocabulary: Vec<String> = df
        .into_iter()
        .filter(|(_, c)| *c as f64 / n >= min_doc_freq)
        .map(|(t, _)| t.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::invalid("vocabulary is empty after filtering"));
    }
    let corpus = Corpus::with_vocabulary(vocabulary, docs);
    if !corpus.empty_documents.is_empty() {
        log::info!("{} documents are empty after filtering", corpus.empty_documents.len());
    }
    Ok(corpus)
}
