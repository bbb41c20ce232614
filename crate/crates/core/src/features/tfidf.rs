use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ngram::NgramBag;
use crate::error::{Error, Result};

/// Fitted term list with smoothed inverse document frequencies,
/// `idf = ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TfIdfWire", into = "TfIdfWire")]
pub struct TfIdfVocabulary {
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TfIdfWire {
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl From<TfIdfWire> for TfIdfVocabulary {
    fn from(w: TfIdfWire) -> Self {
        let index = w
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms: w.terms,
            idf: w.idf,
            doc_count: w.doc_count,
            index,
        }
    }
}

impl From<TfIdfVocabulary> for TfIdfWire {
    fn from(v: TfIdfVocabulary) -> Self {
        Self {
            terms: v.terms,
            idf: v.idf,
            doc_count: v.doc_count,
        }
    }
}

impl TfIdfVocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

pub fn fit_tfidf(corpus: &[NgramBag]) -> Result<TfIdfVocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        for term in doc.keys() {
            *df.entry(term.as_str()).or_default() += 1;
        }
    }
    let n = corpus.len() as f64;
    let (terms, idf): (Vec<String>, Vec<f64>) = df
        .into_iter()
        .map(|(t, d)| (t.to_owned(), ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
        .unzip();
    Ok(TfIdfWire {
        terms,
        idf,
        doc_count: corpus.len(),
    }
    .into())
}

/// Sparse TF-IDF vector, L2-normalized unless all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dim: usize,
    /// `(term index, value)` sorted by index, values non-zero.
    pub entries: Vec<(usize, f64)>,
    pub norm: f64,
}

impl FeatureVector {
    /// Builds and L2-normalizes a vector from raw non-negative entries.
    pub fn normalized(dim: usize, mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        let len = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            return Self {
                dim,
                entries: Vec::new(),
                norm: 0.0,
            };
        }
        for e in &mut entries {
            e.1 /= len;
        }
        Self {
            dim,
            entries,
            norm: 1.0,
        }
    }

    /// Raw entries with no normalization applied.
    pub fn raw(dim: usize, mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        Self { dim, entries, norm }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |k| self.entries[k].1)
    }

    pub fn euclidean_len(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }
}

pub fn transform(doc: &NgramBag, vocab: &TfIdfVocabulary) -> FeatureVector {
    let entries = doc
        .iter()
        .filter_map(|(term, &count)| {
            vocab
                .position(term)
                .map(|i| (i, count as f64 * vocab.idf[i]))
        })
        .collect();
    FeatureVector::normalized(vocab.len(), entries)
}
