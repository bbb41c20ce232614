//! Bag-of-n-grams TF-IDF features with chi-square feature selection.

mod chi2;
mod ngram;
mod tfidf;

pub use chi2::{chi2_select, chi2_survival, Chi2Selection, TermScore};
pub use ngram::{build_ngrams, NgramBag};
pub use tfidf::{fit_tfidf, transform, FeatureVector, TfIdfVocabulary};
