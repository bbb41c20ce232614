//! Token n-gram TF-IDF over a generated corpus, then chi-square selection
//! against the multi-label targets.
//!
//! cargo run --example tfidf_chi2 -- [p_threshold]

use vulntype::features::{build_ngrams, chi2_select, fit_tfidf, transform};
use vulntype::pipeline::token_texts;
use vulntype::synthetic::{generate, SyntheticSpec};

fn main() -> vulntype::Result<()> {
    let p_threshold = std::env::args().nth(1).map_or(0.05, |s| s.parse().expect("p_threshold"));
    let corpus = generate(&SyntheticSpec { functions: 300, ..SyntheticSpec::default() })?;
    let data = &corpus.dataset;

    let bags = data
        .functions
        .iter()
        .map(|f| token_texts(&f.source).map(|t| build_ngrams(&t)))
        .collect::<vulntype::Result<Vec<_>>>()?;
    let vocab = fit_tfidf(&bags)?;
    let vectors: Vec<_> = bags.iter().map(|b| transform(b, &vocab)).collect();
    let selection = chi2_select(&vectors, &data.label_vectors()?, p_threshold)?;

    println!(
        "{} documents, {} terms, {} kept at p < {p_threshold}",
        vocab.doc_count(),
        vocab.len(),
        selection.kept.len()
    );
    let mut ranked: Vec<usize> = selection.kept.clone();
    ranked.sort_by(|&a, &b| selection.scores[b].chi2.total_cmp(&selection.scores[a].chi2));
    println!("\n{:<24} {:>10} {:>12} {:>8}  label", "term", "chi2", "p", "idf");
    for &i in ranked.iter().take(15) {
        let s = selection.scores[i];
        println!(
            "{:<24} {:>10.4} {:>12.3e} {:>8.3}  {}",
            vocab.terms()[i],
            s.chi2,
            s.p_value,
            vocab.idf()[i],
            s.label.map_or("-".into(), |l| data.vocabulary.names()[l].clone())
        );
    }
    Ok(())
}
