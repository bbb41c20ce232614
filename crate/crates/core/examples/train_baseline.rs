//! Binary-relevance Gaussian naive Bayes on TF-IDF features, evaluated on a
//! held-out split without any refinement.
//!
//! cargo run --example train_baseline -- [seed]

use vulntype::classifier::{predict, train_br};
use vulntype::corpus::{split_dataset, Dataset, SplitSpec};
use vulntype::features::{build_ngrams, chi2_select, fit_tfidf, transform, NgramBag};
use vulntype::metrics::{evaluate, EmptyUnion};
use vulntype::pipeline::token_texts;
use vulntype::synthetic::{generate, SyntheticSpec};

fn bags(d: &Dataset) -> vulntype::Result<Vec<NgramBag>> {
    d.functions
        .iter()
        .map(|f| token_texts(&f.source).map(|t| build_ngrams(&t)))
        .collect()
}

fn main() -> vulntype::Result<()> {
    let seed = std::env::args().nth(1).map_or(7, |s| s.parse().expect("seed"));
    let corpus = generate(&SyntheticSpec { seed, ..SyntheticSpec::default() })?;
    let splits = split_dataset(&corpus.dataset, &SplitSpec::new([0.8, 0.1, 0.1], seed)?)?;

    let train_bags = bags(&splits.train)?;
    let vocab = fit_tfidf(&train_bags)?;
    let train_vecs: Vec<_> = train_bags.iter().map(|b| transform(b, &vocab)).collect();
    let train_y = splits.train.label_vectors()?;
    let selection = chi2_select(&train_vecs, &train_y, 0.05)?;
    let x: Vec<Vec<f64>> = train_vecs.iter().map(|v| selection.project(v)).collect();
    let model = train_br(&x, &train_y, &splits.train.vocabulary)?;
    println!(
        "trained on {} functions, {} of {} terms kept",
        splits.train.len(),
        selection.kept.len(),
        vocab.len()
    );

    let mut z = Vec::new();
    for bag in bags(&splits.test)? {
        z.push(predict(&model, &selection.project(&transform(&bag, &vocab)))?.bits);
    }
    let y = splits.test.label_vectors()?;
    let report = evaluate(&y, &z, &splits.test.vocabulary, EmptyUnion::One)?;
    print!("{}", report.to_text());
    Ok(())
}
