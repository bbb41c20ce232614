//! Refine predictions from a model outside this crate. A crude keyword rule
//! stands in for the external model; its output is corrected with tokens
//! mined from the training split.
//!
//! cargo run --example refine_external -- [theta]

use std::collections::HashMap;

use vulntype::classifier::PredictionVector;
use vulntype::corpus::{split_dataset, LabelVector, SplitSpec};
use vulntype::distinguish::{mine, MiningParams};
use vulntype::metrics::{evaluate, EmptyUnion};
use vulntype::pipeline::elements_by_id;
use vulntype::refine::refine_batch;
use vulntype::synthetic::{generate, SyntheticSpec};

fn main() -> vulntype::Result<()> {
    let theta = std::env::args().nth(1).map_or(3.0, |s| s.parse().expect("theta"));
    let corpus = generate(&SyntheticSpec { label_noise: 0.0, ..SyntheticSpec::default() })?;
    let splits = split_dataset(&corpus.dataset, &SplitSpec::new([0.8, 0.1, 0.1], 1)?)?;
    let types = &splits.train.vocabulary;

    let train_elems = elements_by_id(&splits.train)?;
    let aligned: Vec<_> = splits.train.functions.iter().map(|f| train_elems[&f.id].clone()).collect();
    let table = mine(&splits.train, &aligned, MiningParams { theta, min_support: 3, ..MiningParams::default() })?;

    // the rule knows only the first marker of each type
    let external: Vec<(String, PredictionVector)> = splits
        .test
        .functions
        .iter()
        .map(|f| {
            let bits = corpus.markers.iter().map(|m| u8::from(f.source.contains(&m[0]))).collect();
            (f.id.clone(), PredictionVector::from_bits(bits))
        })
        .collect();

    let elements = elements_by_id(&splits.test)?;
    let truth: HashMap<String, LabelVector> = splits
        .test
        .functions
        .iter()
        .zip(splits.test.label_vectors()?)
        .map(|(f, y)| (f.id.clone(), y))
        .collect();
    let (refined, audit) = refine_batch(&external, &elements, &table, Some(&truth))?;

    let y = splits.test.label_vectors()?;
    let bits = |p: &[(String, PredictionVector)]| p.iter().map(|(_, v)| v.bits.clone()).collect::<Vec<_>>();
    let before = evaluate(&y, &bits(&external), types, EmptyUnion::One)?;
    let after = evaluate(&y, &bits(&refined), types, EmptyUnion::One)?;
    println!("macro-F1 {:.4} -> {:.4}", before.macro_.f1, after.macro_.f1);
    println!("exact match {:.4} -> {:.4}", before.exact_match, after.exact_match);
    println!(
        "{} flips, {} agree with the ground truth",
        audit.affected,
        audit.corrected.unwrap_or(0)
    );
    for f in audit.flips.iter().take(8) {
        println!("  {} {} {:?} via {} in {}", f.id, f.type_name, f.direction, f.token, f.element.as_str());
    }
    Ok(())
}
