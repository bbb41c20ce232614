//! Multi-label metrics on a small hand-written prediction matrix.
//!
//! cargo run --example evaluate_metrics

use vulntype::corpus::{LabelVector, TypeVocabulary};
use vulntype::metrics::{confusion, evaluate, EmptyUnion};

fn rows(m: &[[u8; 3]]) -> Vec<LabelVector> {
    m.iter().map(|r| LabelVector(r.to_vec())).collect()
}

fn main() -> vulntype::Result<()> {
    let types = TypeVocabulary::new(["CWE-119", "CWE-20", "CWE-399"])?;
    let y = rows(&[[1, 0, 0], [1, 1, 0], [0, 0, 1], [0, 0, 0], [0, 1, 0]]);
    let z = rows(&[[1, 0, 0], [1, 0, 0], [0, 1, 1], [0, 0, 0], [1, 1, 0]]);

    let report = evaluate(&y, &z, &types, EmptyUnion::One)?;
    print!("{}", report.to_text());

    for (name, c) in types.names().iter().zip(confusion(&y, &z)?) {
        println!("{name:<8} tp {} fp {} fn {} tn {}", c.tp, c.fp, c.fn_, c.tn);
    }
    let strict = evaluate(&y, &z, &types, EmptyUnion::Zero)?;
    println!(
        "\nhamming with empty rows scored 1: {:.4}, scored 0: {:.4}",
        report.hamming, strict.hamming
    );
    Ok(())
}
