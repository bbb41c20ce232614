//! Mine distinguishing tokens per (type, element kind) from a generated
//! corpus and print the strongest ones.
//!
//! cargo run --example mine_tokens -- [theta] [min_support]

use vulntype::distinguish::{mine, MiningParams};
use vulntype::syntax::elements_of;
use vulntype::synthetic::{generate, SyntheticSpec};

fn main() -> vulntype::Result<()> {
    let mut args = std::env::args().skip(1);
    let theta = args.next().map_or(3.0, |s| s.parse().expect("theta"));
    let min_support = args.next().map_or(3, |s| s.parse().expect("min_support"));

    let corpus = generate(&SyntheticSpec::default())?;
    let elements = corpus
        .dataset
        .functions
        .iter()
        .map(|f| elements_of(&f.source))
        .collect::<vulntype::Result<Vec<_>>>()?;
    let params = MiningParams { theta, min_support, ..MiningParams::default() };
    let table = mine(&corpus.dataset, &elements, params)?;

    let (pos, neg) = table.sizes();
    println!("theta {theta}, min_support {min_support}: {pos} positive, {neg} negative entries");
    println!("planted markers: {:?}\n", corpus.markers);
    for (label, side) in [("dis+", &table.positive), ("dis-", &table.negative)] {
        for ((t, kind), tokens) in side {
            let mut top: Vec<_> = tokens.iter().collect();
            top.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
            let shown: Vec<String> = top.iter().take(5).map(|(k, v)| format!("{k}={v:.2}")).collect();
            println!("{label} {:<8} {:<10} {}", table.types.names()[*t], kind.as_str(), shown.join(" "));
        }
    }
    Ok(())
}
