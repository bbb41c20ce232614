//! Full pipeline on a generated long-tailed corpus: split, train, mine with
//! theta picked on the validation split, predict with refinement, and compare
//! base against refined metrics.
//!
//! cargo run --example end_to_end_synthetic -- [seed] [theta]

use vulntype::config::RunConfig;
use vulntype::corpus::{save_dataset, Format};
use vulntype::pipeline::{self, PredictOptions};
use vulntype::synthetic::{generate, SyntheticSpec};

const THETA_GRID: [f64; 6] = [1.0, 1.5, 2.0, 3.0, 5.0, 8.0];

fn main() -> vulntype::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(7, |s| s.parse().expect("seed"));
    let theta: Option<f64> = args.next().map(|s| s.parse().expect("theta"));

    let dir = std::env::temp_dir().join(format!("vulntype-e2e-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let corpus = generate(&SyntheticSpec {
        seed,
        type_weights: vec![8.0, 4.0, 2.0, 1.0],
        ..SyntheticSpec::default()
    })?;
    let data = dir.join("corpus.jsonl");
    save_dataset(&corpus.dataset, &data, Format::Jsonl)?;

    let cfg = RunConfig {
        seed,
        theta: theta.unwrap_or(1.0),
        min_support: 3,
        dataset: Some(data),
        workdir: dir.join("run"),
        ..RunConfig::default()
    };
    pipeline::cmd_split(&cfg)?;
    pipeline::cmd_train(&cfg)?;
    let table = match theta {
        Some(_) => pipeline::cmd_mine(&cfg)?,
        None => {
            let (table, search) = pipeline::cmd_mine_tuned(&cfg, &THETA_GRID)?;
            for t in &search.trials {
                println!("validation theta {:<4} macro-F1 {:.4}  flips {}", t.theta, t.macro_f1, t.affected);
            }
            println!("chosen theta {}\n", search.chosen);
            table
        }
    };
    let out = pipeline::cmd_predict(&cfg, &PredictOptions { refine: true, ..Default::default() })?;
    let test = cfg.path(pipeline::TEST);
    let base = pipeline::cmd_eval(&cfg, &cfg.path(pipeline::PREDICTIONS), &test)?;
    let refined = pipeline::cmd_eval(&cfg, &cfg.path(pipeline::REFINED), &test)?;
    let audit = out.audit.expect("refinement ran");

    println!("table sizes (positive, negative): {:?}", table.sizes());
    println!("{:<12} {:>8} {:>8}", "", "base", "refined");
    println!("{:<12} {:>8.4} {:>8.4}", "macro-F1", base.macro_.f1, refined.macro_.f1);
    println!("{:<12} {:>8.4} {:>8.4}", "exact match", base.exact_match, refined.exact_match);
    println!("{:<12} {:>8.4} {:>8.4}", "hamming", base.hamming, refined.hamming);
    println!(
        "affected {}  corrected {}  accuracy rate {}",
        audit.affected,
        audit.corrected.unwrap_or(0),
        audit.accuracy_rate.map_or("undefined".into(), |r| format!("{r:.4}"))
    );
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
