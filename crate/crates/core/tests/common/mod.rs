#![allow(dead_code)]

use std::path::{Path, PathBuf};

use vulntype::config::RunConfig;
use vulntype::corpus::{save_dataset, Format};
use vulntype::metrics::MetricsReport;
use vulntype::pipeline::{self, PredictOptions, ThetaSearch};
use vulntype::refine::RefinementAudit;
use vulntype::synthetic::{generate, SyntheticSpec};

/// Corpus and mining protocol for the end-to-end synthetic runs.
pub const TYPE_WEIGHTS: [f64; 4] = [8.0, 4.0, 2.0, 1.0];
pub const MIN_SUPPORT: usize = 3;
pub const THETA_GRID: [f64; 6] = [1.0, 1.5, 2.0, 3.0, 5.0, 8.0];

pub fn synthetic_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        functions: 400,
        types: 4,
        markers_per_type: 2,
        background: 30,
        label_noise: 0.1,
        type_weights: TYPE_WEIGHTS.to_vec(),
        seed,
        ..SyntheticSpec::default()
    }
}

pub struct Run {
    pub cfg: RunConfig,
    pub search: ThetaSearch,
    pub base: MetricsReport,
    pub refined: MetricsReport,
    pub audit: RefinementAudit,
}

/// split, train, mine (theta picked on validation), predict --refine, eval.
pub fn run_synthetic(dir: &Path, seed: u64) -> Run {
    let corpus = generate(&synthetic_spec(seed)).unwrap();
    let data = dir.join("corpus.jsonl");
    save_dataset(&corpus.dataset, &data, Format::Jsonl).unwrap();
    let cfg = RunConfig {
        seed,
        min_support: MIN_SUPPORT,
        dataset: Some(data),
        workdir: dir.join("run"),
        ..RunConfig::default()
    };
    pipeline::cmd_split(&cfg).unwrap();
    pipeline::cmd_train(&cfg).unwrap();
    let (_, search) = pipeline::cmd_mine_tuned(&cfg, &THETA_GRID).unwrap();
    let out = pipeline::cmd_predict(
        &cfg,
        &PredictOptions {
            refine: true,
            ..Default::default()
        },
    )
    .unwrap();
    let test = cfg.path(pipeline::TEST);
    let base = pipeline::cmd_eval(&cfg, &cfg.path(pipeline::PREDICTIONS), &test).unwrap();
    let refined = pipeline::cmd_eval(&cfg, &cfg.path(pipeline::REFINED), &test).unwrap();
    Run {
        cfg,
        search,
        base,
        refined,
        audit: out.audit.unwrap(),
    }
}

pub fn goldens_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/goldens")
}
