use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vulntype::config::RunConfig;
use vulntype::distinguish::TokenChannel;
use vulntype::metrics::EmptyUnion;
use vulntype::pipeline::{self, PredictOptions};

#[derive(Parser)]
#[command(name = "vulntype", version, about = "Vulnerability type identification for C/C++ functions")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// key=value config file; flags below take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, num_args = 3, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long, global = true)]
    p_threshold: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    min_support: Option<usize>,
    #[arg(long, global = true)]
    group_below: Option<usize>,
    #[arg(long, global = true, value_enum)]
    channel: Option<Channel>,
    #[arg(long, global = true, value_enum)]
    hamming_empty: Option<Empty>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Channel {
    Raw,
    WithSubtokens,
}

#[derive(Clone, Copy, ValueEnum)]
enum Empty {
    One,
    Zero,
}

#[derive(Subcommand)]
enum Command {
    /// Shuffle the dataset into train/validation/test files
    Split,
    /// Fit TF-IDF, chi-square selection and the per-type classifiers
    Train,
    /// Mine distinguishing tokens from the training split
    Mine {
        /// Pick theta from these values by refined macro-F1 on the validation split
        #[arg(long, value_delimiter = ',')]
        tune_theta: Option<Vec<f64>>,
    },
    /// Predict types for the test split
    Predict {
        /// Refine predictions with the mined token table
        #[arg(long)]
        refine: bool,
        /// Refine this JSONL prediction file instead of the trained model's output
        #[arg(long, requires = "refine")]
        external: Option<PathBuf>,
        /// Functions to predict (defaults to the test split)
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score a predictions file against labeled functions
    Eval {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Print the syntactic element buckets of a C/C++ source file
    Elements {
        file: PathBuf,
        #[arg(long)]
        subtokens: bool,
    },
}

fn resolve(o: &Overrides) -> vulntype::Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &o.workdir {
        cfg.workdir = v.clone();
    }
    if let Some(v) = &o.dataset {
        cfg.dataset = Some(v.clone());
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = &o.ratios {
        cfg.ratios = [v[0], v[1], v[2]];
    }
    if let Some(v) = o.p_threshold {
        cfg.p_threshold = v;
    }
    if let Some(v) = o.theta {
        cfg.theta = v;
    }
    if let Some(v) = o.min_support {
        cfg.min_support = v;
    }
    if let Some(v) = o.group_below {
        cfg.group_below = Some(v);
    }
    if let Some(v) = o.channel {
        cfg.channel = match v {
            Channel::Raw => TokenChannel::Raw,
            Channel::WithSubtokens => TokenChannel::WithSubtokens,
        };
    }
    if let Some(v) = o.hamming_empty {
        cfg.hamming_empty = match v {
            Empty::One => EmptyUnion::One,
            Empty::Zero => EmptyUnion::Zero,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> vulntype::Result<()> {
    if let Command::Elements { file, subtokens } = &cli.command {
        println!("{}", pipeline::cmd_elements(file, *subtokens)?);
        return Ok(());
    }
    let cfg = resolve(&cli.overrides)?;
    match cli.command {
        Command::Split => {
            let m = pipeline::cmd_split(&cfg)?;
            println!(
                "train {}  validation {}  test {}  types {}",
                m.train.len(),
                m.validation.len(),
                m.test.len(),
                m.types.len()
            );
        }
        Command::Train => {
            let model = pipeline::cmd_train(&cfg)?;
            println!(
                "model over {} types and {} features written to {}",
                model.types.len(),
                model.n_features,
                cfg.path(pipeline::MODEL).display()
            );
        }
        Command::Mine { tune_theta } => {
            let table = match tune_theta {
                Some(grid) => {
                    let (table, search) = pipeline::cmd_mine_tuned(&cfg, &grid)?;
                    println!("theta {} chosen on the validation split", search.chosen);
                    table
                }
                None => pipeline::cmd_mine(&cfg)?,
            };
            let (pos, neg) = table.sizes();
            println!("{pos} positive and {neg} negative tokens written to {}", cfg.path(pipeline::TABLE).display());
        }
        Command::Predict {
            refine,
            external,
            input,
        } => {
            let out = pipeline::cmd_predict(&cfg, &PredictOptions { refine, external, input })?;
            match out.audit {
                Some(a) => println!(
                    "{} functions refined, {} predictions changed{}",
                    a.cases,
                    a.affected,
                    a.accuracy_rate
                        .map(|r| format!(", accuracy rate {r:.4}"))
                        .unwrap_or_default()
                ),
                None => println!("{} functions predicted", out.base.len()),
            }
        }
        Command::Eval { predictions, truth } => {
            let predictions = predictions.unwrap_or_else(|| cfg.path(pipeline::PREDICTIONS));
            let truth = truth.unwrap_or_else(|| cfg.path(pipeline::TEST));
            print!("{}", pipeline::cmd_eval(&cfg, &predictions, &truth)?.to_text());
        }
        Command::Elements { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
