//! The six commands as library calls. Every command reads and writes files
//! in the run's work directory; each artifact records the content hashes of
//! the artifacts it was derived from.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifact::{content_hash, file_hash, read_json, write_json};
use crate::classifier::{predict, train_br, BrModel, PredictionRow, PredictionVector};
use crate::config::RunConfig;
use crate::corpus::{
    group_rare_types, load_dataset, save_dataset, split_dataset, Dataset, Format, LabelVector,
    SplitManifest, TypeVocabulary,
};
use crate::distinguish::{mine, DistinguishingTokenTable};
use crate::error::{Error, Result};
use crate::features::{build_ngrams, chi2_select, fit_tfidf, transform, Chi2Selection, TfIdfVocabulary};
use crate::metrics::{evaluate, MetricsReport};
use crate::refine::{load_external_predictions, refine_batch, RefinementAudit};
use crate::syntax::{elements_of, lex, SyntacticElements};

pub const TRAIN: &str = "train.jsonl";
pub const VALIDATION: &str = "validation.jsonl";
pub const TEST: &str = "test.jsonl";
pub const SPLIT_MANIFEST: &str = "split-manifest.json";
pub const TFIDF: &str = "tfidf.json";
pub const SELECTION: &str = "selection.json";
pub const MODEL: &str = "model.json";
pub const TRAIN_MANIFEST: &str = "train-manifest.json";
pub const TABLE: &str = "table.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const REFINED: &str = "refined.jsonl";
pub const AUDIT: &str = "audit.json";

type Upstream = BTreeMap<String, String>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitRecord {
    #[serde(flatten)]
    pub manifest: SplitManifest,
    pub upstream: Upstream,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfIdfFile {
    pub upstream: Upstream,
    pub vocabulary: TfIdfVocabulary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionFile {
    pub upstream: Upstream,
    pub p_threshold: f64,
    pub kept: Vec<usize>,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainManifest {
    pub wall_time_secs: f64,
    pub functions: usize,
    pub terms: usize,
    pub kept: usize,
    pub warnings: Vec<String>,
    pub artifacts: Upstream,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditFile {
    pub upstream: Upstream,
    #[serde(flatten)]
    pub audit: RefinementAudit,
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("missing input file {}", path.display())))
    }
}

fn upstream<const N: usize>(entries: [(&str, &String); N]) -> Upstream {
    entries
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v.clone()))
        .collect()
}

fn expect_link(artifact: &str, up: &Upstream, key: &str, actual: &str) -> Result<()> {
    match up.get(key) {
        Some(h) if h == actual => Ok(()),
        Some(h) => Err(Error::ChainMismatch(format!(
            "{artifact} was built from {key} {h}, found {actual}"
        ))),
        None => Err(Error::ChainMismatch(format!(
            "{artifact} does not record its {key} upstream"
        ))),
    }
}

/// Full token stream of a function, operators included.
pub fn token_texts(source: &str) -> Result<Vec<String>> {
    Ok(lex(source)?.into_iter().map(|t| t.text).collect())
}

pub fn elements_by_id(d: &Dataset) -> Result<HashMap<String, SyntacticElements>> {
    d.functions
        .iter()
        .map(|f| Ok((f.id.clone(), elements_of(&f.source)?)))
        .collect()
}

fn truth_by_id(d: &Dataset) -> Result<HashMap<String, LabelVector>> {
    let labels = d.label_vectors()?;
    Ok(d.functions.iter().map(|f| f.id.clone()).zip(labels).collect())
}

fn features(d: &Dataset, vocab: &TfIdfVocabulary, kept: &Chi2Selection) -> Result<Vec<Vec<f64>>> {
    d.functions
        .iter()
        .map(|f| {
            let bag = build_ngrams(&token_texts(&f.source)?);
            Ok(kept.project(&transform(&bag, vocab)))
        })
        .collect()
}

/// Vocabulary fixed at split time, if a split manifest exists.
fn split_types(cfg: &RunConfig) -> Result<Option<TypeVocabulary>> {
    let p = cfg.path(SPLIT_MANIFEST);
    if !p.is_file() {
        return Ok(None);
    }
    let rec: SplitRecord = read_json(&p)?;
    Ok(Some(rec.manifest.types))
}

fn load_split(cfg: &RunConfig, name: &str) -> Result<(Dataset, String)> {
    let path = cfg.path(name);
    load_input(cfg, &path)
}

fn load_input(cfg: &RunConfig, path: &Path) -> Result<(Dataset, String)> {
    require(path)?;
    let types = split_types(cfg)?;
    let d = load_dataset(path, Format::from_path(path), types.as_ref())?;
    Ok((d, file_hash(path)?))
}

pub fn cmd_split(cfg: &RunConfig) -> Result<SplitManifest> {
    let dataset = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| Error::Config("no dataset configured".into()))?;
    require(dataset)?;
    let spec = cfg.split_spec()?;
    let d = load_dataset(dataset, Format::from_path(dataset), None)?;
    let mut splits = split_dataset(&d, &spec)?;
    if let Some(k) = cfg.group_below {
        splits = group_rare_types(splits, k)?;
    }
    fs::create_dir_all(&cfg.workdir).map_err(|e| Error::io(&cfg.workdir, e))?;
    let mut up = upstream([("dataset", &file_hash(dataset)?)]);
    for (name, part) in [(TRAIN, &splits.train), (VALIDATION, &splits.validation), (TEST, &splits.test)] {
        let p = cfg.path(name);
        save_dataset(part, &p, Format::Jsonl)?;
        up.insert(name.trim_end_matches(".jsonl").to_owned(), file_hash(&p)?);
    }
    let manifest = SplitManifest::new(&spec, cfg.group_below, &splits);
    write_json(
        &cfg.path(SPLIT_MANIFEST),
        &SplitRecord {
            manifest: manifest.clone(),
            upstream: up,
        },
    )?;
    log::info!(
        "split {} functions into {}/{}/{}",
        d.len(),
        manifest.train.len(),
        manifest.validation.len(),
        manifest.test.len()
    );
    Ok(manifest)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<BrModel> {
    cfg.validate()?;
    let started = Instant::now();
    let (train, train_hash) = load_split(cfg, TRAIN)?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let bags = train
        .functions
        .iter()
        .map(|f| Ok(build_ngrams(&token_texts(&f.source)?)))
        .collect::<Result<Vec<_>>>()?;
    let vocab = fit_tfidf(&bags)?;
    let vectors: Vec<_> = bags.iter().map(|b| transform(b, &vocab)).collect();
    let labels = train.label_vectors()?;
    let selection = chi2_select(&vectors, &labels, cfg.p_threshold)?;
    let x: Vec<Vec<f64>> = vectors.iter().map(|v| selection.project(v)).collect();
    let mut model = train_br(&x, &labels, &train.vocabulary)?;

    let tfidf_hash = write_json(
        &cfg.path(TFIDF),
        &TfIdfFile {
            upstream: upstream([("train", &train_hash)]),
            vocabulary: vocab.clone(),
        },
    )?;
    let selection_hash = write_json(
        &cfg.path(SELECTION),
        &SelectionFile {
            upstream: upstream([("tfidf", &tfidf_hash)]),
            p_threshold: selection.p_threshold,
            kept: selection.kept.clone(),
            terms: selection.kept.iter().map(|&i| vocab.terms()[i].clone()).collect(),
        },
    )?;
    model.upstream = upstream([("selection", &selection_hash), ("train", &train_hash)]);
    let model_hash = write_json(&cfg.path(MODEL), &model)?;

    let mut warnings = selection.warnings.clone();
    warnings.extend(model.warnings.iter().cloned());
    write_json(
        &cfg.path(TRAIN_MANIFEST),
        &TrainManifest {
            wall_time_secs: started.elapsed().as_secs_f64(),
            functions: train.len(),
            terms: vocab.len(),
            kept: selection.kept.len(),
            warnings,
            artifacts: upstream([
                ("model", &model_hash),
                ("selection", &selection_hash),
                ("tfidf", &tfidf_hash),
                ("train", &train_hash),
            ]),
        },
    )?;
    log::info!(
        "trained on {} functions: {} terms, {} kept",
        train.len(),
        vocab.len(),
        selection.kept.len()
    );
    Ok(model)
}

pub fn cmd_mine(cfg: &RunConfig) -> Result<DistinguishingTokenTable> {
    cfg.validate()?;
    let (train, train_hash) = load_split(cfg, TRAIN)?;
    let elements = train
        .functions
        .iter()
        .map(|f| elements_of(&f.source))
        .collect::<Result<Vec<_>>>()?;
    let mut table = mine(&train, &elements, cfg.mining())?;
    table.upstream = upstream([("train", &train_hash)]);
    write_json(&cfg.path(TABLE), &table)?;
    let (pos, neg) = table.sizes();
    log::info!("mined {pos} positive and {neg} negative tokens");
    Ok(table)
}

/// Loads the persisted model and feature pipeline, checking that the three
/// files belong to one training run.
pub fn load_model(cfg: &RunConfig) -> Result<(TfIdfVocabulary, Chi2Selection, BrModel, String)> {
    for name in [TFIDF, SELECTION, MODEL] {
        require(&cfg.path(name))?;
    }
    let tfidf_hash = file_hash(&cfg.path(TFIDF))?;
    let selection_hash = file_hash(&cfg.path(SELECTION))?;
    let tfidf: TfIdfFile = read_json(&cfg.path(TFIDF))?;
    let sel: SelectionFile = read_json(&cfg.path(SELECTION))?;
    let model: BrModel = read_json(&cfg.path(MODEL))?;
    expect_link(SELECTION, &sel.upstream, "tfidf", &tfidf_hash)?;
    expect_link(MODEL, &model.upstream, "selection", &selection_hash)?;
    let train_hash = model
        .upstream
        .get("train")
        .cloned()
        .ok_or_else(|| Error::ChainMismatch("model does not record its training split".into()))?;
    expect_link(TFIDF, &tfidf.upstream, "train", &train_hash)?;
    if sel.kept.len() != model.n_features {
        return Err(Error::ChainMismatch(format!(
            "selection keeps {} terms, model expects {}",
            sel.kept.len(),
            model.n_features
        )));
    }
    let selection = Chi2Selection {
        kept: sel.kept,
        p_threshold: sel.p_threshold,
        scores: Vec::new(),
        warnings: Vec::new(),
    };
    Ok((tfidf.vocabulary, selection, model, train_hash))
}

#[derive(Debug, Clone, Default)]
pub struct PredictOptions {
    pub refine: bool,
    pub external: Option<PathBuf>,
    /// Functions to predict; the test split by default.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub base: Vec<(String, PredictionVector)>,
    pub refined: Option<Vec<(String, PredictionVector)>>,
    pub audit: Option<RefinementAudit>,
}

fn write_predictions(path: &Path, rows: &[(String, PredictionVector)], refined: bool) -> Result<String> {
    let mut out = Vec::new();
    for (id, p) in rows {
        serde_json::to_writer(&mut out, &PredictionRow::new(id, p, refined))
            .map_err(|e| Error::json(path, e))?;
        out.push(b'\n');
    }
    fs::write(path, &out).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&out))
}

pub fn cmd_predict(cfg: &RunConfig, opts: &PredictOptions) -> Result<PredictOutcome> {
    let input = opts.input.clone().unwrap_or_else(|| cfg.path(TEST));
    let (data, input_hash) = load_input(cfg, &input)?;
    let types = data.vocabulary.clone();

    let (base, base_hash, train_hash) = match &opts.external {
        Some(path) => {
            require(path)?;
            let rows = load_external_predictions(path, &types)?;
            let ids: Vec<&String> = rows.iter().map(|(id, _)| id).collect();
            let known: Vec<&String> = data.functions.iter().map(|f| &f.id).collect();
            if let Some(missing) = ids.iter().find(|id| !known.contains(id)) {
                return Err(Error::IdMismatch(format!(
                    "external prediction `{missing}` has no function in {}",
                    input.display()
                )));
            }
            (rows, file_hash(path)?, None)
        }
        None => {
            let (vocab, selection, model, train_hash) = load_model(cfg)?;
            if model.types != types {
                return Err(Error::VocabularyMismatch(format!(
                    "model types {:?} differ from input types {:?}",
                    model.types.names(),
                    types.names()
                )));
            }
            let x = features(&data, &vocab, &selection)?;
            let rows = data
                .functions
                .iter()
                .zip(&x)
                .map(|(f, v)| Ok((f.id.clone(), predict(&model, v)?)))
                .collect::<Result<Vec<_>>>()?;
            let h = write_predictions(&cfg.path(PREDICTIONS), &rows, false)?;
            (rows, h, Some(train_hash))
        }
    };

    if !opts.refine {
        return Ok(PredictOutcome {
            base,
            refined: None,
            audit: None,
        });
    }

    let table_path = cfg.path(TABLE);
    require(&table_path)?;
    let table_hash = file_hash(&table_path)?;
    let table: DistinguishingTokenTable = read_json(&table_path)?;
    if let Some(train_hash) = &train_hash {
        expect_link(TABLE, &table.upstream, "train", train_hash)?;
    }
    if table.types != types {
        return Err(Error::VocabularyMismatch(format!(
            "table types {:?} differ from input types {:?}",
            table.types.names(),
            types.names()
        )));
    }
    let elements = elements_by_id(&data)?;
    let truth = truth_by_id(&data)?;
    let (refined, audit) = refine_batch(&base, &elements, &table, Some(&truth))?;
    let refined_hash = write_predictions(&cfg.path(REFINED), &refined, true)?;
    write_json(
        &cfg.path(AUDIT),
        &AuditFile {
            upstream: upstream([
                ("input", &input_hash),
                ("predictions", &base_hash),
                ("refined", &refined_hash),
                ("table", &table_hash),
            ]),
            audit: audit.clone(),
        },
    )?;
    log::info!(
        "refined {} functions: {} predictions affected",
        audit.cases,
        audit.affected
    );
    Ok(PredictOutcome {
        base,
        refined: Some(refined),
        audit: Some(audit),
    })
}

/// Evaluates a predictions file against the labels of `truth` and writes
/// `<stem>-report.json` and `<stem>-report.txt` next to the predictions.
pub fn cmd_eval(cfg: &RunConfig, predictions: &Path, truth: &Path) -> Result<MetricsReport> {
    require(predictions)?;
    let (data, truth_hash) = load_input(cfg, truth)?;
    let rows = load_external_predictions(predictions, &data.vocabulary)?;
    let y_by_id = truth_by_id(&data)?;
    if rows.len() != y_by_id.len() {
        return Err(Error::IdMismatch(format!(
            "{} predictions for {} labeled functions",
            rows.len(),
            y_by_id.len()
        )));
    }
    let mut y = Vec::with_capacity(rows.len());
    let mut z = Vec::with_capacity(rows.len());
    for (id, p) in rows {
        let truth_row = y_by_id
            .get(&id)
            .ok_or_else(|| Error::IdMismatch(format!("no ground truth for `{id}`")))?;
        y.push(truth_row.clone());
        z.push(p.bits);
    }
    let mut report = evaluate(&y, &z, &data.vocabulary, cfg.hamming_empty)?;
    report.upstream = upstream([("predictions", &file_hash(predictions)?), ("truth", &truth_hash)]);

    let stem = predictions
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("predictions");
    let dir = predictions.parent().unwrap_or(Path::new("."));
    write_json(&dir.join(format!("{stem}-report.json")), &report)?;
    let txt = dir.join(format!("{stem}-report.txt"));
    fs::write(&txt, report.to_text()).map_err(|e| Error::io(&txt, e))?;
    Ok(report)
}

/// Bucket JSON for one source file.
pub fn cmd_elements(source: &Path, subtokens: bool) -> Result<String> {
    require(source)?;
    let text = fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    let elems = elements_of(&text)?;
    Ok(if subtokens {
        elems.with_subtokens().to_json()
    } else {
        elems.to_json()
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaTrial {
    pub theta: f64,
    pub macro_f1: f64,
    pub exact_match: f64,
    pub affected: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSearch {
    pub chosen: f64,
    pub base_macro_f1: f64,
    pub trials: Vec<ThetaTrial>,
}

/// Picks the mining threshold from `grid` that maximizes refined macro-F1 of
/// the trained model on the validation split. Ties go to the larger theta.
/// Nothing is written to disk.
pub fn tune_theta(cfg: &RunConfig, grid: &[f64]) -> Result<ThetaSearch> {
    if grid.is_empty() {
        return Err(Error::Config("empty theta grid".into()));
    }
    let (train, _) = load_split(cfg, TRAIN)?;
    let (valid, _) = load_split(cfg, VALIDATION)?;
    if valid.is_empty() {
        return Err(Error::Config("theta search needs a non-empty validation split".into()));
    }
    let (vocab, selection, model, _) = load_model(cfg)?;
    let x = features(&valid, &vocab, &selection)?;
    let base = valid
        .functions
        .iter()
        .zip(&x)
        .map(|(f, v)| Ok((f.id.clone(), predict(&model, v)?)))
        .collect::<Result<Vec<_>>>()?;
    let y = valid.label_vectors()?;
    let train_elements = train
        .functions
        .iter()
        .map(|f| elements_of(&f.source))
        .collect::<Result<Vec<_>>>()?;
    let elements = elements_by_id(&valid)?;
    let score = |rows: &[(String, PredictionVector)]| {
        let z: Vec<LabelVector> = rows.iter().map(|(_, p)| p.bits.clone()).collect();
        evaluate(&y, &z, &valid.vocabulary, cfg.hamming_empty)
    };
    let base_macro_f1 = score(&base)?.macro_.f1;

    let mut trials = Vec::with_capacity(grid.len());
    for &theta in grid {
        let params = crate::distinguish::MiningParams {
            theta,
            ..cfg.mining()
        };
        let table = mine(&train, &train_elements, params)?;
        let (refined, audit) = refine_batch(&base, &elements, &table, None)?;
        let r = score(&refined)?;
        trials.push(ThetaTrial {
            theta,
            macro_f1: r.macro_.f1,
            exact_match: r.exact_match,
            affected: audit.affected,
        });
    }
    let best = trials
        .iter()
        .max_by(|a, b| a.macro_f1.total_cmp(&b.macro_f1).then(a.theta.total_cmp(&b.theta)))
        .map(|t| t.theta)
        .unwrap_or(cfg.theta);
    Ok(ThetaSearch {
        chosen: best,
        base_macro_f1,
        trials,
    })
}

pub const THETA_SEARCH: &str = "theta-search.json";

/// Runs [`tune_theta`], records the search and mines with the chosen theta.
pub fn cmd_mine_tuned(cfg: &RunConfig, grid: &[f64]) -> Result<(DistinguishingTokenTable, ThetaSearch)> {
    let search = tune_theta(cfg, grid)?;
    write_json(&cfg.path(THETA_SEARCH), &search)?;
    let tuned = RunConfig {
        theta: search.chosen,
        ..cfg.clone()
    };
    Ok((cmd_mine(&tuned)?, search))
}
