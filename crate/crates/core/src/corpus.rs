//! Dataset model: vulnerable functions, their type labels, ingestion from
//! JSONL/CSV and deterministic train/validation/test splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the shuffle used by [`split_dataset`], stored in split
/// manifests so a split can be traced back to the generator that made it.
pub const SHUFFLE_ALGORITHM: &str = "chacha8-seed_from_u64/fisher-yates";

/// Name given to types merged by [`group_rare_types`].
pub const OTHERS: &str = "others";

/// Ordered set of vulnerability type names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TypeVocabulary {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidVocabulary("empty type name".into()));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate type `{name}`")));
            }
        }
        Ok(Self { names, index })
    }

    /// Vocabulary over the given labels in lexicographic order.
    pub fn infer<'a, I>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a String>,
    {
        let sorted: BTreeSet<&String> = labels.into_iter().collect();
        Self::new(sorted.into_iter().cloned())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

impl Serialize for TypeVocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.names.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TypeVocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        TypeVocabulary::new(names).map_err(serde::de::Error::custom)
    }
}

/// One vulnerable function with its ground-truth type set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnFunction {
    pub id: String,
    pub source: String,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub functions: Vec<VulnFunction>,
    pub vocabulary: TypeVocabulary,
}

impl Dataset {
    /// Builds a dataset, checking id uniqueness, non-empty sources and label
    /// membership.
    pub fn new(functions: Vec<VulnFunction>, vocabulary: TypeVocabulary) -> Result<Self> {
        let mut seen = HashSet::with_capacity(functions.len());
        for f in &functions {
            validate_function(f, Some(&vocabulary))?;
            if !seen.insert(f.id.as_str()) {
                return Err(Error::DuplicateId(f.id.clone()));
            }
        }
        Ok(Self {
            functions,
            vocabulary,
        })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn label_vectors(&self) -> Result<Vec<LabelVector>> {
        self.functions
            .iter()
            .map(|f| label_vector(f, &self.vocabulary))
            .collect()
    }

    /// Same functions bound to another vocabulary.
    pub fn with_vocabulary(self, vocabulary: TypeVocabulary) -> Result<Self> {
        Dataset::new(self.functions, vocabulary)
    }
}

fn validate_function(f: &VulnFunction, vocabulary: Option<&TypeVocabulary>) -> Result<()> {
    if f.source.trim().is_empty() {
        return Err(Error::EmptySource { id: f.id.clone() });
    }
    if let Some(vocab) = vocabulary {
        if let Some(label) = f.labels.iter().find(|l| !vocab.contains(l)) {
            return Err(Error::UnknownLabel {
                label: label.clone(),
            });
        }
    }
    Ok(())
}

/// Binary membership vector over a [`TypeVocabulary`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(pub Vec<u8>);

impl LabelVector {
    pub fn zeros(len: usize) -> Self {
        LabelVector(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }
}

pub fn label_vector(f: &VulnFunction, vocabulary: &TypeVocabulary) -> Result<LabelVector> {
    let mut bits = LabelVector::zeros(vocabulary.len());
    for label in &f.labels {
        let j = vocabulary.position(label).ok_or_else(|| Error::UnknownLabel {
            label: label.clone(),
        })?;
        bits.0[j] = 1;
    }
    Ok(bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension; anything that is not
    /// `.csv` is read as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    id: String,
    source: String,
    labels: Vec<String>,
}

#[derive(Serialize)]
struct JsonRecordOut<'a> {
    id: &'a str,
    source: &'a str,
    labels: &'a BTreeSet<String>,
}

/// Loads a dataset. When `vocabulary` is `None` it is inferred from the
/// observed labels in lexicographic order.
pub fn load_dataset(
    path: &Path,
    format: Format,
    vocabulary: Option<&TypeVocabulary>,
) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = match format {
        Format::Jsonl => read_jsonl(path, BufReader::new(file))?,
        Format::Csv => read_csv(path, file)?,
    };

    let mut seen = HashSet::with_capacity(rows.len());
    for (line, f) in &rows {
        if !seen.insert(f.id.as_str()) {
            return Err(Error::DuplicateId(f.id.clone()));
        }
        validate_function(f, vocabulary).map_err(|e| match e {
            Error::EmptySource { .. } => Error::MalformedRecord {
                path: path.to_owned(),
                line: *line,
                reason: "empty source".into(),
            },
            other => other,
        })?;
    }

    let functions: Vec<VulnFunction> = rows.into_iter().map(|(_, f)| f).collect();
    let vocabulary = match vocabulary {
        Some(v) => v.clone(),
        None => TypeVocabulary::infer(functions.iter().flat_map(|f| f.labels.iter()))?,
    };
    Ok(Dataset {
        functions,
        vocabulary,
    })
}

fn make_function(
    path: &Path,
    line: usize,
    id: String,
    source: String,
    labels: Vec<String>,
) -> Result<VulnFunction> {
    let malformed = |reason: &str| Error::MalformedRecord {
        path: path.to_owned(),
        line,
        reason: reason.to_owned(),
    };
    if id.is_empty() {
        return Err(malformed("empty id"));
    }
    if labels.iter().any(|l| l.is_empty()) {
        return Err(malformed("empty label"));
    }
    Ok(VulnFunction {
        id,
        source,
        labels: labels.into_iter().collect(),
    })
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<(usize, VulnFunction)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.to_owned(),
                line: line_no,
                reason: e.to_string(),
            })?;
        out.push((
            line_no,
            make_function(path, line_no, rec.id, rec.source, rec.labels)?,
        ));
    }
    Ok(out)
}

fn read_csv(path: &Path, file: File) -> Result<Vec<(usize, VulnFunction)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRecord {
            path: path.to_owned(),
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MalformedRecord {
                path: path.to_owned(),
                line: 1,
                reason: format!("missing column `{name}`"),
            })
    };
    let (id_col, source_col, labels_col) = (column("id")?, column("source")?, column("labels")?);

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRecord {
            path: path.to_owned(),
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize| {
            record
                .get(col)
                .map(str::to_owned)
                .ok_or_else(|| Error::MalformedRecord {
                    path: path.to_owned(),
                    line,
                    reason: "missing field".into(),
                })
        };
        let labels = field(labels_col)?
            .split(';')
            .map(|l| l.trim().to_owned())
            .filter(|l| !l.is_empty())
            .collect();
        out.push((
            line,
            make_function(path, line, field(id_col)?, field(source_col)?, labels)?,
        ));
    }
    Ok(out)
}

pub fn save_dataset(dataset: &Dataset, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Jsonl => {
            let mut w = BufWriter::new(file);
            for f in &dataset.functions {
                let rec = JsonRecordOut {
                    id: &f.id,
                    source: &f.source,
                    labels: &f.labels,
                };
                serde_json::to_writer(&mut w, &rec).map_err(|e| Error::json(path, e))?;
                w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
        Format::Csv => {
            let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
            let mut w = csv::Writer::from_writer(file);
            w.write_record(["id", "source", "labels"]).map_err(csv_err)?;
            for f in &dataset.functions {
                if let Some(bad) = f.labels.iter().find(|l| l.contains(';')) {
                    return Err(Error::InvalidVocabulary(format!(
                        "label `{bad}` contains the CSV label separator"
                    )));
                }
                let labels = f.labels.iter().cloned().collect::<Vec<_>>().join(";");
                w.write_record([f.id.as_str(), f.source.as_str(), labels.as_str()])
                    .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
    }
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64) -> Result<Self> {
        let spec = Self { ratios, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidSplit(format!(
                "ratios must be non-negative, got {:?}",
                self.ratios
            )));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Split sizes for `n` items: validation and test get `floor(n * r)`,
    /// train takes the remainder.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        // The epsilon keeps products like 0.7 * 10 = 7.000000000000001 and
        // 0.29 * 100 = 28.999999999999996 on the intended integer.
        let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let validation = floor(self.ratios[1]);
        let test = floor(self.ratios[2]);
        [n - validation - test, validation, test]
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

pub fn split_dataset(d: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let n = d.len();
    if n < 3 && spec.ratios.iter().all(|&r| r > 0.0) {
        return Err(Error::DatasetTooSmall);
    }
    let [n_train, n_val, _] = spec.sizes(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let take = |range: std::ops::Range<usize>| Dataset {
        functions: order[range]
            .iter()
            .map(|&i| d.functions[i].clone())
            .collect(),
        vocabulary: d.vocabulary.clone(),
    };
    Ok(Splits {
        train: take(0..n_train),
        validation: take(n_train..n_train + n_val),
        test: take(n_train + n_val..n),
    })
}

/// Renames every type with fewer than `min_cases` training cases to
/// [`OTHERS`] across all three splits and rebuilds the shared vocabulary.
pub fn group_rare_types(splits: Splits, min_cases: usize) -> Result<Splits> {
    let mut counts: BTreeMap<&str, usize> = splits
        .train
        .vocabulary
        .names()
        .iter()
        .map(|n| (n.as_str(), 0))
        .collect();
    for f in &splits.train.functions {
        for l in &f.labels {
            *counts.entry(l.as_str()).or_default() += 1;
        }
    }
    let rare: HashSet<String> = counts
        .into_iter()
        .filter(|&(_, c)| c < min_cases)
        .map(|(n, _)| n.to_owned())
        .collect();
    if rare.is_empty() {
        return Ok(splits);
    }
    let rename = |name: &String| {
        if rare.contains(name) {
            OTHERS.to_owned()
        } else {
            name.clone()
        }
    };
    let vocabulary = TypeVocabulary::infer(
        splits
            .train
            .vocabulary
            .names()
            .iter()
            .map(rename)
            .collect::<Vec<_>>()
            .iter(),
    )?;
    let regroup = |d: Dataset| -> Result<Dataset> {
        let functions = d
            .functions
            .into_iter()
            .map(|f| VulnFunction {
                labels: f.labels.iter().map(rename).collect(),
                ..f
            })
            .collect();
        Dataset::new(functions, vocabulary.clone())
    };
    Ok(Splits {
        train: regroup(splits.train)?,
        validation: regroup(splits.validation)?,
        test: regroup(splits.test)?,
    })
}

/// Record of how a split was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub algorithm: String,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub group_below: Option<usize>,
    pub types: TypeVocabulary,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn new(spec: &SplitSpec, group_below: Option<usize>, splits: &Splits) -> Self {
        let ids = |d: &Dataset| d.functions.iter().map(|f| f.id.clone()).collect();
        Self {
            algorithm: SHUFFLE_ALGORITHM.to_owned(),
            seed: spec.seed,
            ratios: spec.ratios,
            group_below,
            types: splits.train.vocabulary.clone(),
            train: ids(&splits.train),
            validation: ids(&splits.validation),
            test: ids(&splits.test),
        }
    }
}
