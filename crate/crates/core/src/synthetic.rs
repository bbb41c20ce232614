//! Seeded generator of small labeled C corpora with planted type-marker
//! calls, shared background calls and label noise.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, TypeVocabulary, VulnFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub functions: usize,
    pub types: usize,
    /// Marker calls planted per type.
    pub markers_per_type: usize,
    /// Calls shared by all types.
    pub background: usize,
    /// Probability that a function's recorded labels differ from the types
    /// its code was generated for.
    pub label_noise: f64,
    /// Probability that a function carries a second type.
    pub multi_label: f64,
    /// Probability that each marker of a true type is planted.
    pub marker_rate: f64,
    /// Relative type frequencies; uniform when empty.
    pub type_weights: Vec<f64>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            functions: 400,
            types: 4,
            markers_per_type: 2,
            background: 30,
            label_noise: 0.1,
            multi_label: 0.25,
            marker_rate: 0.6,
            type_weights: Vec::new(),
            seed: 7,
        }
    }
}

/// The generated corpus plus the type sets the code was actually built for.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    pub true_labels: Vec<BTreeSet<String>>,
    pub markers: Vec<Vec<String>>,
    pub background: Vec<String>,
}

const STEMS: &[&str] = &[
    "copy", "fill", "scan", "parse", "grow", "shrink", "lock", "unlock", "load", "store",
    "read", "write", "open", "close", "hash", "sort", "merge", "split", "check", "reset",
    "queue", "flush", "probe", "match", "encode", "decode", "attach", "detach", "map", "trim",
];

pub fn type_name(t: usize) -> String {
    format!("CWE-{}", 100 + t)
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.types < 2 || spec.functions == 0 || spec.markers_per_type == 0 {
        return Err(Error::Config(
            "synthetic corpus needs >= 2 types, >= 1 function and >= 1 marker".into(),
        ));
    }
    for p in [spec.label_noise, spec.multi_label, spec.marker_rate] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("probability {p} outside [0, 1]")));
        }
    }
    let weights = if spec.type_weights.is_empty() {
        vec![1.0; spec.types]
    } else {
        spec.type_weights.clone()
    };
    let pick = WeightedIndex::new(&weights)
        .ok()
        .filter(|_| weights.len() == spec.types)
        .ok_or_else(|| Error::Config(format!("need {} positive type weights", spec.types)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names: Vec<String> = (0..spec.types).map(type_name).collect();
    let markers: Vec<Vec<String>> = (0..spec.types)
        .map(|t| {
            (0..spec.markers_per_type)
                .map(|m| format!("mark{}{}", (b'a' + t as u8 % 26) as char, m))
                .collect()
        })
        .collect();
    let background: Vec<String> = (0..spec.background)
        .map(|i| {
            let stem = STEMS[i % STEMS.len()];
            if i < STEMS.len() {
                format!("{stem}_block")
            } else {
                format!("{stem}_block{}", i / STEMS.len())
            }
        })
        .collect();

    let mut functions = Vec::with_capacity(spec.functions);
    let mut true_labels = Vec::with_capacity(spec.functions);
    for i in 0..spec.functions {
        let mut truth = BTreeSet::from([pick.sample(&mut rng)]);
        if rng.random_bool(spec.multi_label) {
            truth.insert(pick.sample(&mut rng));
        }
        let mut recorded = truth.clone();
        if rng.random_bool(spec.label_noise) {
            let drop = *recorded.iter().collect::<Vec<_>>().choose(&mut rng).unwrap();
            let drop = *drop;
            recorded.remove(&drop);
            let others: Vec<usize> = (0..spec.types).filter(|t| *t != drop).collect();
            recorded.insert(*others.choose(&mut rng).unwrap());
        }

        let mut calls: Vec<&str> = Vec::new();
        for &t in &truth {
            let mut planted: Vec<&str> = markers[t]
                .iter()
                .filter(|_| rng.random_bool(spec.marker_rate))
                .map(String::as_str)
                .collect();
            if planted.is_empty() {
                planted.push(markers[t].choose(&mut rng).unwrap());
            }
            calls.extend(planted);
        }
        let n_bg = rng.random_range(3..=6).min(background.len());
        calls.extend(
            background
                .choose_multiple(&mut rng, n_bg)
                .map(String::as_str),
        );
        calls.shuffle(&mut rng);

        let id = format!("fn{i:04}");
        functions.push(VulnFunction {
            id: id.clone(),
            source: render(&id, &calls, &mut rng),
            labels: recorded.iter().map(|&t| names[t].clone()).collect(),
        });
        true_labels.push(truth.iter().map(|&t| names[t].clone()).collect());
    }
    let dataset = Dataset::new(functions, TypeVocabulary::new(names)?)?;
    Ok(SyntheticCorpus {
        dataset,
        true_labels,
        markers,
        background,
    })
}

fn render(id: &str, calls: &[&str], rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "int {id}(char *buf, int len) {{");
    let _ = writeln!(s, "    int rc = 0;");
    for (k, call) in calls.iter().enumerate() {
        let _ = match rng.random_range(0..4) {
            0 => writeln!(s, "    rc = {call}(buf, len);"),
            1 => writeln!(s, "    if (len > {k}) {{\n        {call}(buf + {k}, len);\n    }}"),
            2 => writeln!(s, "    for (int i = 0; i < len; i++) {{\n        {call}(&buf[i], {k});\n    }}"),
            _ => writeln!(s, "    {call}(buf, rc);"),
        };
    }
    let _ = writeln!(s, "    return rc;\n}}");
    s
}
