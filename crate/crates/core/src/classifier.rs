//! Binary-relevance multi-label classifier: one Gaussian Naive Bayes binary
//! classifier per vulnerability type.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::artifact::ext_real::ExtReal;
use crate::corpus::{LabelVector, TypeVocabulary};
use crate::error::{Error, Result};

const RELATIVE_VAR_EPSILON: f64 = 1e-9;
const ABSOLUTE_VAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbBinary {
    pub prior_pos: f64,
    pub prior_neg: f64,
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    pub var_pos: Vec<f64>,
    pub var_neg: Vec<f64>,
    pub var_epsilon: f64,
}

fn log_gaussian(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

impl GaussianNbBinary {
    /// Joint log-likelihoods `(positive, negative)` including the priors.
    pub fn log_joint(&self, x: &[f64]) -> (f64, f64) {
        let mut pos = self.prior_pos.ln();
        let mut neg = self.prior_neg.ln();
        for (f, &xf) in x.iter().enumerate() {
            pos += log_gaussian(xf, self.mean_pos[f], self.var_pos[f]);
            neg += log_gaussian(xf, self.mean_neg[f], self.var_neg[f]);
        }
        (pos, neg)
    }

    pub fn log_odds(&self, x: &[f64]) -> f64 {
        let (pos, neg) = self.log_joint(x);
        pos - neg
    }

    /// Bayes decision; an exact tie predicts 0.
    pub fn decide(&self, x: &[f64]) -> bool {
        let (pos, neg) = self.log_joint(x);
        pos > neg
    }
}

/// Per-type classifier. Types seen with a single class in training get a
/// constant predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TypeClassifier {
    Gaussian(GaussianNbBinary),
    Constant { value: u8 },
}

impl TypeClassifier {
    fn predict(&self, x: &[f64]) -> (bool, f64) {
        match self {
            TypeClassifier::Gaussian(g) => {
                let (pos, neg) = g.log_joint(x);
                (pos > neg, pos - neg)
            }
            TypeClassifier::Constant { value: 1 } => (true, f64::INFINITY),
            TypeClassifier::Constant { .. } => (false, f64::NEG_INFINITY),
        }
    }
}

/// Binary prediction over the type vocabulary with diagnostic log-odds.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector {
    pub bits: LabelVector,
    pub scores: Option<Vec<f64>>,
}

impl PredictionVector {
    pub fn from_bits(bits: Vec<u8>) -> Self {
        Self {
            bits: LabelVector(bits),
            scores: None,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrModel {
    pub types: TypeVocabulary,
    pub n_features: usize,
    pub per_type: Vec<TypeClassifier>,
    /// Content hashes of the artifacts this model was trained against.
    pub upstream: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BrModelWire {
    types: TypeVocabulary,
    n_features: usize,
    per_type: BTreeMap<String, TypeClassifier>,
    upstream: BTreeMap<String, String>,
}

impl Serialize for BrModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BrModelWire {
            types: self.types.clone(),
            n_features: self.n_features,
            per_type: self
                .types
                .names()
                .iter()
                .cloned()
                .zip(self.per_type.iter().cloned())
                .collect(),
            upstream: self.upstream.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BrModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut wire = BrModelWire::deserialize(d)?;
        let mut per_type = Vec::with_capacity(wire.types.len());
        for name in wire.types.names() {
            let c = wire
                .per_type
                .remove(name)
                .ok_or_else(|| D::Error::custom(format!("no classifier for type `{name}`")))?;
            if let TypeClassifier::Gaussian(g) = &c {
                if [&g.mean_neg, &g.var_pos, &g.var_neg, &g.mean_pos]
                    .iter()
                    .any(|v| v.len() != wire.n_features)
                {
                    return Err(D::Error::custom(format!(
                        "classifier for `{name}` does not have {} features",
                        wire.n_features
                    )));
                }
            }
            per_type.push(c);
        }
        if let Some(extra) = wire.per_type.keys().next() {
            return Err(D::Error::custom(format!("classifier for unknown type `{extra}`")));
        }
        Ok(BrModel {
            types: wire.types,
            n_features: wire.n_features,
            per_type,
            upstream: wire.upstream,
            warnings: Vec::new(),
        })
    }
}

fn moments(rows: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for f in 0..dim {
            var[f] += (r[f] - mean[f]).powi(2);
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

/// Trains one binary classifier per type on dense feature rows (already
/// projected onto the selected terms).
pub fn train_br(
    vectors: &[Vec<f64>],
    labels: &[LabelVector],
    types: &TypeVocabulary,
) -> Result<BrModel> {
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: vectors.len(),
            actual: labels.len(),
        });
    }
    if vectors.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    if let Some(l) = labels.iter().find(|l| l.len() != types.len()) {
        return Err(Error::LengthMismatch {
            expected: types.len(),
            actual: l.len(),
        });
    }

    let all: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
    let (_, total_var) = moments(&all, dim);
    let max_var = total_var.iter().copied().fold(0.0, f64::max);
    let var_epsilon = (RELATIVE_VAR_EPSILON * max_var).max(ABSOLUTE_VAR_FLOOR);

    let n = vectors.len() as f64;
    let mut per_type = Vec::with_capacity(types.len());
    let mut warnings = Vec::new();
    for (j, name) in types.names().iter().enumerate() {
        let (pos, neg): (Vec<_>, Vec<_>) = all
            .iter()
            .zip(labels)
            .partition(|(_, l)| l.get(j));
        if pos.is_empty() || neg.is_empty() {
            let value = u8::from(neg.is_empty());
            warnings.push(format!(
                "type `{name}` has a single class in training; predicting constant {value}"
            ));
            per_type.push(TypeClassifier::Constant { value });
            continue;
        }
        let pos: Vec<&[f64]> = pos.into_iter().map(|(r, _)| *r).collect();
        let neg: Vec<&[f64]> = neg.into_iter().map(|(r, _)| *r).collect();
        let (mean_pos, mut var_pos) = moments(&pos, dim);
        let (mean_neg, mut var_neg) = moments(&neg, dim);
        for v in var_pos.iter_mut().chain(var_neg.iter_mut()) {
            *v = v.max(var_epsilon);
        }
        per_type.push(TypeClassifier::Gaussian(GaussianNbBinary {
            prior_pos: pos.len() as f64 / n,
            prior_neg: neg.len() as f64 / n,
            mean_pos,
            mean_neg,
            var_pos,
            var_neg,
            var_epsilon,
        }));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(BrModel {
        types: types.clone(),
        n_features: dim,
        per_type,
        upstream: BTreeMap::new(),
        warnings,
    })
}

pub fn predict(model: &BrModel, x: &[f64]) -> Result<PredictionVector> {
    if x.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: x.len(),
        });
    }
    let (bits, scores) = model
        .per_type
        .iter()
        .map(|c| {
            let (bit, score) = c.predict(x);
            (u8::from(bit), score)
        })
        .unzip();
    Ok(PredictionVector {
        bits: LabelVector(bits),
        scores: Some(scores),
    })
}

/// One row of a predictions JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub bits: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<ExtReal>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub refined: bool,
}

impl PredictionRow {
    pub fn new(id: &str, p: &PredictionVector, refined: bool) -> Self {
        Self {
            id: id.to_owned(),
            bits: p.bits.0.iter().map(|&b| i64::from(b)).collect(),
            scores: p
                .scores
                .as_ref()
                .map(|s| s.iter().copied().map(ExtReal).collect()),
            refined,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_feature_model(prior_pos: f64) -> GaussianNbBinary {
        GaussianNbBinary {
            prior_pos,
            prior_neg: 1.0 - prior_pos,
            mean_pos: vec![1.0],
            mean_neg: vec![0.0],
            var_pos: vec![1.0],
            var_neg: vec![1.0],
            var_epsilon: 1e-12,
        }
    }

    fn vocab(n: usize) -> TypeVocabulary {
        TypeVocabulary::new((0..n).map(|i| format!("t{i}"))).unwrap()
    }

    #[test]
    fn symmetric_model_decisions() {
        let g = one_feature_model(0.5);
        assert!(g.decide(&[0.9]));
        assert!(!g.decide(&[0.1]));
        assert!(!g.decide(&[0.5]));
        assert_eq!(g.log_odds(&[0.5]), 0.0);
        // (0.9 - 0)^2 / 2 - (0.9 - 1)^2 / 2
        assert!((g.log_odds(&[0.9]) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn moments_and_floor() {
        let x = vec![vec![1.0], vec![1.0], vec![0.0], vec![0.0]];
        let y: Vec<_> = [1, 1, 0, 0].iter().map(|&b| LabelVector(vec![b])).collect();
        let m = train_br(&x, &y, &vocab(1)).unwrap();
        let TypeClassifier::Gaussian(g) = &m.per_type[0] else {
            panic!("expected gaussian")
        };
        assert_eq!((g.mean_pos[0], g.mean_neg[0]), (1.0, 0.0));
        // total variance 0.25
        assert!((g.var_epsilon - 0.25e-9).abs() < 1e-24);
        assert_eq!(g.var_pos[0], g.var_epsilon);
        assert_eq!(g.var_neg[0], g.var_epsilon);
        assert_eq!((g.prior_pos, g.prior_neg), (0.5, 0.5));
    }

    #[test]
    fn prior_frequency() {
        let x = vec![vec![1.0], vec![0.9], vec![0.8], vec![0.0]];
        let y: Vec<_> = [1, 1, 1, 0].iter().map(|&b| LabelVector(vec![b])).collect();
        let m = train_br(&x, &y, &vocab(1)).unwrap();
        let TypeClassifier::Gaussian(g) = &m.per_type[0] else {
            panic!("expected gaussian")
        };
        assert_eq!(g.prior_pos, 0.75);
    }

    #[test]
    fn absent_type_is_constant_zero() {
        let x = vec![vec![1.0], vec![0.0]];
        let y: Vec<_> = [[1, 0], [0, 0]].iter().map(|b| LabelVector(b.to_vec())).collect();
        let m = train_br(&x, &y, &vocab(2)).unwrap();
        assert_eq!(m.per_type[1], TypeClassifier::Constant { value: 0 });
        assert_eq!(m.warnings.len(), 1);
        let p = predict(&m, &[0.3]).unwrap();
        assert_eq!(p.bits.0[1], 0);
    }

    #[test]
    fn dimensionality_mismatch() {
        let x = vec![vec![1.0], vec![0.0]];
        let y: Vec<_> = [1, 0].iter().map(|&b| LabelVector(vec![b])).collect();
        let m = train_br(&x, &y, &vocab(1)).unwrap();
        assert!(matches!(
            predict(&m, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn separable_training_set_reproduced() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { 0.0 }, (i as f64) / 10.0])
            .collect();
        let y: Vec<_> = (0..10)
            .map(|i| LabelVector(vec![u8::from(i % 2 == 0), u8::from(i % 2 == 1)]))
            .collect();
        let m = train_br(&x, &y, &vocab(2)).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(&predict(&m, xi).unwrap().bits, yi);
        }
    }

    #[test]
    fn json_round_trip() {
        let x = vec![vec![1.0, 0.2], vec![0.0, 0.1], vec![0.5, 0.0]];
        let y: Vec<_> = [[1, 0], [0, 0], [1, 0]]
            .iter()
            .map(|b| LabelVector(b.to_vec()))
            .collect();
        let m = train_br(&x, &y, &vocab(2)).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains(r#""t1":{"kind":"constant","value":0}"#));
        let back: BrModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.per_type, m.per_type);
    }
}
