//! Multi-label evaluation: exact-match ratio, hamming score, accuracy and
//! precision/recall/F1 per type with micro, macro, weighted and samples
//! averaging.
//!
//! Conventions: every 0/0 ratio is 0 (and counted in `zero_divisions`);
//! macro F1 is the harmonic mean of macro precision and macro recall; samples
//! F1 is the mean of per-row F1; a hamming row whose true and predicted sets
//! are both empty scores 1 unless [`EmptyUnion::Zero`] is chosen.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelVector, TypeVocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmptyUnion {
    #[default]
    One,
    Zero,
}

impl EmptyUnion {
    fn value(self) -> f64 {
        match self {
            EmptyUnion::One => 1.0,
            EmptyUnion::Zero => 0.0,
        }
    }
}

fn check(y: &[LabelVector], z: &[LabelVector]) -> Result<usize> {
    if y.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            actual: z.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let width = y[0].len();
    for row in y.iter().chain(z) {
        if row.len() != width {
            return Err(Error::LengthMismatch {
                expected: width,
                actual: row.len(),
            });
        }
    }
    Ok(width)
}

pub fn exact_match_ratio(y: &[LabelVector], z: &[LabelVector]) -> Result<f64> {
    check(y, z)?;
    let hits = y.iter().zip(z).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

pub fn hamming_score(y: &[LabelVector], z: &[LabelVector], empty: EmptyUnion) -> Result<f64> {
    check(y, z)?;
    let total: f64 = y
        .iter()
        .zip(z)
        .map(|(a, b)| {
            let (mut inter, mut union) = (0usize, 0usize);
            for (&p, &q) in a.0.iter().zip(&b.0) {
                inter += usize::from(p == 1 && q == 1);
                union += usize::from(p == 1 || q == 1);
            }
            if union == 0 {
                empty.value()
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    Ok(total / y.len() as f64)
}

pub fn accuracy(y: &[LabelVector], z: &[LabelVector]) -> Result<f64> {
    let width = check(y, z)?;
    if width == 0 {
        return Ok(1.0);
    }
    let total: f64 = y
        .iter()
        .zip(z)
        .map(|(a, b)| a.0.iter().zip(&b.0).filter(|(p, q)| p == q).count() as f64 / width as f64)
        .sum();
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

pub fn confusion(y: &[LabelVector], z: &[LabelVector]) -> Result<Vec<ConfusionCounts>> {
    let width = check(y, z)?;
    let mut out = vec![ConfusionCounts::default(); width];
    for (a, b) in y.iter().zip(z) {
        for (c, (&p, &q)) in out.iter_mut().zip(a.0.iter().zip(&b.0)) {
            match (p, q) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (1, 0) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TypeScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub weighted: Prf,
    pub samples: Prf,
    pub per_type: Vec<TypeScores>,
    pub zero_divisions: usize,
}

struct Ratio<'a>(&'a mut usize);

impl Ratio<'_> {
    fn of(&mut self, num: f64, den: f64) -> f64 {
        if den == 0.0 {
            *self.0 += 1;
            0.0
        } else {
            num / den
        }
    }

    fn harmonic(&mut self, p: f64, r: f64) -> f64 {
        self.of(2.0 * p * r, p + r)
    }
}

pub fn averaged_prf(y: &[LabelVector], z: &[LabelVector]) -> Result<Averages> {
    let counts = confusion(y, z)?;
    let mut zero_divisions = 0;
    let mut r = Ratio(&mut zero_divisions);

    let per_type: Vec<TypeScores> = counts
        .iter()
        .map(|c| {
            let precision = r.of(c.tp as f64, (c.tp + c.fp) as f64);
            let recall = r.of(c.tp as f64, (c.tp + c.fn_) as f64);
            TypeScores {
                precision,
                recall,
                f1: r.harmonic(precision, recall),
                support: c.tp + c.fn_,
            }
        })
        .collect();

    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |(a, b, c), k| (a + k.tp, b + k.fp, c + k.fn_));
    let micro_p = r.of(tp as f64, (tp + fp) as f64);
    let micro_r = r.of(tp as f64, (tp + fn_) as f64);
    let micro = Prf {
        precision: micro_p,
        recall: micro_r,
        f1: r.harmonic(micro_p, micro_r),
    };

    let k = per_type.len() as f64;
    let macro_p = r.of(per_type.iter().map(|s| s.precision).sum(), k);
    let macro_r = r.of(per_type.iter().map(|s| s.recall).sum(), k);
    let macro_ = Prf {
        precision: macro_p,
        recall: macro_r,
        f1: r.harmonic(macro_p, macro_r),
    };

    let support: f64 = per_type.iter().map(|s| s.support as f64).sum();
    let weighted_mean = |r: &mut Ratio, f: fn(&TypeScores) -> f64| {
        r.of(per_type.iter().map(|s| s.support as f64 * f(s)).sum(), support)
    };
    let weighted = Prf {
        precision: weighted_mean(&mut r, |s| s.precision),
        recall: weighted_mean(&mut r, |s| s.recall),
        f1: weighted_mean(&mut r, |s| s.f1),
    };

    let mut samples = Prf::default();
    for (a, b) in y.iter().zip(z) {
        let inter = a.0.iter().zip(&b.0).filter(|(&p, &q)| p == 1 && q == 1).count() as f64;
        let p = r.of(inter, b.count_ones() as f64);
        let rc = r.of(inter, a.count_ones() as f64);
        samples.precision += p;
        samples.recall += rc;
        samples.f1 += r.harmonic(p, rc);
    }
    let n = y.len() as f64;
    samples.precision /= n;
    samples.recall /= n;
    samples.f1 /= n;

    Ok(Averages {
        micro,
        macro_,
        weighted,
        samples,
        per_type,
        zero_divisions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub zero_division: String,
    pub hamming_empty_union: EmptyUnion,
    pub macro_f1: String,
    pub samples_f1: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub num_types: usize,
    pub exact_match: f64,
    pub hamming: f64,
    pub accuracy: f64,
    pub per_type: BTreeMap<String, TypeScores>,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub weighted: Prf,
    pub samples: Prf,
    pub zero_divisions: usize,
    pub conventions: Conventions,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub upstream: BTreeMap<String, String>,
}

pub fn evaluate(
    y: &[LabelVector],
    z: &[LabelVector],
    types: &TypeVocabulary,
    empty: EmptyUnion,
) -> Result<MetricsReport> {
    let width = check(y, z)?;
    if width != types.len() {
        return Err(Error::LengthMismatch {
            expected: types.len(),
            actual: width,
        });
    }
    let avg = averaged_prf(y, z)?;
    Ok(MetricsReport {
        n: y.len(),
        num_types: width,
        exact_match: exact_match_ratio(y, z)?,
        hamming: hamming_score(y, z, empty)?,
        accuracy: accuracy(y, z)?,
        per_type: types.names().iter().cloned().zip(avg.per_type).collect(),
        micro: avg.micro,
        macro_: avg.macro_,
        weighted: avg.weighted,
        samples: avg.samples,
        zero_divisions: avg.zero_divisions,
        conventions: Conventions {
            zero_division: "0".into(),
            hamming_empty_union: empty,
            macro_f1: "harmonic(macro_precision, macro_recall)".into(),
            samples_f1: "mean(per_row_f1)".into(),
        },
        upstream: BTreeMap::new(),
    })
}

impl MetricsReport {
    /// Aligned plain-text rendering: summary line, per-type table and the
    /// averaging families as columns.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cases: {}  types: {}", self.n, self.num_types);
        let _ = writeln!(
            s,
            "exact match: {:.4}  hamming score: {:.4}  accuracy: {:.4}",
            self.exact_match, self.hamming, self.accuracy
        );
        let _ = writeln!(s);
        let width = self
            .per_type
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(4)
            .max(4);
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            "type", "precision", "recall", "f1", "support"
        );
        for (name, t) in &self.per_type {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
                name, t.precision, t.recall, t.f1, t.support
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<9}  {:>9}  {:>9}  {:>9}  {:>9}",
            "", "micro", "macro", "weighted", "samples"
        );
        let families = [self.micro, self.macro_, self.weighted, self.samples];
        for (label, get) in [
            ("precision", (|p: &Prf| p.precision) as fn(&Prf) -> f64),
            ("recall", |p: &Prf| p.recall),
            ("f1", |p: &Prf| p.f1),
        ] {
            let _ = write!(s, "{label:<9}");
            for f in &families {
                let _ = write!(s, "  {:>9.4}", get(f));
            }
            let _ = writeln!(s);
        }
        s
    }
}
