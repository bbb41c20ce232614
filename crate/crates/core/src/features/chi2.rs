use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::tfidf::FeatureVector;
use crate::corpus::LabelVector;
use crate::error::{Error, Result};

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_survival(statistic: f64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_ur(0.5, statistic / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermScore {
    pub chi2: f64,
    pub p_value: f64,
    /// Label index achieving the smallest p-value, if any label was usable.
    pub label: Option<usize>,
}

/// Terms kept by the chi-square test, plus each term's best per-label score.
#[derive(Debug, Clone, PartialEq)]
pub struct Chi2Selection {
    pub kept: Vec<usize>,
    pub p_threshold: f64,
    pub scores: Vec<TermScore>,
    pub warnings: Vec<String>,
}

impl Chi2Selection {
    /// Dense projection of a feature vector onto the kept terms.
    pub fn project(&self, v: &FeatureVector) -> Vec<f64> {
        self.kept.iter().map(|&i| v.get(i)).collect()
    }

    /// A selection keeping every term, for callers that skip the test.
    pub fn keep_all(dim: usize) -> Self {
        Self {
            kept: (0..dim).collect(),
            p_threshold: 1.0,
            scores: vec![
                TermScore {
                    chi2: 0.0,
                    p_value: 1.0,
                    label: None
                };
                dim
            ],
            warnings: Vec::new(),
        }
    }
}

/// One-degree-of-freedom chi-square test per (label, term) on the feature
/// mass split between positive and negative cases. A term is kept when its
/// smallest p-value over labels is below `p_threshold`; a threshold of 1 or
/// more keeps every term.
pub fn chi2_select(
    vectors: &[FeatureVector],
    labels: &[LabelVector],
    p_threshold: f64,
) -> Result<Chi2Selection> {
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: vectors.len(),
            actual: labels.len(),
        });
    }
    if vectors.len() < 2 {
        return Err(Error::EmptyCorpus);
    }
    if !(p_threshold > 0.0) {
        return Err(Error::Config(format!(
            "p_threshold must be in (0, 1], got {p_threshold}"
        )));
    }
    let dim = vectors[0].dim;
    let n_labels = labels[0].len();
    if let Some(v) = vectors.iter().find(|v| v.dim != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.dim,
        });
    }
    if let Some(l) = labels.iter().find(|l| l.len() != n_labels) {
        return Err(Error::LengthMismatch {
            expected: n_labels,
            actual: l.len(),
        });
    }

    let n = vectors.len() as f64;
    let mut total = vec![0.0; dim];
    for v in vectors {
        for &(i, x) in &v.entries {
            total[i] += x;
        }
    }

    let mut scores = vec![
        TermScore {
            chi2: 0.0,
            p_value: 1.0,
            label: None
        };
        dim
    ];
    let mut warnings = Vec::new();
    let mut positive_mass = vec![0.0; dim];
    for label in 0..n_labels {
        let n_pos = labels.iter().filter(|l| l.get(label)).count();
        if n_pos == 0 || n_pos == vectors.len() {
            warnings.push(format!(
                "label {label} is degenerate ({n_pos} of {} positive); no terms selected for it",
                vectors.len()
            ));
            continue;
        }
        positive_mass.iter_mut().for_each(|m| *m = 0.0);
        for (v, l) in vectors.iter().zip(labels) {
            if l.get(label) {
                for &(i, x) in &v.entries {
                    positive_mass[i] += x;
                }
            }
        }
        let pos_share = n_pos as f64 / n;
        for term in 0..dim {
            if total[term] <= 0.0 {
                continue;
            }
            let expected_pos = total[term] * pos_share;
            let expected_neg = total[term] - expected_pos;
            let observed_pos = positive_mass[term];
            let observed_neg = total[term] - observed_pos;
            let chi2 = (observed_pos - expected_pos).powi(2) / expected_pos
                + (observed_neg - expected_neg).powi(2) / expected_neg;
            let p_value = chi2_survival(chi2);
            let best = &mut scores[term];
            if best.label.is_none() || p_value < best.p_value {
                *best = TermScore {
                    chi2,
                    p_value,
                    label: Some(label),
                };
            }
        }
    }

    let kept: Vec<usize> = if p_threshold >= 1.0 {
        (0..dim).collect()
    } else {
        (0..dim)
            .filter(|&t| scores[t].p_value < p_threshold)
            .collect()
    };
    if kept.is_empty() {
        return Err(Error::NoFeaturesSelected { p_threshold });
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Chi2Selection {
        kept,
        p_threshold,
        scores,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erfc;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::raw(
            values.len(),
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        )
    }

    fn separating_fixture() -> (Vec<FeatureVector>, Vec<LabelVector>) {
        // term 0 only in positives, term 1 equal mass everywhere
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let pos = i < 10;
            vectors.push(fv(&[if pos { 1.0 } else { 0.0 }, 0.5]));
            labels.push(LabelVector(vec![pos as u8]));
        }
        (vectors, labels)
    }

    #[test]
    fn survival_matches_reference_values() {
        // scipy.stats.chi2.sf(x, 1)
        assert!((chi2_survival(10.0) - 0.001565402258002549).abs() < 1e-12);
        assert!((chi2_survival(0.5) - 0.47950012218695337).abs() < 1e-12);
        assert!((chi2_survival(25.0) - 5.733031437583875e-07).abs() < 1e-15);
        assert_eq!(chi2_survival(0.0), 1.0);
    }

    #[test]
    fn survival_agrees_with_erfc_closed_form() {
        for x in [1e-6_f64, 0.01, 0.3, 1.0, 3.841458820694124, 7.5, 20.0, 60.0] {
            let closed_form = erfc((x / 2.0).sqrt());
            assert!((chi2_survival(x) - closed_form).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn separating_term_kept_balanced_term_dropped() {
        let (v, l) = separating_fixture();
        let sel = chi2_select(&v, &l, 0.05).unwrap();
        assert!((sel.scores[0].chi2 - 10.0).abs() < 1e-9);
        assert!(sel.scores[0].p_value < 0.05);
        assert_eq!(sel.scores[1].chi2, 0.0);
        assert_eq!(sel.scores[1].p_value, 1.0);
        assert_eq!(sel.kept, [0]);
    }

    #[test]
    fn threshold_one_keeps_all() {
        let (v, l) = separating_fixture();
        assert_eq!(chi2_select(&v, &l, 1.0).unwrap().kept, [0, 1]);
    }

    #[test]
    fn degenerate_label_warns() {
        let (v, mut l) = separating_fixture();
        for row in &mut l {
            row.0.push(1);
        }
        let sel = chi2_select(&v, &l, 0.05).unwrap();
        assert_eq!(sel.warnings.len(), 1);
        assert_eq!(sel.kept, [0]);
    }

    #[test]
    fn nothing_significant_is_an_error() {
        let v = vec![fv(&[1.0]), fv(&[1.0]), fv(&[1.0]), fv(&[1.0])];
        let l: Vec<_> = [1, 0, 1, 0].iter().map(|&b| LabelVector(vec![b])).collect();
        assert!(matches!(
            chi2_select(&v, &l, 0.05),
            Err(Error::NoFeaturesSelected { .. })
        ));
    }

    #[test]
    fn projection() {
        let (v, l) = separating_fixture();
        let sel = chi2_select(&v, &l, 0.05).unwrap();
        assert_eq!(sel.project(&v[0]), [1.0]);
        assert_eq!(sel.project(&v[15]), [0.0]);
    }
}
