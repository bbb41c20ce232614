//! Rule-based refinement of base predictions with a distinguishing token
//! table.
//!
//! Per type `t`: a positive-token hit with no negative hit turns a predicted
//! 0 into 1; a negative-token hit with no positive hit turns a predicted 1
//! into 0. When both fire, or neither, the base prediction stands.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::ext_real;
use crate::classifier::{PredictionRow, PredictionVector};
use crate::corpus::{LabelVector, TypeVocabulary};
use crate::distinguish::DistinguishingTokenTable;
use crate::error::{Error, Result};
use crate::syntax::{ElementKind, SyntacticElements};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipDirection {
    #[serde(rename = "0->1")]
    Up,
    #[serde(rename = "1->0")]
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flip {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub type_index: usize,
    pub direction: FlipDirection,
    pub token: String,
    pub element: ElementKind,
    #[serde(with = "ext_real")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementAudit {
    pub cases: usize,
    pub affected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_rate: Option<f64>,
    pub flips: Vec<Flip>,
}

struct Hit<'a> {
    token: &'a str,
    kind: ElementKind,
    score: f64,
}

/// First hit in element-kind order, then token order.
fn first_hit<'a>(
    view: &'a SyntacticElements,
    side: impl Fn(ElementKind) -> Option<&'a std::collections::BTreeMap<String, f64>>,
) -> Option<Hit<'a>> {
    ElementKind::ALL.into_iter().find_map(|kind| {
        let tokens = side(kind)?;
        view.bucket(kind).iter().find_map(|tok| {
            tokens.get(tok).map(|&score| Hit {
                token: tok,
                kind,
                score,
            })
        })
    })
}

/// Refines one prediction. Flips carry an empty `id`; [`refine_batch`] fills
/// it in.
pub fn refine_one(
    z: &PredictionVector,
    elems: &SyntacticElements,
    table: &DistinguishingTokenTable,
) -> Result<(PredictionVector, Vec<Flip>)> {
    if z.len() != table.types.len() {
        return Err(Error::VocabularyMismatch(format!(
            "prediction has {} types, table has {}",
            z.len(),
            table.types.len()
        )));
    }
    let view = table.channel.view(elems);
    let mut refined = z.clone();
    let mut flips = Vec::new();
    for t in 0..z.len() {
        let pos = first_hit(&view, |k| table.positive_tokens(t, k));
        let neg = first_hit(&view, |k| table.negative_tokens(t, k));
        let (hit, direction, bit) = match (pos, neg, z.bits.get(t)) {
            (Some(hit), None, false) => (hit, FlipDirection::Up, 1),
            (None, Some(hit), true) => (hit, FlipDirection::Down, 0),
            _ => continue,
        };
        refined.bits.0[t] = bit;
        flips.push(Flip {
            id: String::new(),
            type_name: table.types.names()[t].clone(),
            type_index: t,
            direction,
            token: hit.token.to_owned(),
            element: hit.kind,
            score: hit.score,
        });
    }
    Ok((refined, flips))
}

/// Refines a batch of predictions. With `truth`, the audit also counts how
/// many flipped cells now agree with the ground truth.
pub fn refine_batch(
    predictions: &[(String, PredictionVector)],
    elements: &HashMap<String, SyntacticElements>,
    table: &DistinguishingTokenTable,
    truth: Option<&HashMap<String, LabelVector>>,
) -> Result<(Vec<(String, PredictionVector)>, RefinementAudit)> {
    let mut refined = Vec::with_capacity(predictions.len());
    let mut flips = Vec::new();
    let mut corrected = 0;
    for (id, z) in predictions {
        let elems = elements
            .get(id)
            .ok_or_else(|| Error::MissingElements(id.clone()))?;
        let (z2, mut f) = refine_one(z, elems, table)?;
        if let Some(truth) = truth {
            let y = truth
                .get(id)
                .ok_or_else(|| Error::IdMismatch(format!("no ground truth for `{id}`")))?;
            if y.len() != z2.len() {
                return Err(Error::LengthMismatch {
                    expected: z2.len(),
                    actual: y.len(),
                });
            }
            corrected += f.iter().filter(|fl| y.0[fl.type_index] == z2.bits.0[fl.type_index]).count();
        }
        for fl in &mut f {
            fl.id = id.clone();
        }
        flips.extend(f);
        refined.push((id.clone(), z2));
    }
    flips.sort_by(|a, b| a.id.cmp(&b.id).then(a.type_index.cmp(&b.type_index)));
    let affected = flips.len();
    let corrected = truth.map(|_| corrected);
    let accuracy_rate = corrected
        .filter(|_| affected > 0)
        .map(|c| c as f64 / affected as f64);
    Ok((
        refined,
        RefinementAudit {
            cases: predictions.len(),
            affected,
            corrected,
            accuracy_rate,
            flips,
        },
    ))
}

/// Reads predictions `{"id": str, "bits": [0|1, ...]}` produced by any model
/// over `types`.
pub fn load_external_predictions(
    path: &Path,
    types: &TypeVocabulary,
) -> Result<Vec<(String, PredictionVector)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PredictionRow =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.to_owned(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        out.push(parse_row(row, types)?);
    }
    Ok(out)
}

pub fn parse_row(row: PredictionRow, types: &TypeVocabulary) -> Result<(String, PredictionVector)> {
    if row.bits.len() != types.len() {
        return Err(Error::LengthMismatch {
            expected: types.len(),
            actual: row.bits.len(),
        });
    }
    let mut bits = Vec::with_capacity(row.bits.len());
    for &b in &row.bits {
        match b {
            0 | 1 => bits.push(b as u8),
            value => return Err(Error::NonBinary { id: row.id, value }),
        }
    }
    Ok((
        row.id,
        PredictionVector {
            bits: LabelVector(bits),
            scores: row
                .scores
                .map(|s| s.into_iter().map(|v| v.0).collect()),
        },
    ))
}
