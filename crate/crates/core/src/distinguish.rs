//! Mining of positive and negative distinguishing tokens per
//! (type, element kind) from a training split.
//!
//! For a token `c`, element kind `e` and type `t`, the prevalence
//! `prev(c, e, t)` is the fraction of training cases labeled `t` whose `e`
//! bucket contains `c`. A token is positive for `(t, e)` when
//! `prev(c, e, t) / max_{t' != t} prev(c, e, t')` exceeds `theta`, and
//! negative when `min_{t' != t} prev(c, e, t') / prev(c, e, t)` does. A zero
//! denominator with a non-zero numerator scores `+inf`; a zero numerator
//! scores 0. Only types with at least one training case take part in the
//! max/min.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::artifact::ext_real::ExtReal;
use crate::corpus::{Dataset, TypeVocabulary};
use crate::error::{Error, Result};
use crate::syntax::{ElementKind, SyntacticElements};

/// Which token granularity is indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenChannel {
    /// Raw bucket tokens only.
    Raw,
    /// Raw tokens plus their lowercase sub-tokens.
    #[default]
    WithSubtokens,
}

impl TokenChannel {
    pub fn view(self, elements: &SyntacticElements) -> SyntacticElements {
        match self {
            TokenChannel::Raw => elements.clone(),
            TokenChannel::WithSubtokens => elements.with_subtokens(),
        }
    }
}

type TokenKey = (ElementKind, String);

#[derive(Debug, Clone)]
pub struct PrevalenceTable {
    pub types: TypeVocabulary,
    /// `|D_t|` per type index.
    pub case_totals: Vec<usize>,
    /// `count(c, e, D_t)` per type index, for every (kind, token) observed.
    pub counts: BTreeMap<TokenKey, Vec<usize>>,
    /// Number of distinct training functions whose bucket holds the token.
    pub support: BTreeMap<TokenKey, usize>,
    pub channel: TokenChannel,
    pub warnings: Vec<String>,
}

impl PrevalenceTable {
    /// Type indices with at least one training case.
    pub fn active_types(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.types.len()).filter(|&t| self.case_totals[t] > 0)
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.case_totals.get(t).is_some_and(|&n| n > 0)
    }

    pub fn count(&self, token: &str, kind: ElementKind, t: usize) -> usize {
        self.counts
            .get(&(kind, token.to_owned()))
            .map_or(0, |c| c[t])
    }

    pub fn prev(&self, token: &str, kind: ElementKind, t: usize) -> f64 {
        if self.case_totals[t] == 0 {
            return 0.0;
        }
        self.count(token, kind, t) as f64 / self.case_totals[t] as f64
    }

    fn prev_from(&self, counts: &[usize], t: usize) -> f64 {
        counts[t] as f64 / self.case_totals[t] as f64
    }

    fn others<'a>(&'a self, counts: &'a [usize], t: usize) -> impl Iterator<Item = f64> + 'a {
        self.active_types()
            .filter(move |&o| o != t)
            .map(move |o| self.prev_from(counts, o))
    }

    fn dis_plus_counts(&self, counts: &[usize], t: usize) -> f64 {
        let own = self.prev_from(counts, t);
        if own == 0.0 {
            return 0.0;
        }
        let max_other = self.others(counts, t).fold(0.0, f64::max);
        if max_other == 0.0 {
            f64::INFINITY
        } else {
            own / max_other
        }
    }

    fn dis_minus_counts(&self, counts: &[usize], t: usize) -> f64 {
        let min_other = self.others(counts, t).fold(f64::INFINITY, f64::min);
        if min_other == 0.0 || min_other == f64::INFINITY {
            return 0.0;
        }
        let own = self.prev_from(counts, t);
        if own == 0.0 {
            f64::INFINITY
        } else {
            min_other / own
        }
    }
}

pub fn build_prevalence(
    train: &Dataset,
    elements: &[SyntacticElements],
    channel: TokenChannel,
) -> Result<PrevalenceTable> {
    if elements.len() != train.len() {
        return Err(Error::LengthMismatch {
            expected: train.len(),
            actual: elements.len(),
        });
    }
    let types = train.vocabulary.clone();
    let n_types = types.len();
    let mut case_totals = vec![0usize; n_types];
    let mut counts: BTreeMap<TokenKey, Vec<usize>> = BTreeMap::new();
    let mut support: BTreeMap<TokenKey, usize> = BTreeMap::new();

    for (f, elems) in train.functions.iter().zip(elements) {
        let type_ids: Vec<usize> = f
            .labels
            .iter()
            .map(|l| {
                types.position(l).ok_or_else(|| Error::UnknownLabel { label: l.clone() })
            })
            .collect::<Result<_>>()?;
        for &t in &type_ids {
            case_totals[t] += 1;
        }
        let view = channel.view(elems);
        for kind in ElementKind::ALL {
            for token in view.bucket(kind) {
                let key = (kind, token.clone());
                *support.entry(key.clone()).or_default() += 1;
                let row = counts.entry(key).or_insert_with(|| vec![0; n_types]);
                for &t in &type_ids {
                    row[t] += 1;
                }
            }
        }
    }

    let warnings: Vec<String> = types
        .names()
        .iter()
        .zip(&case_totals)
        .filter(|(_, &n)| n == 0)
        .map(|(name, _)| format!("type `{name}` has no training cases; excluded from mining"))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(PrevalenceTable {
        types,
        case_totals,
        counts,
        support,
        channel,
        warnings,
    })
}

/// Positive distinguishing score of `token` for type index `t`.
pub fn dis_plus(token: &str, kind: ElementKind, t: usize, table: &PrevalenceTable) -> f64 {
    match table.counts.get(&(kind, token.to_owned())) {
        Some(c) if table.is_active(t) => table.dis_plus_counts(c, t),
        _ => 0.0,
    }
}

/// Negative distinguishing score of `token` for type index `t`.
pub fn dis_minus(token: &str, kind: ElementKind, t: usize, table: &PrevalenceTable) -> f64 {
    match table.counts.get(&(kind, token.to_owned())) {
        Some(c) if table.is_active(t) => table.dis_minus_counts(c, t),
        _ => 0.0,
    }
}

/// `(type index, element kind)` -> token -> score.
pub type TokenScores = BTreeMap<(usize, ElementKind), BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct DistinguishingTokenTable {
    pub types: TypeVocabulary,
    pub theta: f64,
    pub min_support: usize,
    pub channel: TokenChannel,
    pub positive: TokenScores,
    pub negative: TokenScores,
    pub upstream: BTreeMap<String, String>,
}

impl DistinguishingTokenTable {
    /// A table with no tokens; refinement with it is the identity.
    pub fn empty(types: TypeVocabulary) -> Self {
        Self {
            types,
            theta: 1.0,
            min_support: 1,
            channel: TokenChannel::default(),
            positive: TokenScores::new(),
            negative: TokenScores::new(),
            upstream: BTreeMap::new(),
        }
    }

    pub fn positive_tokens(&self, t: usize, kind: ElementKind) -> Option<&BTreeMap<String, f64>> {
        self.positive.get(&(t, kind))
    }

    pub fn negative_tokens(&self, t: usize, kind: ElementKind) -> Option<&BTreeMap<String, f64>> {
        self.negative.get(&(t, kind))
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    /// Total number of (type, kind, token) entries on each side.
    pub fn sizes(&self) -> (usize, usize) {
        let count = |s: &TokenScores| s.values().map(BTreeMap::len).sum();
        (count(&self.positive), count(&self.negative))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningParams {
    pub theta: f64,
    pub min_support: usize,
    pub channel: TokenChannel,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            min_support: 1,
            channel: TokenChannel::WithSubtokens,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 1.0) || !self.theta.is_finite() {
            return Err(Error::Config(format!(
                "theta must be a finite real >= 1, got {}",
                self.theta
            )));
        }
        if self.min_support < 1 {
            return Err(Error::Config("min_support must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mines the distinguishing token table from the training split. `elements`
/// is aligned with `train.functions`.
pub fn mine(
    train: &Dataset,
    elements: &[SyntacticElements],
    params: MiningParams,
) -> Result<DistinguishingTokenTable> {
    params.validate()?;
    let prevalence = build_prevalence(train, elements, params.channel)?;
    mine_from_prevalence(&prevalence, params)
}

pub fn mine_from_prevalence(
    prevalence: &PrevalenceTable,
    params: MiningParams,
) -> Result<DistinguishingTokenTable> {
    params.validate()?;
    let active: Vec<usize> = prevalence.active_types().collect();
    if active.len() < 2 {
        return Err(Error::SingleType);
    }
    let mut positive = TokenScores::new();
    let mut negative = TokenScores::new();
    for ((kind, token), counts) in &prevalence.counts {
        if prevalence.support[&(*kind, token.clone())] < params.min_support {
            continue;
        }
        for &t in &active {
            let plus = prevalence.dis_plus_counts(counts, t);
            if plus > params.theta {
                positive
                    .entry((t, *kind))
                    .or_default()
                    .insert(token.clone(), plus);
            }
            let minus = prevalence.dis_minus_counts(counts, t);
            if minus > params.theta {
                negative
                    .entry((t, *kind))
                    .or_default()
                    .insert(token.clone(), minus);
            }
        }
    }
    Ok(DistinguishingTokenTable {
        types: prevalence.types.clone(),
        theta: params.theta,
        min_support: params.min_support,
        channel: prevalence.channel,
        positive,
        negative,
        upstream: BTreeMap::new(),
    })
}

// Persisted form: `{"<type>/<element>": {"tok": score | "inf"}}`, keys sorted.
#[derive(Serialize, Deserialize)]
struct TableWire {
    channel: TokenChannel,
    min_support: usize,
    negative: BTreeMap<String, BTreeMap<String, ExtReal>>,
    positive: BTreeMap<String, BTreeMap<String, ExtReal>>,
    theta: f64,
    types: TypeVocabulary,
    upstream: BTreeMap<String, String>,
}

fn scores_to_wire(
    types: &TypeVocabulary,
    scores: &TokenScores,
) -> BTreeMap<String, BTreeMap<String, ExtReal>> {
    scores
        .iter()
        .map(|((t, kind), tokens)| {
            (
                format!("{}/{}", types.names()[*t], kind),
                tokens
                    .iter()
                    .map(|(tok, &s)| (tok.clone(), ExtReal(s)))
                    .collect(),
            )
        })
        .collect()
}

fn scores_from_wire(
    types: &TypeVocabulary,
    wire: BTreeMap<String, BTreeMap<String, ExtReal>>,
) -> std::result::Result<TokenScores, String> {
    let mut out = TokenScores::new();
    for (key, tokens) in wire {
        let (name, kind) = key
            .rsplit_once('/')
            .ok_or_else(|| format!("bad table key `{key}`"))?;
        let t = types
            .position(name)
            .ok_or_else(|| format!("unknown type `{name}` in table key"))?;
        let kind = ElementKind::parse(kind).ok_or_else(|| format!("unknown element `{kind}`"))?;
        out.insert(
            (t, kind),
            tokens.into_iter().map(|(tok, s)| (tok, s.0)).collect(),
        );
    }
    Ok(out)
}

impl Serialize for DistinguishingTokenTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableWire {
            channel: self.channel,
            min_support: self.min_support,
            negative: scores_to_wire(&self.types, &self.negative),
            positive: scores_to_wire(&self.types, &self.positive),
            theta: self.theta,
            types: self.types.clone(),
            upstream: self.upstream.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistinguishingTokenTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = TableWire::deserialize(d)?;
        let positive = scores_from_wire(&w.types, w.positive).map_err(D::Error::custom)?;
        let negative = scores_from_wire(&w.types, w.negative).map_err(D::Error::custom)?;
        Ok(Self {
            types: w.types,
            theta: w.theta,
            min_support: w.min_support,
            channel: w.channel,
            positive,
            negative,
            upstream: w.upstream,
        })
    }
}

/// All tokens of a table, for diagnostics.
pub fn table_tokens(table: &DistinguishingTokenTable) -> BTreeSet<&str> {
    table
        .positive
        .values()
        .chain(table.negative.values())
        .flat_map(|m| m.keys().map(String::as_str))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VulnFunction;

    fn func(id: usize, labels: &[&str]) -> VulnFunction {
        VulnFunction {
            id: format!("f{id}"),
            source: "x;".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn calls(tokens: &[&str]) -> SyntacticElements {
        SyntacticElements {
            call: tokens.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    fn corpus(rows: Vec<(&[&str], SyntacticElements)>, types: &[&str]) -> (Dataset, Vec<SyntacticElements>) {
        let (fs, es): (Vec<_>, Vec<_>) = rows
            .into_iter()
            .enumerate()
            .map(|(i, (l, e))| (func(i, l), e))
            .unzip();
        (
            Dataset::new(fs, TypeVocabulary::new(types.iter().copied()).unwrap()).unwrap(),
            es,
        )
    }

    const RAW: MiningParams = MiningParams {
        theta: 1.0,
        min_support: 1,
        channel: TokenChannel::Raw,
    };

    #[test]
    fn prevalence_counts() {
        let (d, e) = corpus(
            vec![
                (&["t"], calls(&["memcpy"])),
                (&["t"], calls(&["memcpy"])),
                (&["t"], calls(&["memcpy"])),
                (&["t"], calls(&[])),
                (&["t1", "t2"], calls(&["free"])),
            ],
            &["t", "t1", "t2"],
        );
        let p = build_prevalence(&d, &e, TokenChannel::Raw).unwrap();
        assert_eq!(p.prev("memcpy", ElementKind::Call, 0), 0.75);
        assert_eq!(p.prev("strcpy", ElementKind::Call, 0), 0.0);
        assert_eq!(p.count("free", ElementKind::Call, 1), 1);
        assert_eq!(p.count("free", ElementKind::Call, 2), 1);
        assert_eq!(p.case_totals, [4, 1, 1]);
    }

    #[test]
    fn missing_type_warns() {
        let (d, e) = corpus(
            vec![(&["a"], calls(&["x"])), (&["b"], calls(&["y"]))],
            &["a", "b", "c"],
        );
        let p = build_prevalence(&d, &e, TokenChannel::Raw).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.active_types().collect::<Vec<_>>(), [0, 1]);
    }

    fn prevalence_with(t_counts: &[(usize, usize)]) -> PrevalenceTable {
        // (count, total) per type for the single call token "c"
        let n = t_counts.len();
        PrevalenceTable {
            types: TypeVocabulary::new((0..n).map(|i| format!("t{i}"))).unwrap(),
            case_totals: t_counts.iter().map(|&(_, tot)| tot).collect(),
            counts: BTreeMap::from([(
                (ElementKind::Call, "c".to_owned()),
                t_counts.iter().map(|&(c, _)| c).collect(),
            )]),
            support: BTreeMap::from([((ElementKind::Call, "c".to_owned()), 1)]),
            channel: TokenChannel::Raw,
            warnings: vec![],
        }
    }

    #[test]
    fn dis_plus_cases() {
        let p = prevalence_with(&[(3, 4), (1, 4)]);
        assert_eq!(dis_plus("c", ElementKind::Call, 0, &p), 3.0);
        let p = prevalence_with(&[(3, 4), (0, 4), (0, 2)]);
        assert_eq!(dis_plus("c", ElementKind::Call, 0, &p), f64::INFINITY);
        let p = prevalence_with(&[(0, 4), (2, 4)]);
        assert_eq!(dis_plus("c", ElementKind::Call, 0, &p), 0.0);
    }

    #[test]
    fn dis_minus_cases() {
        let p = prevalence_with(&[(0, 10), (2, 10), (5, 10)]);
        assert_eq!(dis_minus("c", ElementKind::Call, 0, &p), f64::INFINITY);
        let p = prevalence_with(&[(1, 10), (3, 10), (6, 10)]);
        assert!((dis_minus("c", ElementKind::Call, 0, &p) - 3.0).abs() < 1e-12);
        let p = prevalence_with(&[(1, 10), (0, 10), (6, 10)]);
        assert_eq!(dis_minus("c", ElementKind::Call, 0, &p), 0.0);
    }

    fn strcpy_fixture() -> (Dataset, Vec<SyntacticElements>) {
        corpus(
            vec![
                (&["t1"], calls(&["strcpy", "len"])),
                (&["t1"], calls(&["strcpy"])),
                (&["t1"], calls(&["strcpy", "len"])),
                (&["t2"], calls(&["free", "len"])),
                (&["t2"], calls(&["free"])),
                (&["t2"], calls(&["len"])),
            ],
            &["t1", "t2"],
        )
    }

    #[test]
    fn mine_exclusive_token() {
        let (d, e) = strcpy_fixture();
        let table = mine(&d, &e, RAW).unwrap();
        let call = ElementKind::Call;
        assert_eq!(table.positive_tokens(0, call).unwrap()["strcpy"], f64::INFINITY);
        assert_eq!(table.negative_tokens(1, call).unwrap()["strcpy"], f64::INFINITY);
        assert!(!table.positive_tokens(1, call).unwrap().contains_key("strcpy"));
        // len: 2/3 vs 2/3 -> neither side
        assert!(!table.positive_tokens(0, call).unwrap().contains_key("len"));
        assert!(!table.negative_tokens(0, call).is_some_and(|m| m.contains_key("len")));
    }

    #[test]
    fn equal_prevalence_is_not_distinguishing() {
        let (d, e) = corpus(
            vec![
                (&["a"], calls(&["x"])),
                (&["a"], calls(&[])),
                (&["b"], calls(&["x"])),
                (&["b"], calls(&[])),
            ],
            &["a", "b"],
        );
        assert!(mine(&d, &e, RAW).unwrap().is_empty());
    }

    #[test]
    fn min_support_excludes() {
        let (d, e) = strcpy_fixture();
        let table = mine(&d, &e, MiningParams { min_support: 4, ..RAW }).unwrap();
        let (pos, neg) = (table.positive, table.negative);
        for m in pos.values().chain(neg.values()) {
            assert!(!m.contains_key("strcpy"));
        }
    }

    #[test]
    fn single_type_is_an_error() {
        let (d, e) = corpus(vec![(&["a"], calls(&["x"]))], &["a", "b"]);
        assert!(matches!(mine(&d, &e, RAW), Err(Error::SingleType)));
    }

    #[test]
    fn theta_below_one_rejected() {
        let (d, e) = strcpy_fixture();
        assert!(mine(&d, &e, MiningParams { theta: 0.5, ..RAW }).is_err());
    }

    #[test]
    fn subtoken_channel_indexes_both() {
        let (d, e) = corpus(
            vec![(&["a"], calls(&["buf_cpy"])), (&["b"], calls(&["free"]))],
            &["a", "b"],
        );
        let table = mine(&d, &e, MiningParams::default()).unwrap();
        let pos = table.positive_tokens(0, ElementKind::Call).unwrap();
        assert!(pos.contains_key("buf_cpy") && pos.contains_key("buf") && pos.contains_key("cpy"));
    }

    #[test]
    fn json_round_trip_with_infinity() {
        let (d, e) = strcpy_fixture();
        let table = mine(&d, &e, RAW).unwrap();
        let json = serde_json::to_string(&table).unwrap();
        assert!(json.starts_with(r#"{"channel":"raw","min_support":1,"negative":{"t1/call":{"free":"inf"}"#));
        assert!(json.contains(r#""t1/call":{"strcpy":"inf"}"#));
        let back: DistinguishingTokenTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
    }
}
