use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use vulntype::classifier::PredictionVector;
use vulntype::corpus::{split_dataset, Dataset, LabelVector, SplitSpec, TypeVocabulary, VulnFunction};
use vulntype::distinguish::{mine, DistinguishingTokenTable, MiningParams, TokenChannel};
use vulntype::features::{build_ngrams, chi2_select, fit_tfidf, transform, FeatureVector};
use vulntype::metrics::{evaluate, EmptyUnion, MetricsReport};
use vulntype::refine::refine_batch;
use vulntype::syntax::{elements_of, lex, ElementKind, SyntacticElements};
use vulntype::Error;

const TOL: f64 = 1e-12;

fn label_matrix(max_n: usize, max_t: usize) -> impl Strategy<Value = (Vec<LabelVector>, Vec<LabelVector>)> {
    (1..=max_n, 1..=max_t).prop_flat_map(|(n, t)| {
        let row = || prop::collection::vec(0u8..=1, t).prop_map(LabelVector);
        (
            prop::collection::vec(row(), n),
            prop::collection::vec(row(), n),
        )
    })
}

fn report(y: &[LabelVector], z: &[LabelVector], empty: EmptyUnion) -> MetricsReport {
    let names: Vec<String> = (0..y[0].len()).map(|j| format!("t{j}")).collect();
    evaluate(y, z, &TypeVocabulary::new(names).unwrap(), empty).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

proptest! {
    #[test]
    fn swapping_truth_and_prediction_swaps_precision_and_recall((y, z) in label_matrix(20, 5)) {
        let a = report(&y, &z, EmptyUnion::One);
        let b = report(&z, &y, EmptyUnion::One);
        prop_assert!(close(a.exact_match, b.exact_match));
        prop_assert!(close(a.hamming, b.hamming));
        prop_assert!(close(a.accuracy, b.accuracy));
        for (p, q) in [(a.micro, b.micro), (a.macro_, b.macro_), (a.samples, b.samples)] {
            prop_assert!(close(p.precision, q.recall));
            prop_assert!(close(p.recall, q.precision));
            prop_assert!(close(p.f1, q.f1));
        }
        for (name, s) in &a.per_type {
            let r = b.per_type[name];
            prop_assert!(close(s.precision, r.recall) && close(s.f1, r.f1));
        }
    }

    #[test]
    fn row_order_does_not_matter((y, z) in label_matrix(20, 5), rot in 0usize..20) {
        let k = rot % y.len();
        let (mut y2, mut z2) = (y.clone(), z.clone());
        y2.rotate_left(k);
        z2.rotate_left(k);
        y2.reverse();
        z2.reverse();
        let a = report(&y, &z, EmptyUnion::One);
        let b = report(&y2, &z2, EmptyUnion::One);
        prop_assert!(close(a.exact_match, b.exact_match));
        prop_assert!(close(a.hamming, b.hamming));
        prop_assert!(close(a.accuracy, b.accuracy));
        for (p, q) in [(a.micro, b.micro), (a.macro_, b.macro_), (a.weighted, b.weighted), (a.samples, b.samples)] {
            prop_assert!(close(p.precision, q.precision) && close(p.recall, q.recall) && close(p.f1, q.f1));
        }
        prop_assert_eq!(a.zero_divisions, b.zero_divisions);
    }

    #[test]
    fn exact_match_bounds_hamming((y, z) in label_matrix(25, 6)) {
        let r = report(&y, &z, EmptyUnion::One);
        prop_assert!(r.exact_match <= r.hamming + TOL);
        prop_assert!(r.hamming <= 1.0 + TOL);
        for v in [r.micro.f1, r.macro_.f1, r.weighted.f1, r.samples.f1, r.accuracy] {
            prop_assert!((0.0..=1.0 + TOL).contains(&v));
        }
    }

    #[test]
    fn perfect_predictions_score_one((y, _) in label_matrix(20, 5)) {
        let r = report(&y, &y, EmptyUnion::One);
        prop_assert_eq!(r.exact_match, 1.0);
        prop_assert_eq!(r.hamming, 1.0);
        prop_assert_eq!(r.accuracy, 1.0);
    }
}

// miner

const TOKENS: [&str; 8] = ["buf", "len", "memcpy", "free", "NULL", "i", "readLine", "ptr_out"];

fn corpus_strategy() -> impl Strategy<Value = (Dataset, Vec<SyntacticElements>)> {
    (2usize..=4, 2usize..=25).prop_flat_map(|(n_types, n_funcs)| {
        let func = (
            prop::collection::btree_set(0..n_types, 1..=2),
            prop::collection::vec(prop::collection::btree_set(0..TOKENS.len(), 0..4), 4),
        );
        prop::collection::vec(func, n_funcs).prop_map(move |funcs| {
            let types: Vec<String> = (0..n_types).map(|t| format!("T{t}")).collect();
            let mut functions = Vec::new();
            let mut elements = Vec::new();
            for (i, (labels, buckets)) in funcs.into_iter().enumerate() {
                functions.push(VulnFunction {
                    id: format!("f{i}"),
                    source: "int f(void);".into(),
                    labels: labels.iter().map(|&t| types[t].clone()).collect(),
                });
                let mut e = SyntacticElements::default();
                for (kind, toks) in ElementKind::ALL.into_iter().zip(buckets) {
                    e.bucket_mut(kind).extend(toks.iter().map(|&k| TOKENS[k].to_owned()));
                }
                elements.push(e);
            }
            let vocab = TypeVocabulary::new(types).unwrap();
            (Dataset::new(functions, vocab).unwrap(), elements)
        })
    })
}

fn params(theta: f64, min_support: usize) -> MiningParams {
    MiningParams {
        theta,
        min_support,
        channel: TokenChannel::Raw,
    }
}

fn contained_in(small: &DistinguishingTokenTable, big: &DistinguishingTokenTable) -> bool {
    [(&small.positive, &big.positive), (&small.negative, &big.negative)]
        .into_iter()
        .all(|(s, b)| {
            s.iter().all(|(key, toks)| {
                toks.iter()
                    .all(|(tok, v)| b.get(key).and_then(|m| m.get(tok)) == Some(v))
            })
        })
}

proptest! {
    #[test]
    fn raising_theta_or_support_only_removes_tokens(
        (train, elements) in corpus_strategy(),
        theta in 1.0f64..3.0,
        bump in 0.0f64..3.0,
        support in 1usize..3,
    ) {
        let Ok(loose) = mine(&train, &elements, params(theta, support)) else {
            return Ok(());
        };
        let strict_theta = mine(&train, &elements, params(theta + bump, support)).unwrap();
        let strict_support = mine(&train, &elements, params(theta, support + 1)).unwrap();
        prop_assert!(contained_in(&strict_theta, &loose));
        prop_assert!(contained_in(&strict_support, &loose));
    }

    #[test]
    fn a_token_never_both_confirms_and_refutes_a_type((train, elements) in corpus_strategy(), theta in 1.0f64..2.0) {
        let Ok(table) = mine(&train, &elements, params(theta, 1)) else {
            return Ok(());
        };
        for (key, pos) in &table.positive {
            if let Some(neg) = table.negative.get(key) {
                prop_assert!(pos.keys().all(|tok| !neg.contains_key(tok)), "{:?}", key);
            }
        }
        for m in table.positive.values().chain(table.negative.values()) {
            prop_assert!(m.values().all(|&v| v > theta));
        }
    }

    #[test]
    fn two_types_mirror_each_other((train, elements) in corpus_strategy(), theta in 1.0f64..2.0) {
        let active: BTreeSet<&String> = train.functions.iter().flat_map(|f| &f.labels).collect();
        prop_assume!(active.len() == 2);
        let idx: Vec<usize> = active.iter().map(|n| train.vocabulary.position(n).unwrap()).collect();
        let table = mine(&train, &elements, params(theta, 1)).unwrap();
        for kind in ElementKind::ALL {
            for (a, b) in [(idx[0], idx[1]), (idx[1], idx[0])] {
                prop_assert_eq!(table.positive_tokens(a, kind), table.negative_tokens(b, kind));
            }
        }
    }

    #[test]
    fn refinement_is_idempotent(
        (train, elements) in corpus_strategy(),
        theta in 1.0f64..2.5,
        seed_bits in prop::collection::vec(0u8..=1, 100),
    ) {
        let Ok(table) = mine(&train, &elements, params(theta, 1)) else {
            return Ok(());
        };
        let t = train.vocabulary.len();
        let preds: Vec<(String, PredictionVector)> = train
            .functions
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let bits = (0..t).map(|j| seed_bits[(i * t + j) % seed_bits.len()]).collect();
                (f.id.clone(), PredictionVector::from_bits(bits))
            })
            .collect();
        let by_id: HashMap<String, SyntacticElements> = train
            .functions
            .iter()
            .zip(&elements)
            .map(|(f, e)| (f.id.clone(), e.clone()))
            .collect();
        let (once, _) = refine_batch(&preds, &by_id, &table, None).unwrap();
        let (twice, audit) = refine_batch(&once, &by_id, &table, None).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(audit.affected, 0);

        let empty = DistinguishingTokenTable::empty(train.vocabulary.clone());
        let (same, audit) = refine_batch(&preds, &by_id, &empty, None).unwrap();
        prop_assert_eq!(same, preds);
        prop_assert_eq!(audit.affected, 0);
    }
}

// lexer and extractor

const PIECES: &[&str] = &[
    "x = f(a, b);",
    "if (n > 0) { n--; }",
    "while (p != NULL) p = p->next;",
    "return len;",
    "buf[i] += 2;",
    "for (i = 0; i < 10; i++) { sum = sum + i; }",
    "s = \"a; b\";",
    "c = 'x';",
    "obj.run(1.5e3, 0x1F);",
    "if (a && !b) { return -1; } else { g(); }",
    "y = (int) sizeof(buf);",
    "// note\n",
    "/* block */",
    "do { k <<= 1; } while (k < m);",
];

fn program() -> impl Strategy<Value = String> {
    prop::collection::vec(0..PIECES.len(), 0..12)
        .prop_map(|ix| ix.into_iter().map(|i| PIECES[i]).collect::<Vec<_>>().join("\n"))
}

proptest! {
    #[test]
    fn relexing_rendered_tokens_is_stable(src in program()) {
        let tokens = lex(&src).unwrap();
        let rendered = tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
        let again = lex(&rendered).unwrap();
        let strip = |ts: &[vulntype::syntax::CodeToken]| {
            ts.iter().map(|t| (t.text.clone(), t.kind)).collect::<Vec<_>>()
        };
        prop_assert_eq!(strip(&tokens), strip(&again));
        let twice = lex(&again.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")).unwrap();
        prop_assert_eq!(strip(&again), strip(&twice));
    }

    #[test]
    fn buckets_hold_only_words(src in program()) {
        let e = elements_of(&format!("void f(void) {{\n{src}\n}}")).unwrap();
        for kind in ElementKind::ALL {
            for tok in e.bucket(kind) {
                let lexed = lex(tok).unwrap();
                prop_assert_eq!(lexed.len(), 1, "{}", tok);
                prop_assert!(lexed[0].kind.is_word(), "{:?} in {:?}", tok, kind);
            }
        }
    }
}

// features

fn binary_matrix() -> impl Strategy<Value = (Vec<Vec<u8>>, Vec<u8>)> {
    (4usize..=30, 1usize..=6).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..=1, d), n),
            prop::collection::vec(0u8..=1, n),
        )
    })
}

proptest! {
    #[test]
    fn chi2_matches_the_contingency_table((rows, y) in binary_matrix(), thr in 0.001f64..0.5) {
        let n_pos = y.iter().filter(|&&b| b == 1).count();
        prop_assume!(n_pos > 0 && n_pos < y.len());
        let d = rows[0].len();
        let vectors: Vec<FeatureVector> = rows
            .iter()
            .map(|r| FeatureVector::raw(d, (0..d).filter(|&j| r[j] == 1).map(|j| (j, 1.0)).collect()))
            .collect();
        let labels: Vec<LabelVector> = y.iter().map(|&b| LabelVector(vec![b])).collect();
        let dist = ChiSquared::new(1.0).unwrap();
        let n = y.len() as f64;
        let share = n_pos as f64 / n;
        let mut expected = Vec::new();
        for j in 0..d {
            let a = (0..y.len()).filter(|&i| rows[i][j] == 1 && y[i] == 1).count() as f64;
            let b = (0..y.len()).filter(|&i| rows[i][j] == 1 && y[i] == 0).count() as f64;
            let total = a + b;
            expected.push(if total == 0.0 {
                (0.0, 1.0)
            } else {
                let (ea, eb) = (total * share, total * (1.0 - share));
                let s = (a - ea).powi(2) / ea + (b - eb).powi(2) / eb;
                (s, if s > 0.0 { dist.sf(s) } else { 1.0 })
            });
        }
        let kept: Vec<usize> = (0..d).filter(|&j| expected[j].1 < thr).collect();
        let sel = match chi2_select(&vectors, &labels, thr) {
            Err(Error::NoFeaturesSelected { .. }) => {
                prop_assert!(kept.is_empty());
                return Ok(());
            }
            other => other.unwrap(),
        };
        for (j, &(chi2, p)) in expected.iter().enumerate() {
            prop_assert!((sel.scores[j].chi2 - chi2).abs() <= 1e-9 * chi2.max(1.0));
            prop_assert!((sel.scores[j].p_value - p).abs() <= 1e-9);
        }
        prop_assert_eq!(sel.kept, kept);
    }

    #[test]
    fn tfidf_rows_are_unit_or_empty(src in prop::collection::vec(program(), 1..6)) {
        let bags: Vec<_> = src
            .iter()
            .map(|s| build_ngrams(&lex(s).unwrap().iter().map(|t| t.text.clone()).collect::<Vec<_>>()))
            .collect();
        let Ok(vocab) = fit_tfidf(&bags) else {
            return Ok(());
        };
        for bag in &bags {
            let v = transform(bag, &vocab);
            let len = v.euclidean_len();
            prop_assert!(v.entries.is_empty() || (len - 1.0).abs() < 1e-9, "{}", len);
        }
    }

    #[test]
    fn split_partitions_the_dataset(n in 3usize..200, seed in any::<u64>(), a in 0.05f64..0.4, b in 0.05f64..0.4) {
        let functions: Vec<VulnFunction> = (0..n)
            .map(|i| VulnFunction {
                id: format!("f{i}"),
                source: "int f(void);".into(),
                labels: BTreeSet::from(["T".to_owned()]),
            })
            .collect();
        let d = Dataset::new(functions, TypeVocabulary::new(["T"]).unwrap()).unwrap();
        let spec = SplitSpec::new([1.0 - a - b, a, b], seed).unwrap();
        let s = split_dataset(&d, &spec).unwrap();
        let ids: Vec<&str> = [&s.train, &s.validation, &s.test]
            .iter()
            .flat_map(|p| p.functions.iter().map(|f| f.id.as_str()))
            .collect();
        prop_assert_eq!(ids.len(), n);
        prop_assert_eq!(ids.iter().collect::<HashSet<_>>().len(), n);
        prop_assert_eq!([s.train.len(), s.validation.len(), s.test.len()], spec.sizes(n));
    }
}
