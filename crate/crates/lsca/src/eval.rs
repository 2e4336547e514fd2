//! Retrieval evaluation and cross-validation splits.
//!
//! Average precision follows the 11-point interpolation rule: walk the
//! ranked list, record precision and recall at every prefix, then average
//! the maximum precision attained at recall >= x for x in 0, 0.1, ..,
//! 1.0. Recall-level comparisons are done in integers (`10 * hits >=
//! level * total`), so no float-equality edge cases can drop a prefix from
//! a level it exactly reaches.
//!
//! MAP pools the per-query APs of every fold and takes one mean.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::RankedList;

/// Precision/recall at every prefix of a ranked list, kept as integer
/// counts so recall levels can be compared exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionRecallCurve {
    hits: Vec<usize>,
    total_relevant: usize,
}

impl PrecisionRecallCurve {
    /// `flags[i]` says whether the document at rank i+1 is relevant;
    /// `total_relevant` counts relevant documents in the whole collection
    /// (at least the number of set flags).
    pub fn from_flags(flags: &[bool], total_relevant: usize) -> PrecisionRecallCurve {
        let mut hits = Vec::with_capacity(flags.len());
        let mut h = 0usize;
        for &f in flags {
            if f {
                h += 1;
            }
            hits.push(h);
        }
        debug_assert!(h <= total_relevant);
        PrecisionRecallCurve {
            hits,
            total_relevant,
        }
    }

    pub fn depth(&self) -> usize {
        self.hits.len()
    }

    pub fn total_relevant(&self) -> usize {
        self.total_relevant
    }

    /// (recall, precision) pairs for prefix lengths 1..=depth.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.hits
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let recall = if self.total_relevant == 0 {
                    0.0
                } else {
                    h as f64 / self.total_relevant as f64
                };
                (recall, h as f64 / (i + 1) as f64)
            })
            .collect()
    }

    /// Maximum precision at recall >= x for the 11 levels x = 0..=1.
    pub fn pseudo_precisions(&self) -> [f64; 11] {
        let mut best = [0.0f64; 11];
        if self.total_relevant == 0 {
            return best;
        }
        for (i, &h) in self.hits.iter().enumerate() {
            let p = h as f64 / (i + 1) as f64;
            // the highest level this prefix's recall reaches
            let level = (10 * h / self.total_relevant).min(10);
            if p > best[level] {
                best[level] = p;
            }
        }
        for j in (0..10).rev() {
            if best[j + 1] > best[j] {
                best[j] = best[j + 1];
            }
        }
        best
    }
}

/// Prefix precision/recall for a fully ranked list.
pub fn pr_curve(ranked: &RankedList) -> PrecisionRecallCurve {
    let flags = ranked.relevance_flags();
    let total = ranked.total_relevant();
    PrecisionRecallCurve::from_flags(&flags, total)
}

/// Mean of the 11 pseudo-precisions. Zero when the query has no relevant
/// documents at all.
pub fn interpolated_ap(curve: &PrecisionRecallCurve) -> f64 {
    if curve.total_relevant == 0 {
        return 0.0;
    }
    curve.pseudo_precisions().iter().sum::<f64>() / 11.0
}

pub fn ap_from_flags(flags: &[bool], total_relevant: usize) -> f64 {
    interpolated_ap(&PrecisionRecallCurve::from_flags(flags, total_relevant))
}

/// Pooled mean average precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub map: f64,
    pub per_query_ap: Vec<f64>,
}

impl MapResult {
    pub fn n_queries(&self) -> usize {
        self.per_query_ap.len()
    }
}

pub fn map(per_query_ap: Vec<f64>) -> Result<MapResult> {
    if per_query_ap.is_empty() {
        return Err(Error::InvalidInput(
            "MAP needs at least one query".into(),
        ));
    }
    let map = per_query_ap.iter().sum::<f64>() / per_query_ap.len() as f64;
    Ok(MapResult { map, per_query_ap })
}

/// One AP record for the per-query CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PerQueryAp {
    pub fold: usize,
    pub query_id: String,
    pub ap: f64,
}

pub fn write_per_query_ap_csv(w: &mut impl Write, rows: &[PerQueryAp]) -> std::io::Result<()> {
    writeln!(w, "fold,query_id,ap")?;
    for r in rows {
        writeln!(w, "{},{},{:.6}", r.fold, r.query_id, r.ap)?;
    }
    Ok(())
}

/// Cross-validation regimes over document indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    /// One fold per document.
    Loocv,
    /// Seeded, category-stratified k-fold.
    KFold { folds: usize, seed: u64 },
    /// One seeded shuffle split.
    Fixed { train_frac: f64, seed: u64 },
    /// Train/validation sides fixed by the dataset layout.
    Predefined {
        train: Vec<usize>,
        validation: Vec<usize>,
    },
}

impl Regime {
    pub fn describe(&self) -> String {
        match self {
            Regime::Loocv => "loocv".into(),
            Regime::KFold { folds, seed } => format!("kfold{folds}(seed={seed})"),
            Regime::Fixed { train_frac, seed } => {
                format!("fixed{train_frac}(seed={seed})")
            }
            Regime::Predefined { train, validation } => {
                format!("predefined({}/{})", train.len(), validation.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub label: String,
    pub folds: Vec<Fold>,
}

/// Build the fold list for a labelled dataset.
pub fn make_splits(categories: &[String], regime: &Regime) -> Result<SplitPlan> {
    let m = categories.len();
    if m == 0 {
        return Err(Error::InvalidSplit("no documents to split".into()));
    }
    let folds = match regime {
        Regime::Loocv => {
            if m < 2 {
                return Err(Error::InvalidSplit(
                    "leave-one-out needs at least two documents".into(),
                ));
            }
            (0..m)
                .map(|i| Fold {
                    train: (0..m).filter(|&j| j != i).collect(),
                    validation: vec![i],
                })
                .collect()
        }
        Regime::KFold { folds, seed } => {
            let k = *folds;
            if k < 2 || k > m {
                return Err(Error::InvalidSplit(format!(
                    "cannot cut {m} documents into {k} folds"
                )));
            }
            // group by category in sorted order, shuffle within each
            // group, then deal round-robin with a cursor that carries
            // across groups so fold sizes stay balanced
            let mut by_cat: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
            for (i, c) in categories.iter().enumerate() {
                by_cat.entry(c.as_str()).or_default().push(i);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k];
            let mut cursor = 0usize;
            for (_, mut members) in by_cat {
                members.shuffle(&mut rng);
                for idx in members {
                    buckets[cursor % k].push(idx);
                    cursor += 1;
                }
            }
            let mut out = Vec::with_capacity(k);
            for (f, bucket) in buckets.iter().enumerate() {
                let mut validation = bucket.clone();
                validation.sort_unstable();
                if validation.is_empty() || validation.len() == m {
                    return Err(Error::InvalidSplit(format!("fold {f} has size 0")));
                }
                let in_val: std::collections::HashSet<usize> =
                    validation.iter().copied().collect();
                let train = (0..m).filter(|i| !in_val.contains(i)).collect();
                out.push(Fold { train, validation });
            }
            out
        }
        Regime::Fixed { train_frac, seed } => {
            if !(*train_frac > 0.0 && *train_frac < 1.0) {
                return Err(Error::InvalidSplit(format!(
                    "train fraction {train_frac} must lie in (0, 1)"
                )));
            }
            let mut order: Vec<usize> = (0..m).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            order.shuffle(&mut rng);
            let n_train = ((train_frac * m as f64).round() as usize).clamp(0, m);
            if n_train == 0 || n_train == m {
                return Err(Error::InvalidSplit(format!(
                    "fraction {train_frac} leaves an empty side for {m} documents"
                )));
            }
            let mut train: Vec<usize> = order[..n_train].to_vec();
            let mut validation: Vec<usize> = order[n_train..].to_vec();
            train.sort_unstable();
            validation.sort_unstable();
            vec![Fold { train, validation }]
        }
        Regime::Predefined { train, validation } => {
            if train.is_empty() || validation.is_empty() {
                return Err(Error::InvalidSplit(
                    "predefined split has an empty side".into(),
                ));
            }
            let mut seen = vec![false; m];
            for &i in train.iter().chain(validation.iter()) {
                if i >= m {
                    return Err(Error::InvalidSplit(format!(
                        "predefined split index {i} out of range for {m} documents"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidSplit(format!(
                        "document {i} appears in both split sides"
                    )));
                }
                seen[i] = true;
            }
            let mut train = train.clone();
            let mut validation = validation.clone();
            train.sort_unstable();
            validation.sort_unstable();
            vec![Fold { train, validation }]
        }
    };
    Ok(SplitPlan {
        label: regime.describe(),
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn ap(flags: &[bool]) -> f64 {
        let total = flags.iter().filter(|&&f| f).count();
        ap_from_flags(flags, total)
    }

    #[test]
    fn hand_enumerated_curve() {
        let c = PrecisionRecallCurve::from_flags(&[true, false, true], 2);
        let pts = c.points();
        assert_eq!(pts.len(), 3);
        assert_abs_diff_eq!(pts[0].0, 0.5);
        assert_abs_diff_eq!(pts[0].1, 1.0);
        assert_abs_diff_eq!(pts[1].0, 0.5);
        assert_abs_diff_eq!(pts[1].1, 0.5);
        assert_abs_diff_eq!(pts[2].0, 1.0);
        assert_abs_diff_eq!(pts[2].1, 2.0 / 3.0, epsilon = 1e-12);

        let got = interpolated_ap(&c);
        assert_abs_diff_eq!(got, (6.0 + 5.0 * (2.0 / 3.0)) / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.8485, epsilon = 1e-4);
    }

    #[test]
    fn all_relevant_is_perfect() {
        let c = PrecisionRecallCurve::from_flags(&[true, true, true], 3);
        for (_, p) in c.points() {
            assert_abs_diff_eq!(p, 1.0);
        }
        assert_abs_diff_eq!(interpolated_ap(&c), 1.0);
    }

    #[test]
    fn collection_total_drives_recall() {
        // 10 retrieved, 4 relevant among them, 8 relevant overall
        let mut flags = vec![false; 10];
        for i in [0, 3, 5, 9] {
            flags[i] = true;
        }
        let c = PrecisionRecallCurve::from_flags(&flags, 8);
        let (recall, precision) = c.points()[9];
        assert_abs_diff_eq!(recall, 0.5);
        assert_abs_diff_eq!(precision, 0.4);
    }

    #[test]
    fn relevant_first_scores_one() {
        assert_abs_diff_eq!(ap(&[true, true, false, false]), 1.0);
    }

    #[test]
    fn no_relevant_documents_scores_zero() {
        assert_eq!(ap_from_flags(&[false, false, false], 0), 0.0);
    }

    #[test]
    fn pseudo_precisions_never_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let len = rng.random_range(1..50);
            let flags: Vec<bool> = (0..len).map(|_| rng.random_bool(0.3)).collect();
            let total = flags.iter().filter(|&&f| f).count();
            let pp = PrecisionRecallCurve::from_flags(&flags, total).pseudo_precisions();
            for j in 0..10 {
                assert!(pp[j] >= pp[j + 1], "levels {j}/{} in {flags:?}", j + 1);
            }
        }
    }

    #[test]
    fn promoting_a_relevant_document_never_hurts() {
        // exhaustive over every ranking of length <= 12
        for len in 2..=12usize {
            for mask in 0u32..(1 << len) {
                let flags: Vec<bool> = (0..len).map(|i| mask >> i & 1 == 1).collect();
                let base = ap(&flags);
                for pos in 0..len - 1 {
                    if !flags[pos] && flags[pos + 1] {
                        let mut swapped = flags.clone();
                        swapped.swap(pos, pos + 1);
                        assert!(
                            ap(&swapped) >= base - 1e-12,
                            "swap at {pos} lowered AP for {flags:?}"
                        );
                    }
                }
            }
        }
    }

    // Reference implementation: materialize every prefix, then take the
    // max precision among prefixes whose recall reaches each level.
    fn brute_force_ap(flags: &[bool], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let mut pts = Vec::new();
        let mut hits = 0usize;
        for (i, &f) in flags.iter().enumerate() {
            if f {
                hits += 1;
            }
            pts.push((hits as f64 / total as f64, hits as f64 / (i + 1) as f64));
        }
        let mut acc = 0.0;
        for j in 0..=10 {
            let x = j as f64 / 10.0;
            let best = pts
                .iter()
                .filter(|(r, _)| *r >= x)
                .map(|(_, p)| *p)
                .fold(0.0f64, f64::max);
            acc += best;
        }
        acc / 11.0
    }

    #[test]
    fn matches_brute_force_exhaustively() {
        for len in 1..=10usize {
            for mask in 0u32..(1 << len) {
                let flags: Vec<bool> = (0..len).map(|i| mask >> i & 1 == 1).collect();
                let total = flags.iter().filter(|&&f| f).count();
                assert_abs_diff_eq!(
                    ap_from_flags(&flags, total),
                    brute_force_ap(&flags, total),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn brute_force_with_larger_collection_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let len = rng.random_range(1..12);
            let flags: Vec<bool> = (0..len).map(|_| rng.random_bool(0.4)).collect();
            let hits = flags.iter().filter(|&&f| f).count();
            let total = hits + rng.random_range(0..4);
            if total == 0 {
                continue;
            }
            assert_abs_diff_eq!(
                ap_from_flags(&flags, total),
                brute_force_ap(&flags, total),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn map_means_and_rejects_empty() {
        assert_abs_diff_eq!(map(vec![1.0, 0.0]).unwrap().map, 0.5);
        assert_abs_diff_eq!(map(vec![0.72]).unwrap().map, 0.72);
        let same = map(vec![0.8485; 11]).unwrap();
        assert_abs_diff_eq!(same.map, 0.8485, epsilon = 1e-12);
        assert_eq!(same.n_queries(), 11);
        assert!(map(vec![]).is_err());
    }

    #[test]
    fn loocv_builds_one_fold_per_document() {
        let cats: Vec<String> = (0..186).map(|i| format!("c{}", i % 3)).collect();
        let plan = make_splits(&cats, &Regime::Loocv).unwrap();
        assert_eq!(plan.folds.len(), 186);
        for (i, f) in plan.folds.iter().enumerate() {
            assert_eq!(f.validation, vec![i]);
            assert_eq!(f.train.len(), 185);
            assert!(!f.train.contains(&i));
        }
    }

    #[test]
    fn five_fold_on_ten_documents() {
        let cats: Vec<String> = vec!["c".into(); 10];
        let plan = make_splits(&cats, &Regime::KFold { folds: 5, seed: 3 }).unwrap();
        assert_eq!(plan.folds.len(), 5);
        let mut seen = Vec::new();
        for f in &plan.folds {
            assert_eq!(f.validation.len(), 2);
            assert_eq!(f.train.len(), 8);
            seen.extend_from_slice(&f.validation);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>(), "folds partition the data");
    }

    #[test]
    fn kfold_stratifies_by_category() {
        let mut cats: Vec<String> = vec!["a".into(); 10];
        cats.extend(vec!["b".into(); 10]);
        let plan = make_splits(&cats, &Regime::KFold { folds: 5, seed: 9 }).unwrap();
        for f in &plan.folds {
            let a = f.validation.iter().filter(|&&i| i < 10).count();
            let b = f.validation.len() - a;
            assert_eq!(a, 2, "two docs of category a per fold");
            assert_eq!(b, 2, "two docs of category b per fold");
        }
    }

    #[test]
    fn splits_are_seed_deterministic() {
        let cats: Vec<String> = (0..20).map(|i| format!("c{}", i % 2)).collect();
        let a = make_splits(&cats, &Regime::KFold { folds: 4, seed: 5 }).unwrap();
        let b = make_splits(&cats, &Regime::KFold { folds: 4, seed: 5 }).unwrap();
        assert_eq!(a, b);
        let c = make_splits(&cats, &Regime::KFold { folds: 4, seed: 6 }).unwrap();
        assert_ne!(a, c);

        let f1 = make_splits(&cats, &Regime::Fixed { train_frac: 0.8, seed: 2 }).unwrap();
        let f2 = make_splits(&cats, &Regime::Fixed { train_frac: 0.8, seed: 2 }).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn fixed_split_sizes() {
        let cats: Vec<String> = vec!["c".into(); 10];
        let plan = make_splits(&cats, &Regime::Fixed { train_frac: 0.8, seed: 1 }).unwrap();
        assert_eq!(plan.folds.len(), 1);
        assert_eq!(plan.folds[0].train.len(), 8);
        assert_eq!(plan.folds[0].validation.len(), 2);
    }

    #[test]
    fn invalid_split_requests_fail() {
        let cats: Vec<String> = vec!["c".into(); 4];
        assert!(make_splits(&cats, &Regime::KFold { folds: 1, seed: 0 }).is_err());
        assert!(make_splits(&cats, &Regime::KFold { folds: 9, seed: 0 }).is_err());
        assert!(make_splits(&cats, &Regime::Fixed { train_frac: 1.2, seed: 0 }).is_err());
        assert!(make_splits(&cats, &Regime::Fixed { train_frac: 0.01, seed: 0 }).is_err());
        assert!(make_splits(&[], &Regime::Loocv).is_err());
    }

    #[test]
    fn predefined_split_validation() {
        let cats: Vec<String> = vec!["c".into(); 6];
        let ok = make_splits(
            &cats,
            &Regime::Predefined {
                train: vec![0, 1, 2, 3],
                validation: vec![4, 5],
            },
        )
        .unwrap();
        assert_eq!(ok.folds.len(), 1);
        let overlap = Regime::Predefined {
            train: vec![0, 1],
            validation: vec![1, 2],
        };
        assert!(make_splits(&cats, &overlap).is_err());
        let out_of_range = Regime::Predefined {
            train: vec![0],
            validation: vec![9],
        };
        assert!(make_splits(&cats, &out_of_range).is_err());
    }

    #[test]
    fn per_query_csv_format() {
        let rows = vec![
            PerQueryAp {
                fold: 0,
                query_id: "q1".into(),
                ap: 1.0,
            },
            PerQueryAp {
                fold: 1,
                query_id: "q2".into(),
                ap: 0.5,
            },
        ];
        let mut buf = Vec::new();
        write_per_query_ap_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "fold,query_id,ap\n0,q1,1.000000\n1,q2,0.500000\n"
        );
    }
}
