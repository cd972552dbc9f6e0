//! AUC and per-user AUC.

use std::collections::BTreeMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

/// Probability that a random positive scores above a random negative, ties counted
/// one half. Computed from midranks in `O(n log n)`. `None` unless both classes occur.
///
/// Panics if the slices differ in length or a score is NaN.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN score"));
    // Sum of positive midranks (1-based).
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += midrank * pos as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uauc {
    /// Unweighted mean of per-user AUC; `None` when no user has both classes.
    pub value: Option<f64>,
    pub eligible_users: usize,
    /// Users with only one class.
    pub excluded_users: usize,
}

/// Unweighted mean of per-user AUC over users that have both positives and negatives.
pub fn uauc<U: Ord + Hash + Copy>(scores: &[f64], labels: &[u8], users: &[U]) -> Uauc {
    assert!(scores.len() == labels.len() && labels.len() == users.len(), "inputs differ in length");
    let mut groups: BTreeMap<U, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
    for ((&s, &y), &u) in scores.iter().zip(labels).zip(users) {
        let e = groups.entry(u).or_default();
        e.0.push(s);
        e.1.push(y);
    }
    let per_user: Vec<Option<f64>> = groups.values().map(|(s, y)| auc(s, y)).collect();
    let values: Vec<f64> = per_user.iter().flatten().copied().collect();
    Uauc {
        value: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
        eligible_users: values.len(),
        excluded_users: per_user.len() - values.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair_count(scores: &[f64], labels: &[u8]) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        (den > 0.0).then(|| num / den)
    }

    fn instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
        // Coarse scores so that ties are frequent.
        let scores = (0..n).map(|_| f64::from(rng.random_range(0..40u32)) / 40.0).collect();
        let labels = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        (scores, labels)
    }

    #[test]
    fn perfect_and_tied() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0]), Some(1.0));
        assert_eq!(auc(&[0.1, 0.9], &[1, 0]), Some(0.0));
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]), Some(0.5));
    }

    #[test]
    fn single_class_is_missing() {
        assert_eq!(auc(&[0.1, 0.2], &[1, 1]), None);
        assert_eq!(auc(&[], &[]), None);
    }

    #[test]
    fn matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 3, 10, 200, 999] {
            let (s, y) = instance(&mut rng, n);
            match (auc(&s, &y), pair_count(&s, &y)) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}"),
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn uauc_small_cases() {
        let one = uauc(&[0.2, 0.8, 0.4], &[0, 1, 0], &[7, 7, 7]);
        assert_eq!(one.value, auc(&[0.2, 0.8, 0.4], &[0, 1, 0]));
        let two = uauc(&[0.9, 0.1, 0.5, 0.5, 0.3], &[1, 0, 1, 0, 1], &[1, 1, 2, 2, 3]);
        assert_eq!(two.value, Some(0.75));
        assert_eq!((two.eligible_users, two.excluded_users), (2, 1));
        assert_eq!(uauc(&[0.1], &[1], &[0]).value, None);
    }

    #[test]
    fn uauc_matches_per_user_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (s, y) = instance(&mut rng, 600);
        let users: Vec<u32> = (0..600).map(|_| rng.random_range(0..25)).collect();
        let mut sum = 0.0;
        let mut n = 0;
        for u in 0..25 {
            let idx: Vec<usize> = (0..600).filter(|&i| users[i] == u).collect();
            let su: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
            let yu: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            if let Some(a) = pair_count(&su, &yu) {
                sum += a;
                n += 1;
            }
        }
        let got = uauc(&s, &y, &users);
        assert_eq!(got.eligible_users, n);
        assert!((got.value.unwrap() - sum / n as f64).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn invariant_under_monotone_maps(raw in prop::collection::vec((-5.0f64..5.0, 0u8..2), 2..300)) {
            let s: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let y: Vec<u8> = raw.iter().map(|r| r.1).collect();
            let base = auc(&s, &y);
            let exp: Vec<f64> = s.iter().map(|x| x.exp()).collect();
            let affine: Vec<f64> = s.iter().map(|x| 3.0 * x + 1.0).collect();
            for other in [auc(&exp, &y), auc(&affine, &y)] {
                match (base, other) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (a, b) => prop_assert_eq!(a, b),
                }
            }
        }
    }
}
