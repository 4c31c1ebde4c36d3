use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{rng, shuffle};

/// Stratified k-fold where every row is its own group.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    let groups: Vec<u64> = (0..labels.len() as u64).collect();
    stratified_group_kfold(labels, &groups, k, seed)
}

/// Stratified k-fold that keeps each group (card) inside one fold.
///
/// Groups holding positives are placed first, largest positive count first,
/// each into the fold with the fewest positives (then fewest rows). The
/// remaining groups go, largest first, to the fold with the fewest rows.
/// Ties between equal groups are broken by a seeded shuffle.
pub fn stratified_group_kfold(labels: &[bool], groups: &[u64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if labels.len() != groups.len() {
        return Err(Error::LengthMismatch(labels.len(), groups.len()));
    }
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    for count in [pos, neg] {
        if count < k {
            return Err(Error::ClassTooSmall { count, k });
        }
    }

    // (group, rows, positives)
    let mut stats: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for (&g, &y) in groups.iter().zip(labels) {
        let e = stats.entry(g).or_default();
        e.0 += 1;
        e.1 += usize::from(y);
    }
    let mut order: Vec<(u64, usize, usize)> = stats.into_iter().map(|(g, (n, p))| (g, n, p)).collect();
    let mut r = rng(seed);
    shuffle(&mut order, &mut r);
    order.sort_by(|a, b| b.2.cmp(&a.2).then(b.1.cmp(&a.1)));

    let mut fold_rows = alloc::vec![0usize; k];
    let mut fold_pos = alloc::vec![0usize; k];
    let mut assignment: BTreeMap<u64, usize> = BTreeMap::new();
    for (g, n, p) in order {
        let f = if p > 0 {
            (0..k).min_by_key(|&f| (fold_pos[f], fold_rows[f], f)).unwrap_or(0)
        } else {
            (0..k).min_by_key(|&f| (fold_rows[f], f)).unwrap_or(0)
        };
        fold_rows[f] += n;
        fold_pos[f] += p;
        assignment.insert(g, f);
    }
    Ok(groups.iter().map(|g| assignment[g]).collect())
}

/// Row indices per fold as `(train, test)` for fold `fold`.
pub fn fold_split(folds: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, &f) in folds.iter().enumerate() {
        if f == fold {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn divisible_case_is_exact() {
        let y: Vec<bool> = (0..100).map(|i| i % 10 == 0).collect();
        let f = stratified_kfold(&y, 5, 1).unwrap();
        for fold in 0..5 {
            let rows = f.iter().filter(|&&x| x == fold).count();
            let pos = f.iter().zip(&y).filter(|(&x, &l)| x == fold && l).count();
            assert_eq!((rows, pos), (20, 2));
        }
    }

    #[test]
    fn too_small_class_is_an_error() {
        let y = [true, true, false, false, false, false];
        assert_eq!(stratified_kfold(&y, 3, 0).unwrap_err(), Error::ClassTooSmall { count: 2, k: 3 });
    }

    #[test]
    fn groups_never_straddle_folds() {
        let groups: Vec<u64> = (0..300).map(|i| i / 7).collect();
        let y: Vec<bool> = (0..300).map(|i| i % 13 == 0).collect();
        let f = stratified_group_kfold(&y, &groups, 5, 4).unwrap();
        for (i, g) in groups.iter().enumerate() {
            for (j, h) in groups.iter().enumerate() {
                if g == h {
                    assert_eq!(f[i], f[j]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance_positives(n in 50usize..400, every in 3usize..12, seed in 0u64..1000) {
            let y: Vec<bool> = (0..n).map(|i| i % every == 0).collect();
            let f = stratified_kfold(&y, 5, seed).unwrap();
            prop_assert_eq!(f.len(), n);
            prop_assert!(f.iter().all(|&x| x < 5));
            let pos = y.iter().filter(|&&b| b).count() as f64;
            for fold in 0..5 {
                let rows = f.iter().filter(|&&x| x == fold).count() as f64;
                let p = f.iter().zip(&y).filter(|(&x, &l)| x == fold && l).count() as f64;
                prop_assert!((p - pos / 5.0).abs() <= 1.0);
                prop_assert!((rows - n as f64 / 5.0).abs() <= 1.0);
            }
        }

        #[test]
        fn same_seed_same_folds(seed in 0u64..100) {
            let y: Vec<bool> = (0..120).map(|i| i % 6 == 0).collect();
            prop_assert_eq!(stratified_kfold(&y, 4, seed).unwrap(), stratified_kfold(&y, 4, seed).unwrap());
        }
    }
}
