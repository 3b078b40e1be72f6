//! Seeded K-fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TriageError};

/// Fold index per row plus the fold count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    k: usize,
    assignment: Vec<usize>,
}

impl Folds {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Training and validation row indices for fold `i`, both ascending.
    pub fn split(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut valid = Vec::new();
        for (row, &f) in self.assignment.iter().enumerate() {
            if f == i {
                valid.push(row);
            } else {
                train.push(row);
            }
        }
        (train, valid)
    }

    pub fn splits(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> + '_ {
        (0..self.k).map(|i| self.split(i))
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 2 {
        return Err(TriageError::domain(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if n < k {
        return Err(TriageError::domain(format!(
            "{n} rows cannot fill {k} folds"
        )));
    }
    Ok(())
}

/// Shuffled rows dealt round-robin into `k` folds.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Folds> {
    check_k(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut assignment = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(Folds { k, assignment })
}

/// Each class shuffled separately and dealt round-robin, continuing the
/// deal across classes so fold sizes differ by at most one.
///
/// Every fold must receive at least one row of each class.
pub fn stratified_kfold(labels: &[f64], k: usize, seed: u64) -> Result<Folds> {
    check_k(k, labels.len())?;
    let mut classes: Vec<f64> = labels.to_vec();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in classes {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < k {
            return Err(TriageError::Degenerate(format!(
                "class {class} has {} rows, fewer than {k} folds; re-stratify with fewer folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for row in rows {
            assignment[row] = next % k;
            next += 1;
        }
    }
    Ok(Folds { k, assignment })
}

/// Rows held out for testing and the rest, both ascending. Each class (or
/// the whole sample when `labels` is `None`) contributes
/// `round(fraction * size)` test rows, at least one and never all.
pub fn holdout(
    n: usize,
    labels: Option<&[f64]>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TriageError::domain(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let groups: Vec<Vec<usize>> = match labels {
        None => vec![(0..n).collect()],
        Some(l) => {
            if l.len() != n {
                return Err(TriageError::schema("labels and rows differ in length"));
            }
            let mut classes: Vec<f64> = l.to_vec();
            classes.sort_by(f64::total_cmp);
            classes.dedup();
            classes
                .iter()
                .map(|c| (0..n).filter(|&i| l[i] == *c).collect())
                .collect()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; n];
    for mut rows in groups {
        if rows.len() < 2 {
            return Err(TriageError::Degenerate(format!(
                "a group of {} rows cannot be split",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        let take = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        rows[..take].iter().for_each(|&r| is_test[r] = true);
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_test[i]);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kfold_partitions_rows() {
        let f = kfold(23, 5, 7).unwrap();
        let mut seen = [0; 23];
        for (train, valid) in f.splits() {
            assert_eq!(train.len() + valid.len(), 23);
            assert!(valid.len() == 4 || valid.len() == 5);
            for r in valid {
                seen[r] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(f, kfold(23, 5, 7).unwrap());
        assert_ne!(f, kfold(23, 5, 8).unwrap());
    }

    #[test]
    fn stratified_keeps_class_balance() {
        let labels: Vec<f64> = (0..100)
            .map(|i| if i % 10 == 0 { 1.0 } else { 0.0 })
            .collect();
        let f = stratified_kfold(&labels, 5, 1).unwrap();
        for (_, valid) in f.splits() {
            assert_eq!(valid.len(), 20);
            assert_eq!(valid.iter().filter(|&&r| labels[r] == 1.0).count(), 2);
        }
    }

    #[test]
    fn stratified_rejects_sparse_class() {
        let labels = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            stratified_kfold(&labels, 2, 0),
            Err(TriageError::Degenerate(_))
        ));
        assert!(kfold(3, 1, 0).is_err());
    }

    #[test]
    fn holdout_is_stratified_disjoint_and_seeded() {
        let labels: Vec<f64> = (0..200)
            .map(|i| if i % 10 == 0 { 1.0 } else { 0.0 })
            .collect();
        let (train, test) = holdout(200, Some(&labels), 0.2, 3).unwrap();
        assert_eq!(test.len(), 40);
        assert_eq!(test.iter().filter(|&&r| labels[r] == 1.0).count(), 4);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        assert_eq!((train, test), holdout(200, Some(&labels), 0.2, 3).unwrap());
        let (tr, te) = holdout(3, None, 0.01, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (2, 1));
        assert!(holdout(10, None, 1.0, 0).is_err());
        assert!(holdout(3, Some(&[1.0, 0.0, 0.0]), 0.5, 0).is_err());
    }
}
