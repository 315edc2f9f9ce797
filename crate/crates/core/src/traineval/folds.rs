use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

/// Subject-level k-fold split. Subjects are shuffled with `seed` and dealt
/// round-robin: shuffled position `p` validates in fold `p % folds`. Within
/// each side, subjects keep their input order.
pub fn kfold_split(subjects: &[String], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if subjects.len() < folds {
        return Err(Error::Config(format!(
            "{} subjects cannot fill {folds} folds",
            subjects.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = subjects.iter().find(|s| !seen.insert(s.as_str())) {
        return Err(Error::Config(format!("duplicate subject id {dup:?}")));
    }

    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; subjects.len()];
    for (p, &s) in order.iter().enumerate() {
        fold_of[s] = p % folds;
    }
    Ok((0..folds)
        .map(|f| {
            let (val, train): (Vec<_>, Vec<_>) = subjects.iter().zip(&fold_of).partition(|(_, &k)| k == f);
            Fold {
                train: train.into_iter().map(|(s, _)| s.clone()).collect(),
                val: val.into_iter().map(|(s, _)| s.clone()).collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:02}")).collect()
    }

    #[test]
    fn partition_law() {
        let subjects = ids(10);
        let folds = kfold_split(&subjects, 5, 42).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all: Vec<String> = folds.iter().flat_map(|f| f.val.clone()).collect();
        all.sort();
        assert_eq!(all, subjects);
        for f in &folds {
            assert_eq!(f.val.len(), 2);
            assert_eq!(f.train.len(), 8);
            assert!(f.val.iter().all(|v| !f.train.contains(v)));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(kfold_split(&ids(13), 5, 3).unwrap(), kfold_split(&ids(13), 5, 3).unwrap());
        assert_ne!(kfold_split(&ids(13), 5, 3).unwrap(), kfold_split(&ids(13), 5, 4).unwrap());
    }

    #[test]
    fn uneven_sizes() {
        let sizes: Vec<usize> = kfold_split(&ids(11), 5, 42).unwrap().iter().map(|f| f.val.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn too_few_subjects() {
        assert!(kfold_split(&ids(4), 5, 42).is_err());
    }
}
