use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random partition of subjects into `k` folds of near-equal size.
/// Fold labels are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
    seed: u64,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    /// Subjects in fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == f).collect()
    }

    /// Subjects outside fold `f`, ascending.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid("K must be ≥ 2 or omitted"));
    }
    if k > n {
        return Err(Error::invalid(format!("K = {k} exceeds n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes() {
        assert_eq!(make_folds(10, 2, 1).unwrap().sizes(), vec![5, 5]);
        let mut s = make_folds(10, 3, 1).unwrap().sizes();
        s.sort();
        assert_eq!(s, vec![3, 3, 4]);
        assert_eq!(make_folds(10, 3, 9).unwrap(), make_folds(10, 3, 9).unwrap());
        assert!(make_folds(3, 4, 0).is_err());
        assert!(make_folds(3, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn balanced_partition(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let f = make_folds(n, k, seed).unwrap();
            let s = f.sizes();
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            prop_assert_eq!(s.iter().sum::<usize>(), n);
            prop_assert_eq!(f.members(0).len() + f.complement(0).len(), n);
        }
    }
}
