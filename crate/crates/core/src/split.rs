//! Seeded train/validation/test splitting and ID/OOD test assembly.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test_id: Vec<usize>,
    /// Indices into the OOD dataset; empty until [`assemble_test_set`].
    pub test_ood: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into train/val/test.
///
/// Validation and test sizes are `floor(n * ratio)`; the remainder goes to
/// train.
pub fn split_dataset(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<Splits> {
    let (tr, va, te) = ratios;
    if ((tr + va + te) - 1.0).abs() > 1e-9 || tr < 0.0 || va < 0.0 || te < 0.0 {
        return Err(Error::Split(format!("ratios {ratios:?} must be non-negative and sum to 1")));
    }
    if n == 0 {
        return Err(Error::Split("dataset is empty".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * va + 1e-9).floor() as usize;
    let n_test = (n as f64 * te + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    Ok(Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test_id: order[n_train + n_val..].to_vec(),
        test_ood: Vec::new(),
    })
}

/// Samples as many OOD graphs as there are ID test graphs, without replacement.
pub fn assemble_test_set(mut splits: Splits, ood_len: usize, seed: u64) -> Result<Splits> {
    let needed = splits.test_id.len();
    if ood_len < needed {
        return Err(Error::InsufficientOod {
            needed,
            available: ood_len,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    splits.test_ood = index::sample(&mut rng, ood_len, needed).into_vec();
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    const R: (f64, f64, f64) = (0.8, 0.1, 0.1);

    fn sizes(s: &Splits) -> (usize, usize, usize) {
        (s.train.len(), s.val.len(), s.test_id.len())
    }

    #[test]
    fn split_sizes() {
        assert_eq!(sizes(&split_dataset(10, R, 3).unwrap()), (8, 1, 1));
        assert_eq!(sizes(&split_dataset(600, R, 3).unwrap()), (480, 60, 60));
        assert_eq!(sizes(&split_dataset(11, R, 3).unwrap()), (9, 1, 1));
    }

    #[test]
    fn split_covers_and_is_deterministic() {
        let a = split_dataset(97, R, 42).unwrap();
        let b = split_dataset(97, R, 42).unwrap();
        assert_eq!(a, b);
        let all: BTreeSet<usize> = a.train.iter().chain(&a.val).chain(&a.test_id).copied().collect();
        assert_eq!(all.len(), 97);
        assert_ne!(a, split_dataset(97, R, 43).unwrap());
    }

    #[test]
    fn bad_ratios() {
        assert!(split_dataset(10, (0.8, 0.1, 0.2), 0).is_err());
        assert!(split_dataset(0, R, 0).is_err());
    }

    #[test]
    fn ood_assembly() {
        let s = split_dataset(600, R, 1).unwrap();
        let exact = assemble_test_set(s.clone(), 60, 5).unwrap();
        assert_eq!(exact.test_ood.iter().copied().collect::<BTreeSet<_>>().len(), 60);
        let more = assemble_test_set(s.clone(), 100, 5).unwrap();
        let uniq: BTreeSet<_> = more.test_ood.iter().copied().collect();
        assert_eq!(uniq.len(), 60);
        assert!(uniq.iter().all(|&i| i < 100));
        assert!(matches!(
            assemble_test_set(s, 10, 5),
            Err(Error::InsufficientOod { needed: 60, available: 10 })
        ));
    }
}
