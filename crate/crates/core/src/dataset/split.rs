use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded shuffle-and-cut. `round(n * ratio)` items go to train; both parts
/// keep the input's relative order.
pub fn split_train_test<T: Clone>(examples: &[T], ratio: f64, seed: u64) -> Result<DataSplit<T>> {
    if examples.is_empty() {
        return Err(Error::Empty("cannot split an empty example list".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let n = examples.len();
    let n_train = ((n as f64) * ratio).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &idx[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (i, ex) in examples.iter().enumerate() {
        if in_train[i] {
            train.push(ex.clone());
        } else {
            test.push(ex.clone());
        }
    }
    Ok(DataSplit { train, test, seed, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighty_twenty_is_deterministic() {
        let data: Vec<u32> = (0..10).collect();
        let a = split_train_test(&data, 0.8, 42).unwrap();
        let b = split_train_test(&data, 0.8, 42).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (8, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn half_of_two() {
        let s = split_train_test(&["a", "b"], 0.5, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
    }

    #[test]
    fn seeds_change_membership() {
        let data: Vec<u32> = (0..1000).collect();
        let a = split_train_test(&data, 0.8, 1).unwrap();
        let b = split_train_test(&data, 0.8, 2).unwrap();
        assert_ne!(a.test, b.test);
    }

    #[test]
    fn partition_and_ratio() {
        let data: Vec<u32> = (0..2345).collect();
        let s = split_train_test(&data, 0.8, 9).unwrap();
        let mut all: Vec<u32> = s.train.iter().chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, data);
        assert!((s.train.len() as f64 / 2345.0 - 0.8).abs() <= 0.001);
    }

    #[test]
    fn rejects_empty_and_bad_ratio() {
        assert!(split_train_test::<u8>(&[], 0.8, 1).is_err());
        assert!(split_train_test(&[1, 2], 1.0, 1).is_err());
        assert!(split_train_test(&[1, 2], 0.0, 1).is_err());
    }
}
