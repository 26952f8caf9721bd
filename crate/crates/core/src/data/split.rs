use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train / validation / test partition of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl SplitSpec {
    pub fn len(&self) -> usize {
        self.train_idx.len() + self.valid_idx.len() + self.test_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random 80/10/10 split: `⌊0.8n⌋` train, `⌊0.1n⌋` validation, the rest
/// test. Each part is sorted ascending.
pub fn split(n: usize, seed: u64) -> Result<SplitSpec> {
    if n < 10 {
        return Err(Error::Size(format!(
            "need at least 10 graphs to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_valid = n / 10;
    let part = |range: std::ops::Range<usize>| {
        let mut v = order[range].to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitSpec {
        seed,
        train_idx: part(0..n_train),
        valid_idx: part(n_train..n_train + n_valid),
        test_idx: part(n_train + n_valid..n),
    })
}
