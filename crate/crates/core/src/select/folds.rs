use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EVAL_FOLDS: usize = 5;

/// Seeded shuffle of `0..n` dealt round-robin into `folds` groups; fold sizes differ by
/// at most one.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    assignment
}

/// SplitMix64 finalizer over a base seed and two indices.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Five-fold partition for the rotated train / validation / test evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Zero-based fold of every row.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

/// Row indices of one rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationSplit {
    pub rotation: usize,
    pub validation_fold: usize,
    pub test_fold: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldPlan {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n < 2 * EVAL_FOLDS {
            return Err(Error::TooFewSamples {
                needed: 2 * EVAL_FOLDS,
                got: n,
            });
        }
        Ok(FoldPlan {
            assignment: assign_folds(n, EVAL_FOLDS, seed),
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn fold_sizes(&self) -> [usize; EVAL_FOLDS] {
        let mut sizes = [0; EVAL_FOLDS];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Rotation `r` validates on fold `(r + 3) mod 5` and tests on fold `(r + 4) mod 5`;
    /// the remaining three folds are used for fitting.
    pub fn rotation(&self, r: usize) -> RotationSplit {
        let validation_fold = (r + 3) % EVAL_FOLDS;
        let test_fold = (r + 4) % EVAL_FOLDS;
        let pick = |pred: &dyn Fn(usize) -> bool| -> Vec<usize> {
            (0..self.assignment.len())
                .filter(|&i| pred(self.assignment[i]))
                .collect()
        };
        RotationSplit {
            rotation: r,
            validation_fold,
            test_fold,
            train: pick(&|f| f != validation_fold && f != test_fold),
            validation: pick(&|f| f == validation_fold),
            test: pick(&|f| f == test_fold),
        }
    }
}
