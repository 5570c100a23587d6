//! Seeded train/validation/test partitions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Items are labeled nodes of one shared graph.
    Transductive,
    /// Items are whole instance graphs; no graph is shared across parts.
    Inductive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub mode: SplitMode,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Transductive boolean masks over `n` nodes.
    pub fn masks(&self, n: usize) -> [Vec<bool>; 3] {
        let mask = |idx: &[usize]| {
            let mut m = vec![false; n];
            for &i in idx {
                m[i] = true;
            }
            m
        };
        [mask(&self.train), mask(&self.val), mask(&self.test)]
    }
}

/// Part sizes: rounded shares for train and val, remainder to test.
pub fn part_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if !ratios.iter().all(|&r| r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be positive, got {ratios:?}"
        )));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must sum to 1, got {total}"
        )));
    }
    let train = (ratios[0] * n as f64).round() as usize;
    let val = ((ratios[1] * n as f64).round() as usize).min(n - train.min(n));
    let test = n.saturating_sub(train + val);
    let sizes = [train.min(n), val, test];
    if sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "split of {n} items with ratios {ratios:?} leaves an empty part"
        )));
    }
    Ok(sizes)
}

/// Shuffles `0..n` with `seed` and cuts it into train/val/test.
pub fn make_split(n: usize, mode: SplitMode, ratios: [f64; 3], seed: u64) -> Result<Split> {
    let [a, b, _] = part_sizes(n, ratios)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut train = order[..a].to_vec();
    let mut val = order[a..a + b].to_vec();
    let mut test = order[a + b..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        mode,
        train,
        val,
        test,
    })
}
