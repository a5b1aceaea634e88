//! Permutation test of a selection's empty-bin count against random subsets.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bins::BinnedUniverse;
use super::greedy::gap;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageTest {
    pub selected_empty: usize,
    pub p_value: f64,
    pub random_mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub random_std: f64,
    pub trials: usize,
    pub subset_size: usize,
}

/// Uniform `subset_size`-subset for one trial, on its own ChaCha stream.
pub fn random_trial_subset(
    items: usize,
    subset_size: usize,
    seed: u64,
    trial: usize,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut s = sample(&mut rng, items, subset_size).into_vec();
    s.sort_unstable();
    s
}

pub fn coverage_permutation_test(
    u: &BinnedUniverse,
    selected: &[usize],
    subset_size: usize,
    trials: usize,
    seed: u64,
) -> Result<CoverageTest> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if subset_size == 0 || subset_size > u.items() {
        return Err(Error::InvalidArgument(format!(
            "subset_size {subset_size} outside 1..={}",
            u.items()
        )));
    }
    let selected_empty = gap(selected, u)?;
    let counts: Vec<f64> = (0..trials)
        .map(|t| gap(&random_trial_subset(u.items(), subset_size, seed, t), u).map(|g| g as f64))
        .collect::<Result<_>>()?;
    let at_most = counts
        .iter()
        .filter(|&&c| c <= selected_empty as f64)
        .count();
    let mean = counts.iter().sum::<f64>() / trials as f64;
    let std = if trials > 1 {
        (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(CoverageTest {
        selected_empty,
        p_value: (1 + at_most) as f64 / (trials + 1) as f64,
        random_mean: mean,
        random_std: std,
        trials,
        subset_size,
    })
}
