//! Exhaustive oracles and the set-cover reduction.

use super::bins::BinnedUniverse;
use crate::error::{Error, Result};

const MIN_COVER_CAP: usize = 20;
const BEST_COVERAGE_CAP: usize = 15;
const BEST_COVERAGE_K_CAP: usize = 6;

/// Per-item occupancy as bit words over the flattened bins.
fn bitsets(u: &BinnedUniverse) -> (Vec<Vec<u64>>, usize) {
    let words = u.total_bins().div_ceil(64).max(1);
    let sets = (0..u.items())
        .map(|i| {
            let mut s = vec![0u64; words];
            for b in u.item_bins(i) {
                s[b / 64] |= 1 << (b % 64);
            }
            s
        })
        .collect();
    (sets, words)
}

fn covered(mask: u32, sets: &[Vec<u64>], words: usize) -> usize {
    let mut acc = vec![0u64; words];
    for (i, s) in sets.iter().enumerate() {
        if mask >> i & 1 == 1 {
            acc.iter_mut().zip(s).for_each(|(a, b)| *a |= b);
        }
    }
    acc.iter().map(|w| w.count_ones() as usize).sum()
}

/// Smallest subset reaching every coverable bin.
pub fn brute_force_min_cover(u: &BinnedUniverse) -> Result<usize> {
    let n = u.items();
    if n > MIN_COVER_CAP {
        return Err(Error::SizeCap {
            what: "brute_force_min_cover items",
            cap: MIN_COVER_CAP,
        });
    }
    let (sets, words) = bitsets(u);
    let target = covered((1u32 << n) - 1, &sets, words);
    let best = (0u32..1 << n)
        .filter(|&m| covered(m, &sets, words) == target)
        .map(|m| m.count_ones() as usize)
        .min();
    Ok(best.expect("the full set covers every coverable bin"))
}

/// Most bins covered by any `k` items.
pub fn brute_force_best_coverage(u: &BinnedUniverse, k: usize) -> Result<usize> {
    let n = u.items();
    if n > BEST_COVERAGE_CAP {
        return Err(Error::SizeCap {
            what: "brute_force_best_coverage items",
            cap: BEST_COVERAGE_CAP,
        });
    }
    if k > BEST_COVERAGE_K_CAP {
        return Err(Error::SizeCap {
            what: "brute_force_best_coverage k",
            cap: BEST_COVERAGE_K_CAP,
        });
    }
    let k = k.min(n);
    let (sets, words) = bitsets(u);
    Ok((0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| covered(m, &sets, words))
        .max()
        .unwrap_or(0))
}

/// Bin-cover instance for a set-cover instance over `1..=n`.
///
/// Items `0..m` are the subsets, then `N₂` (bin 1 everywhere) and `N₃` (bin 2 everywhere).
pub fn setcover_to_binmap(n: usize, subsets: &[Vec<usize>]) -> Result<BinnedUniverse> {
    if n == 0 || subsets.is_empty() {
        return Err(Error::InvalidArgument(
            "set cover needs n >= 1 and at least one subset".into(),
        ));
    }
    let mut assignment = Vec::with_capacity(subsets.len() + 2);
    for s in subsets {
        if let Some(&e) = s.iter().find(|&&e| e == 0 || e > n) {
            return Err(Error::OutOfRange { index: e, len: n });
        }
        assignment.push(
            (1..=n)
                .map(|d| if s.contains(&d) { 0 } else { 1 })
                .collect(),
        );
    }
    assignment.push(vec![1; n]);
    assignment.push(vec![2; n]);
    BinnedUniverse::from_assignment(vec![3; n], assignment)
}
