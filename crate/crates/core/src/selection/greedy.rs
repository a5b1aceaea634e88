//! Gap function and the greedy bin-coverage heuristic.

use serde::{Deserialize, Serialize};

use super::bins::BinnedUniverse;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FullCoverage,
    BudgetReached,
    NoImprovement,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::FullCoverage => "full_coverage",
            Termination::BudgetReached => "budget_reached",
            Termination::NoImprovement => "no_improvement",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Vec<usize>,
    pub gap_trace: Vec<usize>,
    pub empty_total: usize,
    pub empty_uncoverable: usize,
    pub termination: Termination,
    /// Picks made when no remaining item could reduce Gap; later budgeted picks are fill.
    pub saturated_after: Option<usize>,
}

/// Occupancy flags over the flattened bins of a universe.
pub(crate) struct Coverage<'a> {
    universe: &'a BinnedUniverse,
    covered: Vec<bool>,
    pub(crate) gap: usize,
}

impl<'a> Coverage<'a> {
    pub(crate) fn new(universe: &'a BinnedUniverse) -> Self {
        let total = universe.total_bins();
        Self {
            universe,
            covered: vec![false; total],
            gap: total,
        }
    }

    pub(crate) fn gain(&self, item: usize) -> usize {
        self.universe
            .item_bins(item)
            .into_iter()
            .filter(|&b| !self.covered[b])
            .count()
    }

    pub(crate) fn add(&mut self, item: usize) {
        for b in self.universe.item_bins(item) {
            if !self.covered[b] {
                self.covered[b] = true;
                self.gap -= 1;
            }
        }
    }
}

fn check_items(items: &[usize], u: &BinnedUniverse) -> Result<()> {
    match items.iter().find(|&&i| i >= u.items()) {
        Some(&i) => Err(Error::OutOfRange {
            index: i,
            len: u.items(),
        }),
        None => Ok(()),
    }
}

/// Empty bins over non-skipped dimensions left by `subset`.
pub fn gap(subset: &[usize], u: &BinnedUniverse) -> Result<usize> {
    check_items(subset, u)?;
    let mut cov = Coverage::new(u);
    subset.iter().for_each(|&i| cov.add(i));
    Ok(cov.gap)
}

/// Repeatedly adds the item with the largest coverage gain, lowest index on ties.
///
/// Without a budget the loop stops once no item reduces Gap. With a budget it keeps
/// applying the same rule (every gain then being zero, so the lowest unchosen index)
/// until the budget is met, recording where coverage saturated.
pub fn greedy_select(u: &BinnedUniverse, budget: Option<usize>) -> Result<SelectionResult> {
    if budget == Some(0) {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    let floor = u.empty_uncoverable();
    let mut cov = Coverage::new(u);
    let mut taken = vec![false; u.items()];
    let mut chosen = Vec::new();
    let mut gap_trace = Vec::new();
    let mut saturated_after = None;
    let stalled = |gap: usize| {
        if gap == floor {
            Termination::FullCoverage
        } else {
            Termination::NoImprovement
        }
    };
    let termination = loop {
        if budget.is_some_and(|b| chosen.len() >= b) {
            break Termination::BudgetReached;
        }
        let mut best = None;
        let mut best_gain = 0;
        for i in (0..u.items()).filter(|&i| !taken[i]) {
            let g = cov.gain(i);
            if best.is_none() || g > best_gain {
                best_gain = g;
                best = Some(i);
            }
        }
        let Some(i) = best else {
            break stalled(cov.gap);
        };
        if best_gain == 0 {
            saturated_after.get_or_insert(chosen.len());
            if budget.is_none() {
                break stalled(cov.gap);
            }
        }
        taken[i] = true;
        cov.add(i);
        chosen.push(i);
        gap_trace.push(cov.gap);
    };
    Ok(SelectionResult {
        chosen,
        gap_trace,
        empty_total: cov.gap,
        empty_uncoverable: floor,
        termination,
        saturated_after,
    })
}
