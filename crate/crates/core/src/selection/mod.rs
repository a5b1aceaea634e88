//! Coverage-based representative-sample selection.

mod bins;
mod coverage;
mod greedy;
mod oracle;

pub use bins::{
    bin_universe, compute_bins, extreme_items, principal_basis, project_onto_principal,
    BinnedUniverse,
};
pub use coverage::{coverage_permutation_test, random_trial_subset, CoverageTest};
pub use greedy::{gap, greedy_select, SelectionResult, Termination};
pub use oracle::{brute_force_best_coverage, brute_force_min_cover, setcover_to_binmap};

/// Default number of principal dimensions.
pub const DEFAULT_DIMS: usize = 20;
/// Default bin resolution `w`.
pub const DEFAULT_W: usize = 50;

#[cfg(test)]
mod tests {
    use super::*;

    fn five() -> BinnedUniverse {
        BinnedUniverse::from_assignment(
            vec![2, 2],
            vec![vec![0, 0], vec![1, 1], vec![0, 1], vec![1, 0], vec![0, 0]],
        )
        .unwrap()
    }

    #[test]
    fn gap_examples() {
        let u = five();
        assert_eq!(gap(&[], &u).unwrap(), 4);
        assert_eq!(gap(&[0], &u).unwrap(), 2);
        assert_eq!(gap(&[0, 1, 2, 3, 4], &u).unwrap(), u.empty_uncoverable());
        assert_eq!(u.empty_uncoverable(), 0);
        assert!(gap(&[5], &u).is_err());
    }

    #[test]
    fn greedy_examples() {
        let u = five();
        let r = greedy_select(&u, None).unwrap();
        assert_eq!(r.chosen, vec![0, 1]);
        assert_eq!(r.gap_trace, vec![2, 0]);
        assert_eq!(r.termination, Termination::FullCoverage);
        assert_eq!(brute_force_min_cover(&u).unwrap(), 2);

        let r = greedy_select(&u, Some(1)).unwrap();
        assert_eq!(r.chosen, vec![0]);
        assert_eq!(r.termination, Termination::BudgetReached);
        assert!(greedy_select(&u, Some(0)).is_err());

        let one = BinnedUniverse::from_assignment(vec![1, 3], vec![vec![0, 2]]).unwrap();
        let r = greedy_select(&one, None).unwrap();
        assert_eq!(r.chosen, vec![0]);
        assert_eq!((r.empty_total, r.empty_uncoverable), (2, 2));
    }

    #[test]
    fn uncoverable_bins_are_reported() {
        let u = BinnedUniverse::from_assignment(vec![4], vec![vec![0], vec![0], vec![3]]).unwrap();
        let r = greedy_select(&u, None).unwrap();
        assert_eq!(r.chosen, vec![0, 2]);
        assert_eq!(r.termination, Termination::FullCoverage);
        assert_eq!((r.empty_total, r.empty_uncoverable), (2, 2));
        assert_eq!(r.saturated_after, Some(2));
    }

    #[test]
    fn budget_fills_after_saturation() {
        let u = BinnedUniverse::from_assignment(vec![4], vec![vec![0], vec![0], vec![3], vec![3]])
            .unwrap();
        let r = greedy_select(&u, Some(3)).unwrap();
        assert_eq!(r.chosen, vec![0, 2, 1]);
        assert_eq!(r.gap_trace, vec![3, 2, 2]);
        assert_eq!(r.termination, Termination::BudgetReached);
        assert_eq!(r.saturated_after, Some(2));
        let r = greedy_select(&u, Some(9)).unwrap();
        assert_eq!(r.chosen, vec![0, 2, 1, 3]);
        assert_eq!(r.termination, Termination::FullCoverage);
        let r = greedy_select(&u, Some(1)).unwrap();
        assert_eq!(r.saturated_after, None);
    }

    #[test]
    fn best_coverage_examples() {
        let u = five();
        assert_eq!(brute_force_best_coverage(&u, 0).unwrap(), 0);
        assert_eq!(brute_force_best_coverage(&u, 1).unwrap(), 2);
        assert_eq!(brute_force_best_coverage(&u, 5).unwrap(), 4);
        let single =
            BinnedUniverse::from_assignment(vec![1, 1], vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(brute_force_min_cover(&single).unwrap(), 1);
    }

    #[test]
    fn caps() {
        let big = BinnedUniverse::from_assignment(vec![1], vec![vec![0]; 21]).unwrap();
        assert!(brute_force_min_cover(&big).is_err());
        let mid = BinnedUniverse::from_assignment(vec![1], vec![vec![0]; 16]).unwrap();
        assert!(brute_force_best_coverage(&mid, 2).is_err());
        assert!(brute_force_best_coverage(&five(), 7).is_err());
    }

    #[test]
    fn reduction_examples() {
        let u = setcover_to_binmap(2, &[vec![1, 2]]).unwrap();
        assert_eq!(u.items(), 3);
        assert_eq!(brute_force_min_cover(&u).unwrap(), 3);
        let u = setcover_to_binmap(2, &[vec![1], vec![2]]).unwrap();
        assert_eq!(brute_force_min_cover(&u).unwrap(), 3);
        let n3 = u.items() - 1;
        let without: Vec<usize> = (0..n3).collect();
        assert!(gap(&without, &u).unwrap() > u.empty_uncoverable());
        assert!(setcover_to_binmap(2, &[vec![3]]).is_err());
        assert!(setcover_to_binmap(2, &[vec![0]]).is_err());
    }

    #[test]
    fn permutation_formula() {
        let u = BinnedUniverse::from_assignment(
            vec![3],
            vec![vec![0], vec![1], vec![2], vec![0], vec![0]],
        )
        .unwrap();
        // Full cover with 3 items; 2-item random subsets always leave at least one bin empty.
        let t = coverage_permutation_test(&u, &[0, 1, 2], 2, 9, 1).unwrap();
        assert_eq!(t.selected_empty, 0);
        assert_eq!(t.p_value, 0.1);

        let replay = random_trial_subset(5, 2, 4, 0);
        let t = coverage_permutation_test(&u, &replay, 2, 9, 4).unwrap();
        assert!(t.p_value >= 0.2);

        let t = coverage_permutation_test(&u, &[0], 2, 1, 3).unwrap();
        assert!(t.p_value == 0.5 || t.p_value == 1.0);
        assert_eq!(t.random_std, 0.0);

        assert!(coverage_permutation_test(&u, &[0], 6, 5, 0).is_err());
        assert!(coverage_permutation_test(&u, &[0], 0, 5, 0).is_err());
        assert!(coverage_permutation_test(&u, &[0], 2, 0, 0).is_err());
    }

    #[test]
    fn trial_subsets_are_deterministic_and_distinct() {
        let a = random_trial_subset(100, 10, 9, 3);
        assert_eq!(a, random_trial_subset(100, 10, 9, 3));
        assert_ne!(a, random_trial_subset(100, 10, 9, 4));
        let mut d = a.clone();
        d.dedup();
        assert_eq!(d.len(), 10);
    }
}
