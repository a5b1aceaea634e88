mod support;

use commonspace::selection::{
    bin_universe, compute_bins, gap, greedy_select, principal_basis, project_onto_principal,
    setcover_to_binmap, BinnedUniverse,
};
use commonspace::tensor::svd;
use commonspace::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{
    check_greedy_instance, check_reduction, check_submodular_tuple, covered_by, random_setcover,
    random_universe,
};

#[test]
fn greedy_matches_oracles_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let u = random_universe(&mut rng, 12, 4, 4);
        check_greedy_instance(&u).unwrap();
    }
}

#[test]
fn coverage_gain_is_monotone_submodular() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..600 {
        check_submodular_tuple(&mut rng).unwrap();
    }
}

#[test]
fn reduction_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..80 {
        let (n, subsets) = random_setcover(&mut rng, 6, 6);
        check_reduction(n, &subsets).unwrap();
    }
}

#[test]
fn n3_belongs_to_every_full_cover() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let (n, subsets) = random_setcover(&mut rng, 5, 5);
        let u = setcover_to_binmap(n, &subsets).unwrap();
        let n3 = u.items() - 1;
        let floor = u.empty_uncoverable();
        for mask in 0u32..(1 << u.items()) {
            let s: Vec<usize> = (0..u.items()).filter(|i| mask >> i & 1 == 1).collect();
            if gap(&s, &u).unwrap() == floor {
                assert!(s.contains(&n3));
            }
        }
    }
}

#[test]
fn projection_matches_dot_product_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let w = Matrix::from_fn(8, 5, |_, _| rng.random_range(-1.0..1.0));
    let z = Matrix::from_fn(20, 8, |_, _| rng.random_range(-2.0..2.0));
    let dec = svd(&w).unwrap();
    let p = project_onto_principal(&z, &w, 4).unwrap();
    for i in 0..20 {
        for j in 0..4 {
            let mut acc = 0.0f64;
            for k in 0..8 {
                acc += z[(i, k)] * dec.u[(k, j)];
            }
            assert!((p[(i, j)] - acc).abs() < 1e-12);
        }
    }
    let (_, s) = principal_basis(&w, 4).unwrap();
    assert_eq!(s, dec.s[..4].to_vec());
}

#[test]
fn pipeline_on_projected_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let w = Matrix::from_fn(12, 20, |_, _| rng.random_range(-1.0..1.0));
    let z = Matrix::from_fn(300, 12, |_, _| rng.random_range(-1.0..1.0));
    let (_, s) = principal_basis(&w, 6).unwrap();
    let bins = compute_bins(&s, 20).unwrap();
    assert_eq!(bins[0], 20);
    let u = bin_universe(&project_onto_principal(&z, &w, 6).unwrap(), &bins).unwrap();
    let r = greedy_select(&u, None).unwrap();
    assert_eq!(r.empty_total, r.empty_uncoverable);
    assert_eq!(
        covered_by(&u, &r.chosen),
        u.total_bins() - r.empty_uncoverable
    );
}

fn universe_strategy() -> impl Strategy<Value = BinnedUniverse> {
    prop::collection::vec(1usize..5, 1..5).prop_flat_map(|bins| {
        let row = bins.iter().map(|&b| 0..b).collect::<Vec<_>>();
        (Just(bins), prop::collection::vec(row, 1..15))
            .prop_map(|(bins, rows)| BinnedUniverse::from_assignment(bins, rows).unwrap())
    })
}

proptest! {
    #[test]
    fn gap_is_total_minus_covered(u in universe_strategy(), mask in any::<u16>()) {
        let s: Vec<usize> = (0..u.items()).filter(|i| mask >> i & 1 == 1).collect();
        prop_assert_eq!(gap(&s, &u).unwrap(), u.total_bins() - covered_by(&u, &s));
    }

    #[test]
    fn greedy_is_deterministic_and_distinct(u in universe_strategy(), budget in 1usize..6) {
        let a = greedy_select(&u, Some(budget)).unwrap();
        prop_assert_eq!(&a, &greedy_select(&u, Some(budget)).unwrap());
        let mut c = a.chosen.clone();
        c.sort_unstable();
        c.dedup();
        prop_assert_eq!(c.len(), a.chosen.len());
        prop_assert!(a.chosen.len() <= budget);
        prop_assert_eq!(a.gap_trace.len(), a.chosen.len());
        let strict = a.saturated_after.unwrap_or(a.chosen.len());
        prop_assert!(a.gap_trace[..strict].windows(2).all(|w| w[1] < w[0]));
        prop_assert!(a.gap_trace[strict.saturating_sub(1)..].windows(2).all(|w| w[1] == w[0]));
        prop_assert_eq!(a.chosen.len(), budget.min(u.items()));
    }

    #[test]
    fn binning_maps_each_item_once(values in prop::collection::vec(-100.0f64..100.0, 2..40), nb in 1usize..10) {
        let m = Matrix::from_vec(values.len(), 1, values.clone()).unwrap();
        let u = bin_universe(&m, &[nb]).unwrap();
        if u.skipped_dims.is_empty() {
            let e = &u.edges[0];
            for (i, v) in values.iter().enumerate() {
                let b = u.assignment[i][0];
                prop_assert!(b < nb && *v >= e[b] && *v <= e[b + 1]);
            }
        }
    }
}
