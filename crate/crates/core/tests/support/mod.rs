//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::HashSet;

use commonspace::adapters::{loss, AdapterModel, AdapterTarget, MapperModel, Params};
use commonspace::selection::{
    brute_force_best_coverage, brute_force_min_cover, greedy_select, setcover_to_binmap,
    BinnedUniverse, Termination,
};
use commonspace::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;

const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of the total loss for every parameter,
/// adapter first then mapper, in `Params::slices` order.
pub fn finite_difference_gradients(
    adapter: &AdapterModel<f64>,
    mapper: Option<&MapperModel<f64>>,
    x: &Matrix<f64>,
    t_out: &Matrix<f64>,
    target: Option<AdapterTarget<'_, f64>>,
    lambda3: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let eval = |a: &AdapterModel<f64>, m: Option<&MapperModel<f64>>| {
        loss(a, m, x, t_out, target, lambda3).unwrap().total
    };

    let mut adapter_fd = Vec::new();
    let mut probe = adapter.clone();
    let lens: Vec<usize> = adapter.slices().iter().map(|s| s.len()).collect();
    for (k, len) in lens.into_iter().enumerate() {
        let mut g = Vec::with_capacity(len);
        for i in 0..len {
            let orig = probe.slices()[k][i];
            probe.slices_mut()[k][i] = orig + FD_STEP;
            let plus = eval(&probe, mapper);
            probe.slices_mut()[k][i] = orig - FD_STEP;
            let minus = eval(&probe, mapper);
            probe.slices_mut()[k][i] = orig;
            g.push((plus - minus) / (2.0 * FD_STEP));
        }
        adapter_fd.push(g);
    }

    let mut mapper_fd = Vec::new();
    if let Some(m) = mapper {
        let mut probe = m.clone();
        let lens: Vec<usize> = m.slices().iter().map(|s| s.len()).collect();
        for (k, len) in lens.into_iter().enumerate() {
            let mut g = Vec::with_capacity(len);
            for i in 0..len {
                let orig = probe.slices()[k][i];
                probe.slices_mut()[k][i] = orig + FD_STEP;
                let plus = eval(adapter, Some(&probe));
                probe.slices_mut()[k][i] = orig - FD_STEP;
                let minus = eval(adapter, Some(&probe));
                probe.slices_mut()[k][i] = orig;
                g.push((plus - minus) / (2.0 * FD_STEP));
            }
            mapper_fd.push(g);
        }
    }
    (adapter_fd, mapper_fd)
}

/// Largest `|analytic − fd| / max(|analytic|, |fd|, 1e-3)` over all entries.
pub fn max_relative_error(analytic: &[&[f64]], numeric: &[Vec<f64>]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.len(), n.len());
        for (&x, &y) in a.iter().zip(n) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-3));
        }
    }
    worst
}

/// Minimum number of subsets whose union is `1..=n`, by exhaustive search.
pub fn min_set_cover(n: usize, subsets: &[Vec<usize>]) -> Option<usize> {
    let full: u32 = (1u32 << n) - 1;
    let masks: Vec<u32> = subsets
        .iter()
        .map(|s| s.iter().fold(0u32, |m, &e| m | 1 << (e - 1)))
        .collect();
    let mut best: Option<usize> = None;
    for choice in 0u32..(1u32 << masks.len()) {
        let cover = masks
            .iter()
            .enumerate()
            .filter(|(i, _)| choice >> i & 1 == 1)
            .fold(0u32, |m, (_, &s)| m | s);
        if cover == full {
            let size = choice.count_ones() as usize;
            best = Some(best.map_or(size, |b: usize| b.min(size)));
        }
    }
    best
}

/// Random universe with `1..=max_items` items, `1..=max_dims` dims and `1..=max_bins` bins per dim.
pub fn random_universe(
    rng: &mut impl Rng,
    max_items: usize,
    max_dims: usize,
    max_bins: usize,
) -> BinnedUniverse {
    let items = rng.random_range(1..=max_items);
    let bins: Vec<usize> = (0..rng.random_range(1..=max_dims))
        .map(|_| rng.random_range(1..=max_bins))
        .collect();
    let assignment = (0..items)
        .map(|_| bins.iter().map(|&b| rng.random_range(0..b)).collect())
        .collect();
    BinnedUniverse::from_assignment(bins, assignment).unwrap()
}

/// Distinct `(dim, bin)` pairs occupied by `subset`, counted with a hash set.
pub fn covered_by(u: &BinnedUniverse, subset: &[usize]) -> usize {
    let mut seen = HashSet::new();
    for &i in subset {
        for j in 0..u.dims {
            if u.bin_counts[j] > 0 {
                seen.insert((j, u.assignment[i][j]));
            }
        }
    }
    seen.len()
}

/// Unbudgeted greedy reaches the coverable floor; budgeted greedy meets the (1 − 1/e) bound for k ≤ 4.
pub fn check_greedy_instance(u: &BinnedUniverse) -> Result<(), String> {
    let all: Vec<usize> = (0..u.items()).collect();
    let coverable = covered_by(u, &all);
    let full = greedy_select(u, None).map_err(|e| e.to_string())?;
    if full.termination != Termination::FullCoverage || covered_by(u, &full.chosen) != coverable {
        return Err(format!("unbudgeted greedy stalled: {full:?}"));
    }
    if full.gap_trace.windows(2).any(|w| w[1] >= w[0]) {
        return Err(format!(
            "gap trace not strictly decreasing: {:?}",
            full.gap_trace
        ));
    }
    for k in 1..=4.min(u.items()) {
        let greedy = covered_by(
            u,
            &greedy_select(u, Some(k)).map_err(|e| e.to_string())?.chosen,
        );
        let best = brute_force_best_coverage(u, k).map_err(|e| e.to_string())?;
        if (greedy as f64) < (1.0 - (-1.0f64).exp()) * best as f64 {
            return Err(format!("k = {k}: greedy {greedy} < (1 - 1/e) * {best}"));
        }
    }
    Ok(())
}

/// Draws `A ⊆ B` and `x ∉ B` over a random universe and checks monotone diminishing gains.
pub fn check_submodular_tuple(rng: &mut impl Rng) -> Result<(), String> {
    let u = random_universe(rng, 12, 4, 4);
    let n = u.items();
    if n < 2 {
        return check_submodular_tuple(rng);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let x = order[0];
    let b_len = rng.random_range(0..n);
    let b: Vec<usize> = order[1..=b_len].to_vec();
    let a: Vec<usize> = b.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    let g = |s: &[usize]| covered_by(&u, s) as i64;
    let with = |s: &[usize]| {
        let mut v = s.to_vec();
        v.push(x);
        v
    };
    let gain_a = g(&with(&a)) - g(&a);
    let gain_b = g(&with(&b)) - g(&b);
    if gain_a < gain_b || gain_b < 0 || g(&b) < g(&a) {
        return Err(format!(
            "A = {a:?}, B = {b:?}, x = {x}: gains {gain_a} < {gain_b}"
        ));
    }
    Ok(())
}

/// Random set-cover instance over `1..=n` whose subsets jointly cover every element.
pub fn random_setcover(
    rng: &mut impl Rng,
    max_n: usize,
    max_subsets: usize,
) -> (usize, Vec<Vec<usize>>) {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_subsets);
    let mut subsets: Vec<Vec<usize>> = (0..m)
        .map(|_| (1..=n).filter(|_| rng.random_bool(0.4)).collect())
        .collect();
    for e in 1..=n {
        if !subsets.iter().any(|s| s.contains(&e)) {
            let k = rng.random_range(0..m);
            subsets[k].push(e);
        }
    }
    for s in &mut subsets {
        s.sort_unstable();
    }
    (n, subsets)
}

/// `min_set_cover + 1 ≤ min bin cover ≤ min_set_cover + 2` for the reduced instance.
pub fn check_reduction(n: usize, subsets: &[Vec<usize>]) -> Result<(), String> {
    let opt = min_set_cover(n, subsets).ok_or("instance has no cover")?;
    let u = setcover_to_binmap(n, subsets).map_err(|e| e.to_string())?;
    let bin = brute_force_min_cover(&u).map_err(|e| e.to_string())?;
    if bin < opt + 1 || bin > opt + 2 {
        return Err(format!(
            "n = {n}, subsets = {subsets:?}: set cover {opt}, bin cover {bin}"
        ));
    }
    Ok(())
}
