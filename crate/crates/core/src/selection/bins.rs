//! Singular-direction projections and equal-width binning.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{svd, Matrix};

/// Items discretised into `bin_counts[j]` equal-width bins along each dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedUniverse {
    pub dims: usize,
    pub bin_counts: Vec<usize>,
    /// `bin_counts[j] + 1` increasing boundaries, empty for skipped dimensions.
    pub edges: Vec<Vec<f64>>,
    /// `assignment[item][dim]`; meaningless (zero) on skipped dimensions.
    pub assignment: Vec<Vec<usize>>,
    pub skipped_dims: Vec<usize>,
}

impl BinnedUniverse {
    /// Builds a universe from explicit bin indices, with unit-spaced edges.
    pub fn from_assignment(bin_counts: Vec<usize>, assignment: Vec<Vec<usize>>) -> Result<Self> {
        let dims = bin_counts.len();
        if assignment.is_empty() {
            return Err(Error::dim("bin_universe", String::from("no items")));
        }
        for (i, row) in assignment.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::shape(
                    "bin_universe",
                    format!("item {i} has {} entries, expected {dims}", row.len()),
                ));
            }
            for (j, (&b, &n)) in row.iter().zip(&bin_counts).enumerate() {
                if n > 0 && b >= n {
                    return Err(Error::InvalidArgument(format!(
                        "item {i} dim {j}: bin {b} outside 0..{n}"
                    )));
                }
            }
        }
        let skipped_dims = (0..dims).filter(|&j| bin_counts[j] == 0).collect();
        let edges = bin_counts
            .iter()
            .map(|&n| (0..=n).map(|e| e as f64).collect())
            .collect();
        Ok(Self {
            dims,
            bin_counts,
            edges,
            assignment,
            skipped_dims,
        })
    }

    pub fn items(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_skipped(&self, dim: usize) -> bool {
        self.skipped_dims.binary_search(&dim).is_ok()
    }

    /// Non-skipped dimensions in order.
    pub fn active_dims(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dims).filter(|&j| !self.is_skipped(j))
    }

    /// Σ B_j over non-skipped dimensions.
    pub fn total_bins(&self) -> usize {
        self.active_dims().map(|j| self.bin_counts[j]).sum()
    }

    /// Flat index of every bin occupied by `item`.
    pub(crate) fn item_bins(&self, item: usize) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.dims);
        for j in 0..self.dims {
            if !self.is_skipped(j) {
                out.push(offset + self.assignment[item][j]);
                offset += self.bin_counts[j];
            }
        }
        out
    }

    /// Bins no item occupies.
    pub fn empty_uncoverable(&self) -> usize {
        let all: Vec<usize> = (0..self.items()).collect();
        super::gap(&all, self).expect("indices in range")
    }
}

/// `B_j = ⌊w·λ_j / λ_1⌋`.
pub fn compute_bins<T: Scalar>(singular_values: &[T], w: usize) -> Result<Vec<usize>> {
    let first = match singular_values.first() {
        Some(&l) if l > T::zero() => l.as_f64(),
        _ => {
            return Err(Error::InvalidArgument(
                "leading singular value must be positive".into(),
            ))
        }
    };
    if w == 0 {
        return Err(Error::InvalidArgument("w must be positive".into()));
    }
    let mut prev = first;
    singular_values
        .iter()
        .map(|l| {
            let l = l.as_f64();
            if !(0.0..=prev).contains(&l) {
                return Err(Error::InvalidArgument(
                    "singular values must be descending and non-negative".into(),
                ));
            }
            prev = l;
            if l == first {
                return Ok(w);
            }
            Ok(((w as f64 * l) / first).floor() as usize)
        })
        .collect()
}

/// Leading `d` left singular vectors of `w_ref` (canonical sign) and their singular values.
pub fn principal_basis<T: Scalar>(w_ref: &Matrix<T>, d: usize) -> Result<(Matrix<T>, Vec<T>)> {
    let dec = svd(w_ref)?;
    if d == 0 || d > dec.s.len() {
        return Err(Error::dim(
            "project_onto_principal",
            format!("d = {d} outside 1..={}", dec.s.len()),
        ));
    }
    Ok((dec.u.leading_cols(d), dec.s[..d].to_vec()))
}

/// Column `j` is `Z · u_j` for the `j`-th left singular vector of `w_ref`.
pub fn project_onto_principal<T: Scalar>(
    z: &Matrix<T>,
    w_ref: &Matrix<T>,
    d: usize,
) -> Result<Matrix<T>> {
    if z.cols() != w_ref.rows() {
        return Err(Error::shape(
            "project_onto_principal",
            format!(
                "embeddings have {} columns, weight has {} rows",
                z.cols(),
                w_ref.rows()
            ),
        ));
    }
    let (u, _) = principal_basis(w_ref, d)?;
    z.matmul(&u)
}

/// Equal-width bins over each dimension's own range; the maximum lands in the last bin.
pub fn bin_universe<T: Scalar>(
    projections: &Matrix<T>,
    bin_counts: &[usize],
) -> Result<BinnedUniverse> {
    let (items, dims) = projections.shape();
    if bin_counts.len() != dims {
        return Err(Error::shape(
            "bin_universe",
            format!("{} bin counts for {dims} dimensions", bin_counts.len()),
        ));
    }
    let mut assignment = vec![vec![0usize; dims]; items];
    let mut edges = Vec::with_capacity(dims);
    let mut skipped_dims = Vec::new();
    for (j, &nb) in bin_counts.iter().enumerate() {
        let col: Vec<f64> = projections.col(j).iter().map(|v| v.as_f64()).collect();
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if nb == 0 || hi <= lo {
            skipped_dims.push(j);
            edges.push(Vec::new());
            continue;
        }
        let width = (hi - lo) / nb as f64;
        let mut e: Vec<f64> = (0..nb).map(|k| lo + k as f64 * width).collect();
        e.push(hi);
        edges.push(e);
        for (row, p) in assignment.iter_mut().zip(&col) {
            row[j] = (((p - lo) / width).floor() as usize).min(nb - 1);
        }
    }
    Ok(BinnedUniverse {
        dims,
        bin_counts: bin_counts.to_vec(),
        edges,
        assignment,
        skipped_dims,
    })
}

/// Indices of the `count` largest and `count` smallest values in column `dim`.
pub fn extreme_items<T: Scalar>(
    projections: &Matrix<T>,
    dim: usize,
    count: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if dim >= projections.cols() {
        return Err(Error::OutOfRange {
            index: dim,
            len: projections.cols(),
        });
    }
    if count > projections.rows() {
        return Err(Error::OutOfRange {
            index: count,
            len: projections.rows(),
        });
    }
    let col = projections.col(dim);
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|&a, &b| col[b].partial_cmp(&col[a]).expect("finite").then(a.cmp(&b)));
    let top = order[..count].to_vec();
    order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite").then(a.cmp(&b)));
    Ok((top, order[..count].to_vec()))
}
