//! Orthogonal Procrustes alignment and cross-subject similarity diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{center_columns, dot, norm, principal_directions, svd, Matrix};

/// Result of an orthogonal Procrustes fit.
#[derive(Clone, Debug)]
pub struct ProcrustesFit<T> {
    /// Orthogonal `d × d` matrix minimizing `‖X·R − Y‖_F`.
    pub rotation: Matrix<T>,
    /// `XᵀY` was rank deficient, so `rotation` is one of several minimizers.
    pub rank_deficient: bool,
}

/// Orthogonal `R` minimizing `‖X·R − Y‖_F`; no centering or scaling is applied.
pub fn procrustes<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>) -> Result<ProcrustesFit<T>> {
    if x.shape() != y.shape() {
        return Err(Error::shape(
            "procrustes",
            format!("{}x{} vs {}x{}", x.rows(), x.cols(), y.rows(), y.cols()),
        ));
    }
    if x.rows() < x.cols() {
        return Err(Error::dim(
            "procrustes",
            format!("need n >= d, got {}x{}", x.rows(), x.cols()),
        ));
    }
    let cross = x.t_matmul(y)?;
    let dec = svd(&cross)?;
    let smax = dec.s[0];
    let floor = smax * T::epsilon() * T::lit(cross.rows() as f64);
    let rank_deficient = smax == T::zero() || dec.s.iter().any(|&s| s <= floor);
    Ok(ProcrustesFit {
        rotation: dec.u.matmul_t(&dec.v)?,
        rank_deficient,
    })
}

fn check_same_shapes<T: Scalar>(op: &'static str, subjects: &[&Matrix<T>]) -> Result<()> {
    let Some(first) = subjects.first() else {
        return Err(Error::InvalidArgument(format!("{op}: no subjects")));
    };
    for (i, s) in subjects.iter().enumerate() {
        if s.shape() != first.shape() {
            return Err(Error::shape(
                op,
                format!(
                    "subject {i} is {}x{}, subject 0 is {}x{}",
                    s.rows(),
                    s.cols(),
                    first.rows(),
                    first.cols()
                ),
            ));
        }
    }
    Ok(())
}

fn row_norms<T: Scalar>(m: &Matrix<T>, subject: usize) -> Result<Vec<T>> {
    (0..m.rows())
        .map(|i| {
            let n = norm(m.row(i));
            if n == T::zero() {
                Err(Error::ZeroNorm { subject, item: i })
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Mean over items of the cosine between matched rows.
pub fn mean_cosine<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    check_same_shapes("mean_cosine", &[a, b])?;
    let na = row_norms(a, 0)?;
    let nb = row_norms(b, 1)?;
    let total: T = (0..a.rows())
        .map(|i| dot(a.row(i), b.row(i)) / (na[i] * nb[i]))
        .sum();
    Ok(total / T::lit(a.rows() as f64))
}

/// Subjects × subjects matrix of item-matched mean cosine similarity.
pub fn mean_cosine_matrix<T: Scalar>(subjects: &[&Matrix<T>]) -> Result<Matrix<T>> {
    check_same_shapes("mean_cosine_matrix", subjects)?;
    let norms = subjects
        .iter()
        .enumerate()
        .map(|(s, m)| row_norms(m, s))
        .collect::<Result<Vec<_>>>()?;
    let k = subjects.len();
    let n = T::lit(subjects[0].rows() as f64);
    let mut out = Matrix::identity(k);
    for a in 0..k {
        for b in a + 1..k {
            let total: T = (0..subjects[a].rows())
                .map(|i| dot(subjects[a].row(i), subjects[b].row(i)) / (norms[a][i] * norms[b][i]))
                .sum();
            let c = (total / n).max(-T::one()).min(T::one());
            out[(a, b)] = c;
            out[(b, a)] = c;
        }
    }
    Ok(out)
}

/// Mean squared difference between two item-matched matrices.
pub fn mean_squared_error<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    check_same_shapes("mse", &[a, b])?;
    let total: T = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(total / T::lit(a.data().len() as f64))
}

/// Subjects × subjects matrix of item-matched mean squared error.
pub fn mse_matrix<T: Scalar>(subjects: &[&Matrix<T>]) -> Result<Matrix<T>> {
    check_same_shapes("mse_matrix", subjects)?;
    let k = subjects.len();
    let mut out = Matrix::zeros(k, k);
    for a in 0..k {
        for b in a + 1..k {
            let e = mean_squared_error(subjects[a], subjects[b])?;
            out[(a, b)] = e;
            out[(b, a)] = e;
        }
    }
    Ok(out)
}

/// Distances closer than this are treated as ties and resolved by row index.
const TIE_EPS: f64 = 1e-12;

/// For every row, its `k` nearest other rows under cosine distance, ties by index.
fn neighbor_sets<T: Scalar>(m: &Matrix<T>, k: usize, subject: usize) -> Result<Vec<Vec<usize>>> {
    let norms = row_norms(m, subject)?;
    let n = m.rows();
    let tie = T::lit(TIE_EPS);
    let mut sets = Vec::with_capacity(n);
    let mut dist = vec![T::zero(); n];
    let mut taken = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            dist[j] = T::one() - dot(m.row(i), m.row(j)) / (norms[i] * norms[j]);
        }
        taken.iter_mut().for_each(|t| *t = false);
        taken[i] = true;
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            let best = (0..n)
                .filter(|&j| !taken[j])
                .map(|j| dist[j])
                .fold(T::infinity(), T::min);
            let pick = (0..n)
                .find(|&j| !taken[j] && dist[j] <= best + tie)
                .expect("k <= n - 1");
            taken[pick] = true;
            chosen.push(pick);
        }
        chosen.sort_unstable();
        sets.push(chosen);
    }
    Ok(sets)
}

/// Mean fraction of shared `k`-nearest neighbors between matched items of `a` and `b`.
pub fn knn_consistency<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, k: usize) -> Result<T> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "knn_consistency",
            format!("{} vs {} rows", a.rows(), b.rows()),
        ));
    }
    let n = a.rows();
    if k == 0 || k + 1 > n {
        return Err(Error::dim(
            "knn_consistency",
            format!("k = {k} must be in 1..={}", n.saturating_sub(1)),
        ));
    }
    let na = neighbor_sets(a, k, 0)?;
    let nb = neighbor_sets(b, k, 1)?;
    let shared: usize = na
        .iter()
        .zip(&nb)
        .map(|(x, y)| x.iter().filter(|j| y.binary_search(j).is_ok()).count())
        .sum();
    Ok(T::lit(shared as f64) / T::lit((n * k) as f64))
}

/// Absolute cosine between index-matched top-`k` principal directions.
pub fn eigvec_similarity<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, k: usize) -> Result<Vec<T>> {
    if a.cols() != b.cols() {
        return Err(Error::shape(
            "eigvec_similarity",
            format!("{} vs {} features", a.cols(), b.cols()),
        ));
    }
    let da = principal_directions(a, k)?;
    let db = principal_directions(b, k)?;
    Ok((0..k)
        .map(|j| dot(&da.col(j), &db.col(j)).abs().min(T::one()))
        .collect())
}

/// Pairwise diagnostics over a set of item-matched subject embeddings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub subjects: Vec<String>,
    pub cosine: Vec<Vec<f64>>,
    pub mse: Vec<Vec<f64>>,
    pub knn_k: usize,
    pub knn: Vec<Vec<f64>>,
    pub eig_k: usize,
    /// Upper-triangle pairs `(a, b)` with `a < b`, in row-major order.
    pub eig_sim: Vec<EigPair>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EigPair {
    pub a: usize,
    pub b: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ReportOptions {
    pub knn_k: usize,
    pub eig_k: usize,
    pub center: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            knn_k: 50,
            eig_k: 5,
            center: false,
        }
    }
}

fn nested<T: Scalar>(m: &Matrix<T>) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.as_f64()).collect())
        .collect()
}

impl AlignmentReport {
    pub fn build<T: Scalar>(
        ids: &[String],
        subjects: &[&Matrix<T>],
        opts: ReportOptions,
    ) -> Result<Self> {
        if ids.len() != subjects.len() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} subjects",
                ids.len(),
                subjects.len()
            )));
        }
        check_same_shapes("alignment_report", subjects)?;
        let owned: Vec<Matrix<T>> = if opts.center {
            subjects.iter().map(|m| center_columns(m).0).collect()
        } else {
            subjects.iter().map(|m| (*m).clone()).collect()
        };
        let views: Vec<&Matrix<T>> = owned.iter().collect();
        let k = views.len();

        let cosine = mean_cosine_matrix(&views)?;
        let mse = mse_matrix(&views)?;
        let mut knn = Matrix::<T>::identity(k);
        let mut eig_sim = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                let c = knn_consistency(views[a], views[b], opts.knn_k)?;
                knn[(a, b)] = c;
                knn[(b, a)] = c;
                let values = eigvec_similarity(views[a], views[b], opts.eig_k)?;
                eig_sim.push(EigPair {
                    a,
                    b,
                    values: values.iter().map(|v| v.as_f64()).collect(),
                });
            }
        }
        Ok(Self {
            subjects: ids.to_vec(),
            cosine: nested(&cosine),
            mse: nested(&mse),
            knn_k: opts.knn_k,
            knn: nested(&knn),
            eig_k: opts.eig_k,
            eig_sim,
        })
    }

    /// Checks the structural invariants every emitted report must satisfy.
    #[allow(clippy::needless_range_loop)]
    pub fn validate(&self) -> std::result::Result<(), String> {
        let k = self.subjects.len();
        let square = |name: &str, m: &Vec<Vec<f64>>| -> std::result::Result<(), String> {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return Err(format!("{name} is not {k}x{k}"));
            }
            for a in 0..k {
                for b in 0..k {
                    if (m[a][b] - m[b][a]).abs() > 1e-12 {
                        return Err(format!("{name} not symmetric at ({a},{b})"));
                    }
                }
            }
            Ok(())
        };
        square("cosine", &self.cosine)?;
        square("mse", &self.mse)?;
        square("knn", &self.knn)?;
        for a in 0..k {
            if (self.cosine[a][a] - 1.0).abs() > 1e-9
                || self.mse[a][a] != 0.0
                || self.knn[a][a] != 1.0
            {
                return Err(format!("bad diagonal at {a}"));
            }
            for b in 0..k {
                if !(-1.0..=1.0).contains(&self.cosine[a][b])
                    || self.mse[a][b] < 0.0
                    || !(0.0..=1.0).contains(&self.knn[a][b])
                {
                    return Err(format!("entry out of range at ({a},{b})"));
                }
            }
        }
        if self
            .eig_sim
            .iter()
            .flat_map(|p| &p.values)
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err("eigenvector similarity outside [0, 1]".into());
        }
        Ok(())
    }
}
