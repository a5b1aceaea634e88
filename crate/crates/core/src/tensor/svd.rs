//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::matrix::{dot, Matrix};

const MAX_SWEEPS: usize = 80;

/// `M = U · diag(S) · Vᵀ` with `k = min(rows, cols)` retained directions.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// rows × k, orthonormal columns.
    pub u: Matrix<T>,
    /// Descending, non-negative.
    pub s: Vec<T>,
    /// cols × k, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Scalar> Svd<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, &s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul_t(&self.v)
            .expect("svd factors have consistent shapes")
    }
}

/// Thin SVD. Each left singular vector is signed so that its largest-magnitude
/// entry (earliest on ties) is non-negative; the paired right vector follows.
pub fn svd<T: Scalar>(m: &Matrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = m.shape();
    let (mut u, s, mut v) = if rows >= cols {
        jacobi(m)?
    } else {
        let (u, s, v) = jacobi(&m.transpose())?;
        (v, s, u)
    };
    for j in 0..s.len() {
        if flip_needed(&u.col(j)) {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.rows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
    Ok(Svd { u, s, v })
}

/// True when the entry of largest magnitude (earliest on ties) is negative.
pub(crate) fn flip_needed<T: Scalar>(col: &[T]) -> bool {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    col[best] < T::zero()
}

/// Sign-canonicalizes every column of `m` in place.
pub(crate) fn canonicalize_columns<T: Scalar>(m: &mut Matrix<T>) {
    for j in 0..m.cols() {
        if flip_needed(&m.col(j)) {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Requires `rows >= cols`. Returns `(U, S, V)` sorted by descending `S`.
fn jacobi<T: Scalar>(m: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>, Matrix<T>)> {
    let (rows, n) = m.shape();
    debug_assert!(rows >= n);
    let mut a: Vec<Vec<T>> = (0..n).map(|j| m.col(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let tol = T::epsilon() * T::lit(rows as f64);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = if zeta.abs() > T::lit(1e150) {
                    T::one() / (T::lit(2.0) * zeta)
                } else {
                    zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Decomposition {
            rows: m.rows(),
            cols: m.cols(),
        });
    }

    let norms: Vec<T> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .expect("finite norms")
            .then(i.cmp(&j))
    });

    let smax = norms[order[0]];
    let null_tol = smax * T::epsilon() * T::lit(rows.max(n) as f64);
    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        if norms[j] > null_tol && norms[j] > T::zero() {
            u_cols.push(a[j].iter().map(|&x| x / norms[j]).collect());
        } else {
            u_cols.push(vec![T::zero(); rows]);
            deficient.push(k);
        }
    }
    for k in deficient {
        u_cols[k] = complete_basis(&u_cols, k, rows);
    }

    let mut u = Matrix::zeros(rows, n);
    let mut vm = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        u.set_col(k, &u_cols[k]);
        vm.set_col(k, &v[j]);
    }
    Ok((u, s, vm))
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// A unit vector orthogonal to every non-zero column in `cols` (column `skip` excluded),
/// found by Gram-Schmidt over the standard basis.
fn complete_basis<T: Scalar>(cols: &[Vec<T>], skip: usize, rows: usize) -> Vec<T> {
    for e in 0..rows {
        let mut x = vec![T::zero(); rows];
        x[e] = T::one();
        for _ in 0..2 {
            for (k, c) in cols.iter().enumerate() {
                if k == skip {
                    continue;
                }
                let proj = dot(&x, c);
                for (xi, &ci) in x.iter_mut().zip(c) {
                    *xi -= proj * ci;
                }
            }
        }
        let nrm = dot(&x, &x).sqrt();
        if nrm > T::lit(1e-3) {
            return x.into_iter().map(|xi| xi / nrm).collect();
        }
    }
    unreachable!("fewer than `rows` orthonormal columns always leave a free basis direction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gram_defect(m: &Matrix<f64>) -> f64 {
        m.t_matmul(m)
            .unwrap()
            .sub(&Matrix::identity(m.cols()))
            .unwrap()
            .max_abs()
    }

    fn check(m: &Matrix<f64>) -> Svd<f64> {
        let r = svd(m).unwrap();
        assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.s.iter().all(|&x| x >= 0.0));
        assert!(gram_defect(&r.u) <= 1e-10, "U defect {}", gram_defect(&r.u));
        assert!(gram_defect(&r.v) <= 1e-10, "V defect {}", gram_defect(&r.v));
        let err = r.reconstruct().sub(m).unwrap().max_abs();
        assert!(
            err <= 1e-8 * m.max_abs().max(1.0),
            "reconstruction error {err}"
        );
        r
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let r = check(&Matrix::<f64>::identity(3));
        assert_eq!(r.s, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_case() {
        let r = check(&Matrix::from_diag(&[3.0, 2.0]));
        assert_eq!(r.s, vec![3.0, 2.0]);
        for m in [&r.u, &r.v] {
            for x in m.data() {
                assert!(x.abs() == 0.0 || x.abs() == 1.0);
            }
        }
    }

    #[test]
    fn symmetric_permutation() {
        let r = check(&Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]).unwrap());
        assert!((r.s[0] - 2.0).abs() < 1e-12 && (r.s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_and_wide() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]).unwrap();
        let r = check(&m);
        assert!(r.s[1].abs() < 1e-12);
        let z = Matrix::<f64>::zeros(3, 2);
        let r = check(&z);
        assert_eq!(r.s, vec![0.0, 0.0]);
    }

    #[test]
    fn canonical_sign_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Matrix::from_fn(7, 4, |_, _| rng.random_range(-1.0..1.0));
        let a = svd(&m).unwrap();
        let b = svd(&m).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.s, b.s);
        for j in 0..4 {
            assert!(!flip_needed(&a.u.col(j)));
        }
    }

    #[test]
    fn random_reconstruction_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(20240101);
        for _ in 0..200 {
            let rows = rng.random_range(1..12);
            let cols = rng.random_range(1..12);
            let scale = 10f64.powi(rng.random_range(-3..4));
            let m = Matrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..1.0));
            check(&m);
        }
    }

    #[test]
    fn orthogonal_matrix_has_unit_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Matrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let q = svd(&g).unwrap();
        let orth = q.u.matmul_t(&q.v).unwrap();
        let r = check(&orth);
        assert!(r.s.iter().all(|&s| (s - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn works_in_single_precision() {
        let m = Matrix::<f32>::from_rows(&[[4.0, 0.0], [3.0, -5.0]]).unwrap();
        let r = svd(&m).unwrap();
        let err = r.reconstruct().sub(&m).unwrap().max_abs();
        assert!(err < 1e-5);
    }
}
