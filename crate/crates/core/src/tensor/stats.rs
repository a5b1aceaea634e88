use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::matrix::Matrix;
use crate::tensor::svd::{canonicalize_columns, svd};

/// Subtracts each column's mean. Returns the centered matrix and the means.
pub fn center_columns<T: Scalar>(m: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let n = T::lit(m.rows() as f64);
    let means: Vec<T> = m.column_sums().into_iter().map(|s| s / n).collect();
    let mut out = m.clone();
    let neg: Vec<T> = means.iter().map(|&x| -x).collect();
    out.add_row_vector(&neg);
    (out, means)
}

/// Top-`k` principal axes of the column-centered data, as a `cols × k` matrix
/// ordered by descending variance. Each axis is signed so its largest-magnitude
/// entry is non-negative.
pub fn principal_directions<T: Scalar>(m: &Matrix<T>, k: usize) -> Result<Matrix<T>> {
    let limit = (m.rows().saturating_sub(1)).min(m.cols());
    if k == 0 || k > limit {
        return Err(Error::dim(
            "principal_directions",
            format!(
                "k = {k} must be in 1..={limit} for a {}x{} matrix",
                m.rows(),
                m.cols()
            ),
        ));
    }
    let (centered, _) = center_columns(m);
    let dec = svd(&centered)?;
    let mut dirs = dec.v.leading_cols(k);
    canonicalize_columns(&mut dirs);
    Ok(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn centering_examples() {
        let (c, mean) = center_columns(&Matrix::from_rows(&[[1.0], [3.0]]).unwrap());
        assert_eq!(c.data(), &[-1.0, 1.0]);
        assert_eq!(mean, vec![2.0]);

        let centered = Matrix::from_rows(&[[1.0, -2.0], [-1.0, 2.0]]).unwrap();
        let (c, mean) = center_columns(&centered);
        assert_eq!(c, centered);
        assert_eq!(mean, vec![0.0, 0.0]);

        let (c, mean) = center_columns(&Matrix::from_rows(&[[5.0, 7.0]]).unwrap());
        assert_eq!(c.data(), &[0.0, 0.0]);
        assert_eq!(mean, vec![5.0, 7.0]);
    }

    #[test]
    fn centered_columns_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Matrix::from_fn(50, 4, |_, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * 3.0 + j as f64 * 100.0
        });
        let (c, _) = center_columns(&m);
        for s in c.column_sums() {
            assert!(s.abs() <= 1e-9 * 50.0);
        }
    }

    #[test]
    fn x_axis_points() {
        let m: Matrix<f64> = Matrix::from_rows(&[[-2.0, 0.0], [1.0, 0.0], [4.0, 0.0]]).unwrap();
        let d = principal_directions(&m, 1).unwrap();
        assert!((d[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(d[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn isotropic_sample_gives_orthonormal_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m: Matrix<f64> = Matrix::from_fn(500, 2, |_, _| StandardNormal.sample(&mut rng));
        let d = principal_directions(&m, 2).unwrap();
        let g = d.t_matmul(&d).unwrap();
        assert!(g.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-10);
    }

    /// Leading eigenvector of a symmetric 2×2 matrix in closed form.
    fn leading_eigvec_2x2(a: f64, b: f64, c: f64) -> (f64, f64) {
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let lambda = mean + rad;
        let (x, y) = if b.abs() > 1e-300 {
            (lambda - c, b)
        } else if a >= c {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let n = (x * x + y * y).sqrt();
        (x / n, y / n)
    }

    #[test]
    fn planted_ellipse_major_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut pts = Vec::with_capacity(20_000);
        for _ in 0..10_000 {
            let major: f64 = StandardNormal.sample(&mut rng);
            let minor: f64 = StandardNormal.sample(&mut rng);
            let (u, v) = (10.0 * major, minor);
            pts.push(s * u - s * v);
            pts.push(s * u + s * v);
        }
        let m = Matrix::from_vec(10_000, 2, pts).unwrap();

        let (cx, cy) = {
            let (c, _) = center_columns(&m);
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            let mut syy = 0.0;
            for i in 0..c.rows() {
                let (x, y) = (c[(i, 0)], c[(i, 1)]);
                sxx += x * x;
                sxy += x * y;
                syy += y * y;
            }
            leading_eigvec_2x2(sxx, sxy, syy)
        };
        let d = principal_directions(&m, 1).unwrap();
        assert!((d[(0, 0)].abs() - cx.abs()).abs() < 1e-9);
        assert!((d[(1, 0)].abs() - cy.abs()).abs() < 1e-9);
        assert!((d[(0, 0)].abs() - s).abs() < 1e-2);
        assert!((d[(1, 0)].abs() - s).abs() < 1e-2);
    }

    #[test]
    fn too_many_directions() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert!(principal_directions(&m, 2).is_err());
        assert!(principal_directions(&m, 1).is_ok());
    }
}
