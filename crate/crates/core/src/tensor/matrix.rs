use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix. Rows are items, columns are features.
///
/// Every constructor that accepts external data checks shape and finiteness,
/// so a `Matrix` in hand always has `rows >= 1`, `cols >= 1` and finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(
                "matrix",
                format!("{rows}x{cols} has an empty axis"),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "matrix",
                format!(
                    "{rows}x{cols} needs {} values, got {}",
                    rows * cols,
                    data.len()
                ),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::shape(
                    "from_rows",
                    format!("row {i} has {} values, expected {d}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(n, d, data)
    }

    /// Panics on an empty axis; use for internally derived shapes only.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            rows > 0 && cols > 0,
            "zeros({rows}, {cols}) has an empty axis"
        );
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[T]) {
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        Ok(())
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!(
                    "{}x{} · {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_t",
                format!(
                    "{}x{} · ({}x{})ᵀ",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        Ok(Self::from_fn(self.rows, other.rows, |i, j| {
            dot(self.row(i), other.row(j))
        }))
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "t_matmul",
                format!(
                    "({}x{})ᵀ · {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        let n = other.cols;
        for k in 0..self.rows {
            let brow = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out.data[i * n..(i + 1) * n].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `bias` to every row.
    pub fn add_row_vector(&mut self, bias: &[T]) {
        debug_assert_eq!(bias.len(), self.cols);
        for row in self.data.chunks_mut(self.cols) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    pub fn column_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for row in self.data.chunks(self.cols) {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::OutOfRange {
                    index: i,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_vec(indices.len(), self.cols, data)
    }

    /// First `k` columns.
    pub fn leading_cols(&self, k: usize) -> Self {
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T> Matrix<T> {
    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for row in self.data.chunks(self.cols.max(1)) {
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Matrix::<f64>::from_vec(0, 2, vec![]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(matches!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(Matrix::from_vec(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn products_agree() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, 0.5], [-1.0, 2.0], [0.0, 3.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(
            ab,
            Matrix::from_rows(&[[-1.0, 13.5], [-1.0, 30.0]]).unwrap()
        );
        assert_eq!(a.matmul_t(&b.transpose()).unwrap(), ab);
        assert_eq!(a.transpose().t_matmul(&b).unwrap(), ab);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn select_rows_checks_range() {
        let a = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert_eq!(a.select_rows(&[1, 1]).unwrap().data(), &[2.0, 2.0]);
        assert!(matches!(
            a.select_rows(&[2]),
            Err(Error::OutOfRange { index: 2, len: 2 })
        ));
    }
}
