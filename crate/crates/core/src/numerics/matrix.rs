use serde::{Deserialize, Serialize};

use crate::error::{AssgError, Result};

/// Dense row-major `f64` matrix.
///
/// Invariant: `data.len() == rows * cols` and every entry is finite. The
/// checked constructors enforce this; arithmetic on finite inputs cannot
/// produce non-finite outputs here (no division by data-dependent values).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Build from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(AssgError::ShapeMismatch {
                op: "Matrix::from_vec",
                expected: format!("{} values for {}x{}", rows * cols, rows, cols),
                got: format!("{} values", data.len()),
            });
        }
        if let Some(&bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(AssgError::NonFinite {
                context: "Matrix::from_vec".to_string(),
                value: bad,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(AssgError::ShapeMismatch {
                    op: "Matrix::from_rows",
                    expected: format!("{} columns", c),
                    got: format!("{} columns", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(r, c, data)
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
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

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    fn shape_err(op: &'static str, expected: String, got: &Matrix) -> AssgError {
        AssgError::ShapeMismatch {
            op,
            expected,
            got: format!("{}x{}", got.rows, got.cols),
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Self::shape_err(
                "matmul",
                format!("{}x* with * = {}", other.rows, self.cols),
                other,
            ));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        // i-k-j loop: the inner update runs over contiguous rows of `other`
        // and `out`, which vectorizes well.
        for i in 0..m {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (p, &a_ip) in a_row.iter().enumerate().take(k) {
                if a_ip == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a_ip * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`. Both operands are traversed along contiguous rows.
    pub fn matmul_bt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Self::shape_err(
                "matmul_bt",
                format!("*x{}", self.cols),
                other,
            ));
        }
        // The i-k-j kernel beats a dot-product loop here; one transpose is
        // cheap next to the product itself.
        self.matmul(&other.transpose())
    }

    /// `self^T * other`.
    pub fn matmul_at(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Self::shape_err(
                "matmul_at",
                format!("{}x*", self.rows),
                other,
            ));
        }
        let (m, n) = (self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        // Accumulate rank-1 updates; inner loop over contiguous rows of
        // `other` and `out`.
        for p in 0..self.rows {
            let a_row = self.row(p);
            let b_row = other.row(p);
            for (i, &a_pi) in a_row.iter().enumerate().take(m) {
                if a_pi == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a_pi * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if !self.same_shape(other) {
            return Err(Self::shape_err(
                "add",
                format!("{}x{}", self.rows, self.cols),
                other,
            ));
        }
        let mut out = self.clone();
        out.add_in_place(other)?;
        Ok(out)
    }

    pub fn add_in_place(&mut self, other: &Matrix) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Self::shape_err(
                "add_in_place",
                format!("{}x{}", self.rows, self.cols),
                other,
            ));
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= factor;
        }
        out
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if !self.same_shape(other) {
            return Err(Self::shape_err(
                "hadamard",
                format!("{}x{}", self.rows, self.cols),
                other,
            ));
        }
        let mut out = self.clone();
        for (a, &b) in out.data.iter_mut().zip(other.data.iter()) {
            *a *= b;
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = f(*v);
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Maximum absolute entry; 0 for empty matrices.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let id = Matrix::identity(2);
        assert_eq!(id.matmul(&x).unwrap(), x);
    }

    #[test]
    fn matmul_hand_case() {
        // [[1,1]] * [[1,2],[3,4]] = [[4,6]]
        let w = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let y = w.matmul(&x).unwrap();
        assert_eq!(y, Matrix::from_rows(&[vec![4.0, 6.0]]).unwrap());
    }

    #[test]
    fn matmul_shape_mismatch_rejected() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn transposed_variants_agree_with_plain_matmul() {
        let a = Matrix::from_vec(3, 4, (0..12).map(|i| i as f64 * 0.37 - 2.0).collect()).unwrap();
        let b = Matrix::from_vec(5, 4, (0..20).map(|i| (i as f64).sin()).collect()).unwrap();
        assert_eq!(a.matmul_bt(&b).unwrap(), a.matmul(&b.transpose()).unwrap());

        let c = Matrix::from_vec(3, 5, (0..15).map(|i| (i as f64).cos()).collect()).unwrap();
        assert_eq!(a.matmul_at(&c).unwrap(), a.transpose().matmul(&c).unwrap());
    }

    #[test]
    fn from_vec_rejects_nan() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn from_vec_rejects_length_mismatch() {
        assert!(Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0]).is_err());
    }
}
