//! Small dense matrices: just enough for q x q Pfaffian systems and Newton
//! solves with q bounded by the parameter dimension.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Accumulate `alpha * (self . x)` into `out`.
    pub fn matvec_acc(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            *o += alpha * dot;
        }
    }

    /// Column sums as a vector (1^T A).
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Solve `self * x = b` by LU with partial pivoting. `self` must be square.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut p = k;
            let mut max = a[piv[k] * n + k].abs();
            for (r, &pr) in piv.iter().enumerate().skip(k + 1) {
                let v = a[pr * n + k].abs();
                if v > max {
                    max = v;
                    p = r;
                }
            }
            if !(max > 0.0) || !max.is_finite() {
                return Err(Error::SingularHessian);
            }
            piv.swap(k, p);
            let pk = piv[k];
            let pivot = a[pk * n + k];
            for &pr in piv.iter().skip(k + 1) {
                let factor = a[pr * n + k] / pivot;
                a[pr * n + k] = factor;
                for j in k + 1..n {
                    a[pr * n + j] -= factor * a[pk * n + j];
                }
                x[pr] -= factor * x[pk];
            }
        }
        let mut out = vec![0.0; n];
        for k in (0..n).rev() {
            let pk = piv[k];
            let mut v = x[pk];
            for j in k + 1..n {
                v -= a[pk * n + j] * out[j];
            }
            out[k] = v / a[pk * n + k];
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularHessian);
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}
