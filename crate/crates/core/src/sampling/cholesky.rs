use crate::error::{Error, Result};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(
                "matrix must be square and non-empty".into(),
            ));
        }
        Ok(Self {
            dim,
            data: rows.concat(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.dim + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum();
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| {
            (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol * self.max_abs_diagonal())
        })
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.get(i, i).abs())
            .fold(0.0, f64::max)
    }
}

/// Lower Cholesky factor `L` with `L * L^T = c`.
///
/// Fails with the 1-based index of the first non-positive pivot when `c` is not
/// positive definite.
pub fn cholesky_lower(c: &SquareMatrix) -> Result<SquareMatrix> {
    if !c.is_symmetric(1e-12) {
        return Err(Error::InvalidArgument(
            "covariance matrix is not symmetric".into(),
        ));
    }
    let n = c.dim();
    let mut l = SquareMatrix::zeros(n);
    for j in 0..n {
        let pivot = c.get(j, j) - (0..j).map(|k| l.get(j, k).powi(2)).sum::<f64>();
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: j + 1 });
        }
        let diag = pivot.sqrt();
        l.set(j, j, diag);
        for i in j + 1..n {
            let s = c.get(i, j) - (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum::<f64>();
            l.set(i, j, s / diag);
        }
    }
    Ok(l)
}
