//! Small dense linear-algebra kernels used by the regression code.
//!
//! Systems here are tiny (tens of columns at most), so everything is plain
//! row-major `Vec<f64>` storage with no blocking.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a system is declared singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `XᵀX`.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let s: f64 = (0..self.rows)
                    .map(|r| self.get(r, i) * self.get(r, j))
                    .sum();
                g.set(i, j, s);
                g.set(j, i, s);
            }
        }
        g
    }

    /// `Xᵀy`.
    pub fn t_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c) * y[r]).sum())
            .collect()
    }

    pub fn mul_vec(&self, b: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(b).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::LengthMismatch(a.cols(), b.len()));
    }
    let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::SingularRegression);
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, pval) =
            (col..n)
                .map(|r| (r, m.get(r, col).abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pval < SINGULAR_RTOL * scale {
            return Err(Error::SingularRegression);
        }
        if piv != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(piv, c));
                m.set(piv, c, tmp);
            }
            x.swap(col, piv);
        }
        let d = m.get(col, col);
        for r in col + 1..n {
            let f = m.get(r, col) / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m.set(r, c, m.get(r, c) - f * m.get(col, c));
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|c| m.get(col, c) * x[c]).sum();
        x[col] = (x[col] - s) / m.get(col, col);
    }
    Ok(x)
}

/// Least-squares fit computed by Householder QR.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    /// Upper-triangular `R` factor, `cols × cols`, row-major.
    r: Matrix,
}

impl LeastSquares {
    /// Diagonal of `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ`.
    pub fn xtx_inv_diag(&self) -> Vec<f64> {
        let p = self.r.cols();
        // Columns of R⁻¹ by back substitution on unit vectors.
        let mut inv = Matrix::zeros(p, p);
        for j in 0..p {
            for i in (0..=j).rev() {
                let rhs = if i == j { 1.0 } else { 0.0 };
                let s: f64 = (i + 1..=j).map(|k| self.r.get(i, k) * inv.get(k, j)).sum();
                inv.set(i, j, (rhs - s) / self.r.get(i, i));
            }
        }
        (0..p)
            .map(|i| (i..p).map(|j| inv.get(i, j).powi(2)).sum())
            .collect()
    }
}

/// Minimises `‖Xβ − y‖²`. Requires `rows ≥ cols` and full column rank.
pub fn lstsq(x: &Matrix, y: &[f64]) -> Result<LeastSquares> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n < p || p == 0 {
        return Err(Error::SingularRegression);
    }
    let col_scale = (0..p)
        .map(|c| (0..n).map(|r| x.get(r, c).powi(2)).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);
    if col_scale == 0.0 || !col_scale.is_finite() {
        return Err(Error::SingularRegression);
    }
    let mut a = x.clone();
    let mut b = y.to_vec();
    for k in 0..p {
        let norm = (k..n).map(|r| a.get(r, k).powi(2)).sum::<f64>().sqrt();
        if norm < SINGULAR_RTOL * col_scale {
            return Err(Error::SingularRegression);
        }
        let alpha = if a.get(k, k) > 0.0 { -norm } else { norm };
        // v = a[k..,k] - alpha e1, stored in place
        let mut v: Vec<f64> = (k..n).map(|r| a.get(r, k)).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for c in k..p {
                let dot: f64 = (k..n).map(|r| v[r - k] * a.get(r, c)).sum();
                let f = 2.0 * dot / vnorm2;
                for r in k..n {
                    a.set(r, c, a.get(r, c) - f * v[r - k]);
                }
            }
            let dot: f64 = (k..n).map(|r| v[r - k] * b[r]).sum();
            let f = 2.0 * dot / vnorm2;
            for r in k..n {
                b[r] -= f * v[r - k];
            }
        }
        if a.get(k, k).abs() < SINGULAR_RTOL * col_scale {
            return Err(Error::SingularRegression);
        }
    }
    let mut r = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            r.set(i, j, a.get(i, j));
        }
    }
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r.get(i, j) * coef[j]).sum();
        coef[i] = (b[i] - s) / r.get(i, i);
    }
    Ok(LeastSquares { coef, r })
}
