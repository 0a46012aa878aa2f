//! Small dense linear-algebra kernel.
//!
//! Everything the dynamics and diagnostics need lives here: a row-major
//! [`Matrix`], a symmetric wrapper [`SymMatrix`] with a Cholesky factorization,
//! Sherman–Morrison rank-one solves, the spectral norm by power iteration and
//! ordinary least-squares line fitting.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual bound for SPD solves: `‖Mx − b‖∞ ≤ SOLVE_TOL · (1 + ‖b‖∞)`.
pub const SOLVE_TOL: f64 = 1e-10;
/// Sherman–Morrison denominators below this magnitude are treated as singular.
pub const SINGULAR_UPDATE_TOL: f64 = 1e-12;
/// Relative tolerance on successive power-iteration estimates.
pub const NORM_REL_TOL: f64 = 1e-9;
/// Power-iteration cap.
pub const NORM_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("rank-one update is singular: 1 + s·vᵀM⁻¹v = {denominator}")]
    SingularUpdate { denominator: f64 },
    #[error("power iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("degenerate regression input: {0}")]
    DegenerateInput(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `self + factor·other`
    pub fn add_scaled(&self, factor: f64, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * factor).collect() }
    }

    /// `diag(left)·self·diag(right)`
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Matrix {
        assert_eq!(left.len(), self.rows);
        assert_eq!(right.len(), self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] *= left[i] * right[j];
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Square symmetric matrix. Symmetry is exact: the constructor averages the
/// two triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self, NumericsError> {
        if !m.is_square() {
            return Err(NumericsError::NotSquare { rows: m.rows, cols: m.cols });
        }
        let mut m = m;
        let n = m.rows;
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `self + s·v·vᵀ`
    pub fn rank_one_added(&self, s: f64, v: &[f64]) -> SymMatrix {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let mut m = self.0.clone();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += s * v[i] * v[j];
            }
        }
        SymMatrix(m)
    }

    pub fn cholesky(&self) -> Result<Cholesky, NumericsError> {
        Cholesky::factor(self)
    }
}

/// Lower-triangular factor `L` with `M = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    /// Fails with `NotPositiveDefinite` when a pivot is not safely positive,
    /// relative to the largest diagonal entry.
    pub fn factor(m: &SymMatrix) -> Result<Self, NumericsError> {
        let a = m.as_matrix();
        let n = a.rows;
        let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let floor = f64::EPSILON * n as f64 * max_diag.max(f64::MIN_POSITIVE);
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > floor) {
                return Err(NumericsError::NotPositiveDefinite { row: j, pivot });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let n = self.dim();
        if b.len() != n {
            return Err(NumericsError::DimensionMismatch { expected: n, got: b.len() });
        }
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= l[(i, k)] * y[k];
            }
            y[i] = v / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= l[(k, i)] * y[k];
            }
            y[i] = v / l[(i, i)];
        }
        Ok(y)
    }
}

/// Solves `M x = b` for symmetric positive definite `M`.
pub fn solve_spd(m: &SymMatrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    m.cholesky()?.solve(b)
}

/// Solves `(M + s·v·vᵀ) x = b` through the Sherman–Morrison identity, using two
/// solves against `M` only.
pub fn rank_one_update_solve(m: &SymMatrix, s: f64, v: &[f64], b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = m.dim();
    if v.len() != n {
        return Err(NumericsError::DimensionMismatch { expected: n, got: v.len() });
    }
    let chol = m.cholesky()?;
    let y = chol.solve(b)?;
    let z = chol.solve(v)?;
    let denominator = 1.0 + s * dot(v, &z);
    if denominator.abs() < SINGULAR_UPDATE_TOL {
        return Err(NumericsError::SingularUpdate { denominator });
    }
    let coef = s * dot(v, &y) / denominator;
    Ok(y.iter().zip(&z).map(|(yi, zi)| yi - coef * zi).collect())
}

/// Spectral norm `‖M‖₂`, the square root of the dominant eigenvalue of `MᵀM`.
///
/// Power iteration starts from the all-ones vector with a small deterministic
/// ramp added, so results are reproducible for fixed input.
pub fn operator_norm(m: &Matrix) -> Result<f64, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare { rows: m.rows, cols: m.cols });
    }
    let n = m.rows;
    if n == 0 || m.data.iter().all(|&a| a == 0.0) {
        return Ok(0.0);
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * (i as f64 + 1.0) / n as f64).collect();
    normalize(&mut v);
    let mut estimate = 0.0;
    for _ in 0..NORM_MAX_ITER {
        let mv = m.mul_vec(&v);
        // Rayleigh quotient of MᵀM at the unit vector v.
        let next = norm2(&mv);
        let mut w = m.transpose_mul_vec(&mv);
        let wn = norm2(&w);
        if wn == 0.0 {
            // start vector in the kernel of M
            return Err(NumericsError::NoConvergence { iterations: 0 });
        }
        w.iter_mut().for_each(|x| *x /= wn);
        if (next - estimate).abs() <= NORM_REL_TOL * next {
            return Ok(next.max(wn.sqrt()));
        }
        estimate = next;
        v = w;
    }
    Err(NumericsError::NoConvergence { iterations: NORM_MAX_ITER })
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionLine {
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
}

impl RegressionLine {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn linear_regression(points: &[(f64, f64)]) -> Result<RegressionLine, NumericsError> {
    if points.len() < 2 {
        return Err(NumericsError::DegenerateInput("need at least two points"));
    }
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(NumericsError::DegenerateInput("all x values are equal"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum();
    // Constant y is fit exactly by the horizontal line.
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RegressionLine { slope, intercept, r_squared })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
