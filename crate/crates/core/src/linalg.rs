//! Dense small-matrix algebra: symmetric eigendecomposition, SPD powers and
//! log-determinants, leverage scores and least-squares residuals.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a symmetric matrix is treated as singular.
pub const SPD_FLOOR: f64 = 1e-12;
/// Relative tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_SWEEPS: usize = 100;

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.row_iter().map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    /// `A^T x`.
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "t_matvec dimension");
        let mut out = vec![0.0; self.cols];
        for (r, &xi) in self.row_iter().zip(x) {
            for (o, &v) in out.iter_mut().zip(r) {
                *o += v * xi;
            }
        }
        out
    }

    /// `A^T A`.
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Self::zeros(d, d);
        for r in self.row_iter() {
            for i in 0..d {
                let ri = r[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..d {
                    g.data[i * d + j] += ri * r[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g.data[i * d + j] = g.data[j * d + i];
            }
        }
        g
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows > 0 && other.rows > 0 && self.cols != other.cols {
            return Err(Error::DimMismatch {
                expected: self.cols,
                actual: other.cols,
            });
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }

    pub fn with_row(&self, row: &[f64]) -> Result<Matrix> {
        self.vstack(&Matrix::from_rows(&[row])?)
    }

    /// Prepends `row` above the existing rows.
    pub fn with_leading_row(&self, row: &[f64]) -> Result<Matrix> {
        Matrix::from_rows(&[row])?.vstack(self)
    }

    pub fn without_row(&self, i: usize) -> Matrix {
        assert!(i < self.rows, "row index out of range");
        let mut data = Vec::with_capacity((self.rows - 1) * self.cols);
        data.extend_from_slice(&self.data[..i * self.cols]);
        data.extend_from_slice(&self.data[(i + 1) * self.cols..]);
        Matrix {
            rows: self.rows - 1,
            cols: self.cols,
            data,
        }
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.row_iter().map(|r| dot(r, r).sqrt()).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn check_symmetric(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let asym = self.max_asymmetry();
        if asym > SYMMETRY_TOL * self.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(())
    }

    fn symmetrized(&self) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// True when the columns are linearly independent (Gram eigenvalue floor).
    pub fn has_full_column_rank(&self) -> bool {
        self.rows >= self.cols && self.cols > 0 && is_nonsingular_gram(&self.gram())
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

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::ShapeMismatch("Cholesky needs a square matrix".into()));
        }
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)].abs()));
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut s = a[(j, j)];
            for k in 0..j {
                s -= l[(j, k)] * l[(j, k)];
            }
            if !(s > SPD_FLOOR * max_diag) || max_diag == 0.0 {
                return Err(Error::NotSpd);
            }
            let ljj = s.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// `L^{-1} b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `v^T A^{-1} v`.
    pub fn quad_inverse(&self, v: &[f64]) -> f64 {
        let y = self.solve_lower(v);
        dot(&y, &y)
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrized()
    }

    pub fn logdet(&self) -> f64 {
        (0..self.l.rows).map(|i| 2.0 * self.l[(i, i)].ln()).sum()
    }
}

/// Symmetric eigendecomposition `M = U diag(values) U^T`, values descending.
#[derive(Debug, Clone)]
pub struct SymEvd {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEvd {
    fn check_floor(&self) -> Result<()> {
        let max = self.values.first().copied().unwrap_or(0.0);
        let min = self.values.last().copied().unwrap_or(0.0);
        if !(max > 0.0) || !(min > SPD_FLOOR * max) {
            return Err(Error::NotSpd);
        }
        Ok(())
    }

    fn reassemble(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let u = &self.vectors;
        let mut m = Matrix::zeros(n, n);
        for k in 0..n {
            let s = f(self.values[k]);
            for i in 0..n {
                let uik = u[(i, k)] * s;
                if uik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m[(i, j)] += uik * u[(j, k)];
                }
            }
        }
        m.symmetrized()
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_evd(m: &Matrix) -> Result<SymEvd> {
    m.check_symmetric()?;
    let n = m.rows;
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let total: f64 = a.data.iter().map(|x| x * x).sum();
    for _ in 0..JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off == 0.0 || off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new)] = v[(i, old)];
        }
    }
    Ok(SymEvd { values, vectors })
}

/// `M^{power}` for SPD `M`.
pub fn spd_power(m: &Matrix, power: f64) -> Result<Matrix> {
    let evd = sym_evd(m)?;
    evd.check_floor()?;
    Ok(evd.reassemble(|l| l.powf(power)))
}

/// `M^{-1/2}` for SPD `M`.
pub fn inv_sqrt(m: &Matrix) -> Result<Matrix> {
    spd_power(m, -0.5)
}

/// `M^{1/2}` for SPD `M`.
pub fn sqrt_spd(m: &Matrix) -> Result<Matrix> {
    spd_power(m, 0.5)
}

/// `ln det M` as the sum of log eigenvalues.
pub fn logdet(m: &Matrix) -> Result<f64> {
    let evd = sym_evd(m)?;
    evd.check_floor()?;
    Ok(evd.values.iter().map(|l| l.ln()).sum())
}

fn is_nonsingular_gram(g: &Matrix) -> bool {
    sym_evd(g).and_then(|e| e.check_floor()).is_ok()
}

/// Cholesky factor of `D^T D`, rejecting rank-deficient `D`.
pub fn gram_factor(d: &Matrix) -> Result<Cholesky> {
    let g = d.gram();
    if d.rows < d.cols || !is_nonsingular_gram(&g) {
        return Err(Error::RankDeficient);
    }
    Cholesky::new(&g).map_err(|_| Error::RankDeficient)
}

/// Leverage score `v_i^T (D^T D)^{-1} v_i` of every row.
pub fn leverage_scores(d: &Matrix) -> Result<Vec<f64>> {
    let chol = gram_factor(d)?;
    Ok(d.row_iter().map(|r| chol.quad_inverse(r).clamp(0.0, 1.0)).collect())
}

/// Least-squares data: features `B` (n x d) and response `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    features: Matrix,
    response: Vec<f64>,
}

impl RegressionData {
    pub fn new(features: Matrix, response: Vec<f64>) -> Result<Self> {
        if response.len() != features.rows() {
            return Err(Error::DimMismatch {
                expected: features.rows(),
                actual: response.len(),
            });
        }
        if response.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("response entries must be finite".into()));
        }
        if features.rows() <= features.cols() {
            return Err(Error::InvalidParameter(format!(
                "regression needs more rows than features ({} <= {})",
                features.rows(),
                features.cols()
            )));
        }
        Ok(Self { features, response })
    }

    /// Splits `[B, b]`, taking the last column as the response.
    pub fn from_data(data: &Matrix) -> Result<Self> {
        if data.cols() < 2 {
            return Err(Error::ShapeMismatch("regression data needs at least two columns".into()));
        }
        let d = data.cols() - 1;
        let rows: Vec<Vec<f64>> = data.row_iter().map(|r| r[..d].to_vec()).collect();
        let response = data.column(d);
        Self::new(Matrix::from_rows(&rows)?, response)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    /// The concatenation `[B, b]`.
    pub fn data(&self) -> Matrix {
        let d = self.d();
        let mut out = Matrix::zeros(self.n(), d + 1);
        for i in 0..self.n() {
            out.data[i * (d + 1)..i * (d + 1) + d].copy_from_slice(self.features.row(i));
            out[(i, d)] = self.response[i];
        }
        out
    }

    /// Appends the rows of `sigma * I_{d+1}` to `[B, b]`.
    pub fn regularized(&self, sigma: f64) -> Result<Self> {
        let reg = Matrix::identity(self.d() + 1).scaled(sigma);
        Self::from_data(&self.data().vstack(&reg)?)
    }

    pub fn without_row(&self, i: usize) -> Result<Self> {
        let mut response = self.response.clone();
        response.remove(i);
        Self::new(self.features.without_row(i), response)
    }
}

/// OLS solution, residual vector and per-row residual shares.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub x_opt: Vec<f64>,
    pub e: Vec<f64>,
    /// `e_i^2 / |e|^2`, all zero when `e = 0`.
    pub per_row: Vec<f64>,
}

impl Residuals {
    pub fn norm_sq(&self) -> f64 {
        dot(&self.e, &self.e)
    }
}

pub fn residuals(r: &RegressionData) -> Result<Residuals> {
    let chol = gram_factor(r.features())?;
    let x_opt = chol.solve(&r.features().t_matvec(r.response()));
    let fitted = r.features().matvec(&x_opt);
    let e: Vec<f64> = r.response().iter().zip(&fitted).map(|(b, f)| b - f).collect();
    let e2 = dot(&e, &e);
    let scale = dot(r.response(), r.response()).max(f64::MIN_POSITIVE);
    let per_row = if e2 <= 1e-28 * scale {
        vec![0.0; e.len()]
    } else {
        e.iter().map(|x| x * x / e2).collect()
    };
    Ok(Residuals { x_opt, e, per_row })
}

/// Multivariate Gaussian with SPD covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MvGaussian {
    mean: Vec<f64>,
    cov: Matrix,
}

impl MvGaussian {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if cov.rows() != mean.len() || cov.cols() != mean.len() {
            return Err(Error::DimMismatch {
                expected: mean.len(),
                actual: cov.rows(),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("mean entries must be finite".into()));
        }
        let evd = sym_evd(&cov)?;
        evd.check_floor()?;
        Ok(Self {
            mean,
            cov: cov.symmetrized(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }
}

/// Block-diagonal matrix with `copies` copies of `block` on the diagonal.
pub fn block_diagonal(block: &Matrix, copies: usize) -> Matrix {
    let d = block.rows();
    let n = d * copies;
    let mut m = Matrix::zeros(n, n);
    for c in 0..copies {
        for i in 0..d {
            for j in 0..d {
                m[(c * d + i, c * d + j)] = block[(i, j)];
            }
        }
    }
    m
}
