//! Dense linear least squares.
//!
//! [`lls_solve`] uses Householder QR with column pivoting. The pivot order
//! doubles as the rank test: once the largest remaining column norm drops
//! below `RANK_TOLERANCE` times the first pivot, the remaining columns are
//! reported as dependent. [`normal_equations_solve`] forms `A^T A` and
//! factors it by Cholesky; it squares the condition number and is kept only
//! as a cross-check.

use crate::error::{Error, Result};

pub const RANK_TOLERANCE: f64 = 1e-10;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Input(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn column(values: &[f64]) -> Self {
        Matrix { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `A^T y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_shape(a: &Matrix, b: &[f64]) -> Result<()> {
    if a.rows != b.len() {
        return Err(Error::Input(format!("{} rows but {} targets", a.rows, b.len())));
    }
    if a.cols == 0 || a.rows < a.cols {
        return Err(Error::Input(format!("least squares needs rows >= columns >= 1, got {}x{}", a.rows, a.cols)));
    }
    Ok(())
}

/// Minimizer of `||A x - b||`. Dependent columns are named 1-based.
pub fn lls_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    check_shape(a, b)?;
    let n = a.cols;
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r = vec![vec![0.0; n]; n];
    let mut first_pivot = 0.0;

    for k in 0..n {
        let tail_norm = |c: &Vec<f64>| norm(&c[k..]);
        let (p, pn) =
            (k..n).map(|j| (j, tail_norm(&cols[j]))).fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if k == 0 {
            first_pivot = pn;
        }
        if !(pn > RANK_TOLERANCE * first_pivot) || pn == 0.0 {
            let mut dependent: Vec<usize> = perm[k..].iter().map(|j| j + 1).collect();
            dependent.sort_unstable();
            return Err(Error::Singular { columns: dependent });
        }
        cols.swap(k, p);
        perm.swap(k, p);
        for row in r.iter_mut() {
            row.swap(k, p);
        }

        let x0 = cols[k][k];
        let alpha = if x0 >= 0.0 { -pn } else { pn };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |c: &mut [f64]| {
            let s: f64 = v.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vv;
            for (ci, vi) in c[k..].iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        };
        if vv > 0.0 {
            for c in cols.iter_mut().skip(k + 1) {
                reflect(c);
            }
            reflect(&mut rhs);
        }
        r[k][k] = alpha;
        for j in k + 1..n {
            r[k][j] = cols[j][k];
        }
    }

    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| r[i][j] * z[j]).sum();
        z[i] = (rhs[i] - s) / r[i][i];
    }
    let mut x = vec![0.0; n];
    for (k, &j) in perm.iter().enumerate() {
        x[j] = z[k];
    }
    Ok(x)
}

/// `(A^T A)^{-1} A^T b` by Cholesky.
pub fn normal_equations_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    check_shape(a, b)?;
    let n = a.cols;
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..a.rows {
        let row = a.row(i);
        for p in 0..n {
            for q in 0..=p {
                g[p][q] += row[p] * row[q];
            }
        }
    }
    let atb = a.tr_mul_vec(b);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = g[i][i] - s;
                if !(d > 0.0) {
                    return Err(Error::Singular { columns: vec![i + 1] });
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (g[i][j] - s) / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (atb[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i][i];
    }
    Ok(x)
}
