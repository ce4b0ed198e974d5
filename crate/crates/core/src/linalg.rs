//! Small dense linear algebra over a [`Scalar`]: pivoted Gaussian elimination
//! for solves, inverses and determinants. Pivoting is by largest approximate
//! magnitude, which on the exact backend just avoids zero pivots.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            *m.at_mut(i, i) = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "not square");
        Matrix {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut S {
        &mut self.data[i * self.n + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out: Matrix<S> = Matrix::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let a = self.at(i, k).clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..self.n {
                    *out.at_mut(i, j) = out.at(i, j).clone() + a.clone() * other.at(k, j).clone();
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.n {
                    acc = acc + self.at(i, j).clone() * v[j].clone();
                }
                acc
            })
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.at(i, j).eq_tol(self.at(j, i), tol) {
                    return false;
                }
            }
        }
        true
    }

    /// Largest relative deviation of `self * other` from the identity.
    pub fn product_identity_residual(&self, other: &Self) -> f64 {
        let p = self.mul(other);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { S::one() } else { S::zero() };
                worst = worst.max(p.at(i, j).rel_residual(&target));
            }
        }
        worst
    }

    /// Solve `self * x = b` by partial-pivot elimination.
    pub fn solve(&self, b: &[S]) -> Result<Vec<S>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| {
                    a[r1 * n + col]
                        .magnitude()
                        .partial_cmp(&a[r2 * n + col].magnitude())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[pivot_row * n + col].is_zero() {
                return Err(Error::SingularHessian);
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                x.swap(col, pivot_row);
            }
            let inv = a[col * n + col].invert()?;
            for row in (col + 1)..n {
                let factor = a[row * n + col].clone() * inv.clone();
                if factor.is_zero() {
                    continue;
                }
                for j in col..n {
                    a[row * n + j] =
                        a[row * n + j].clone() - factor.clone() * a[col * n + j].clone();
                }
                x[row] = x[row].clone() - factor * x[col].clone();
            }
        }
        for col in (0..n).rev() {
            let mut acc = x[col].clone();
            for j in (col + 1)..n {
                acc = acc - a[col * n + j].clone() * x[j].clone();
            }
            x[col] = acc * a[col * n + col].invert()?;
        }
        Ok(x)
    }

    /// Inverse by solving against the identity columns.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for j in 0..n {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            let col = self.solve(&e)?;
            for i in 0..n {
                *out.at_mut(i, j) = col[i].clone();
            }
        }
        Ok(out)
    }

    /// Determinant by elimination.
    pub fn determinant(&self) -> Result<S> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = S::one();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| {
                    a[r1 * n + col]
                        .magnitude()
                        .partial_cmp(&a[r2 * n + col].magnitude())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[pivot_row * n + col].is_zero() {
                return Ok(S::zero());
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                det = -det;
            }
            det = det * a[col * n + col].clone();
            let inv = a[col * n + col].invert()?;
            for row in (col + 1)..n {
                let factor = a[row * n + col].clone() * inv.clone();
                if factor.is_zero() {
                    continue;
                }
                for j in col..n {
                    a[row * n + j] =
                        a[row * n + j].clone() - factor.clone() * a[col * n + j].clone();
                }
            }
        }
        Ok(det)
    }
}

/// Least squares `min || M x - b ||` for a tall matrix given by columns,
/// via twice-iterated modified Gram-Schmidt QR (stable enough that the
/// conditioning of `M` is not squared).
pub fn lstsq_columns<S: Scalar>(columns: &[Vec<S>], b: &[S]) -> Result<Vec<S>> {
    let ncols = columns.len();
    let nrows = b.len();
    assert!(columns.iter().all(|c| c.len() == nrows));
    assert!(nrows >= ncols, "underdetermined system");
    let inner = |a: &[S], c: &[S]| -> S {
        let mut acc = S::zero();
        for (x, y) in a.iter().zip(c.iter()) {
            acc = acc + x.conj() * y.clone();
        }
        acc
    };
    let mut q: Vec<Vec<S>> = Vec::with_capacity(ncols);
    let mut r = vec![vec![S::zero(); ncols]; ncols];
    for (cidx, col) in columns.iter().enumerate() {
        let mut v = col.clone();
        for _pass in 0..2 {
            for (bidx, qb) in q.iter().enumerate() {
                let proj = inner(qb, &v);
                for (ve, qe) in v.iter_mut().zip(qb.iter()) {
                    *ve = ve.clone() - proj.clone() * qe.clone();
                }
                r[bidx][cidx] = r[bidx][cidx].clone() + proj;
            }
        }
        let norm = inner(&v, &v).sqrt()?;
        if norm.is_zero() {
            return Err(Error::SingularHessian);
        }
        let ninv = norm.invert()?;
        r[cidx][cidx] = norm;
        q.push(v.into_iter().map(|x| x * ninv.clone()).collect());
    }
    // back-substitute R x = Q^H b
    let mut x: Vec<S> = q.iter().map(|qc| inner(qc, b)).collect();
    for c in (0..ncols).rev() {
        let mut acc = x[c].clone();
        for k in (c + 1)..ncols {
            acc = acc - r[c][k].clone() * x[k].clone();
        }
        x[c] = acc * r[c][c].invert()?;
    }
    Ok(x)
}
