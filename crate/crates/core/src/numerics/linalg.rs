//! Small dense matrices and SPD solves via Cholesky.
//!
//! The market dimension N is small (a handful of risky assets), so a plain
//! row-major matrix with an O(n^3) Cholesky is all that is needed.

use crate::error::{Error, Result};

/// Condition-number guard: sigma sigma^T with a 1-norm condition estimate
/// above this is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::invalid("matrix must be non-empty"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("matrix rows have unequal lengths"));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// v^T applied from the left: returns self^T v without materializing the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j) * v[i]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.set(i, j, out.get(i, j) + a * other.get(k, j));
                }
            }
        }
        out
    }

    /// self * self^T, the Gram matrix of the rows.
    pub fn gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v: f64 = (0..self.cols).map(|k| self.get(i, k) * self.get(j, k)).sum();
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum())
            .fold(0.0, f64::max)
    }
}

/// Cholesky factor of an SPD matrix, reusable for repeated solves.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Matrix,
}

impl SpdFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::invalid("SPD factorization requires a square matrix"));
        }
        let n = a.rows;
        let sym_tol = 1e-8;
        for i in 0..n {
            for j in 0..i {
                let scale = a.get(i, j).abs().max(a.get(j, i).abs()).max(1.0);
                if (a.get(i, j) - a.get(j, i)).abs() > sym_tol * scale {
                    return Err(Error::singular("matrix is not symmetric"));
                }
            }
        }
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a.get(i, j);
                for k in 0..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::singular(format!(
                            "Cholesky pivot {i} is not positive ({sum:.3e})"
                        )));
                    }
                    l.set(i, j, sum.sqrt());
                } else {
                    l.set(i, j, sum / l.get(j, j));
                }
            }
        }
        Ok(SpdFactor { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lower.get(i, k) * y[k];
            }
            y[i] /= self.lower.get(i, i);
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.lower.get(k, i) * y[k];
            }
            y[i] /= self.lower.get(i, i);
        }
        y
    }

    /// Explicit inverse, column by column.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            let col = self.solve(&unit);
            unit[j] = 0.0;
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

/// 1-norm condition estimate of an SPD matrix via its explicit inverse.
pub fn spd_condition_number(a: &Matrix) -> Result<f64> {
    let factor = SpdFactor::new(a)?;
    Ok(a.one_norm() * factor.inverse().one_norm())
}

/// Solve A x = rhs for SPD A with the condition-number guard.
pub fn spd_solve(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let factor = SpdFactor::new(a)?;
    let cond = a.one_norm() * factor.inverse().one_norm();
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::singular(format!(
            "condition number {cond:.3e} exceeds limit {CONDITION_LIMIT:.0e}"
        )));
    }
    Ok(factor.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_solve_returns_rhs() {
        let a = Matrix::identity(3);
        let x = spd_solve(&a, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let x = spd_solve(&a, &[8.0, 27.0]).unwrap();
        assert_relative_eq!(x[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(x[1], 3.0, max_relative = 1e-14);
    }

    #[test]
    fn fig1_gram_solve_matches_adjugate() {
        // sigma from the reference two-asset market
        let sigma =
            Matrix::from_rows(&[vec![0.19, 0.15], vec![0.17, 0.21]]).unwrap();
        let a = sigma.gram();
        let alpha = [0.03, 0.07];
        let x = spd_solve(&a, &alpha).unwrap();
        // independent 2x2 adjugate inversion
        let det = a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0);
        let ex = [
            (a.get(1, 1) * alpha[0] - a.get(0, 1) * alpha[1]) / det,
            (-a.get(1, 0) * alpha[0] + a.get(0, 0) * alpha[1]) / det,
        ];
        assert_relative_eq!(x[0], ex[0], max_relative = 1e-12);
        assert_relative_eq!(x[1], ex[1], max_relative = 1e-12);
        // the first weighted risk premium is negative: a short position
        assert!(x[0] < 0.0 && x[1] > 0.0);
        assert_relative_eq!(x[0], -10.976080246913580, max_relative = 1e-12);
        assert_relative_eq!(x[1], 10.551697530864197, max_relative = 1e-12);
    }

    #[test]
    fn residual_is_small_for_well_conditioned_systems() {
        let a = Matrix::from_rows(&[
            vec![2.5, 0.3, 0.1],
            vec![0.3, 1.8, -0.2],
            vec![0.1, -0.2, 3.2],
        ])
        .unwrap();
        let rhs = [1.0, 2.0, 3.0];
        let x = spd_solve(&a, &rhs).unwrap();
        let back = a.matvec(&x);
        let norm_rhs: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = back
            .iter()
            .zip(&rhs)
            .map(|(b, r)| (b - r) * (b - r))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-12 * norm_rhs);
    }

    #[test]
    fn non_spd_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(); // indefinite
        assert!(spd_solve(&a, &[1.0, 1.0]).is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.5, 1.0]]).unwrap();
        assert!(spd_solve(&asym, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn near_singular_is_rejected() {
        let eps = 1e-14;
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + eps]]).unwrap();
        assert!(spd_solve(&a, &[1.0, 1.0]).is_err());
    }
}
