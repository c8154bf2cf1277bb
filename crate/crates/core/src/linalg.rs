use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest eigenvalue a root metric may have before it counts as singular.
pub const SINGULAR_EIGENVALUE: f64 = 1e-12;

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solver for the root system `(M_r + reg I) u = p`.
///
/// Without regularization the metric must factor as Cholesky and have its
/// smallest eigenvalue above [`SINGULAR_EIGENVALUE`]. With `reg > 0` the
/// system is solved through a symmetric eigendecomposition, dropping
/// directions whose shifted eigenvalue is still below the threshold.
#[derive(Clone, Debug)]
pub enum RootSolver {
    Cholesky(Cholesky<f64, Dyn>),
    Eigen {
        vectors: DMatrix<f64>,
        inv_values: DVector<f64>,
    },
}

impl RootSolver {
    pub fn new(metric: &DMatrix<f64>, regularization: f64) -> Result<Self> {
        if regularization > 0.0 {
            let eig = SymmetricEigen::new(metric.clone());
            let inv_values = eig.eigenvalues.map(|l| {
                let shifted = l + regularization;
                if shifted > SINGULAR_EIGENVALUE {
                    1.0 / shifted
                } else {
                    0.0
                }
            });
            return Ok(RootSolver::Eigen {
                vectors: eig.eigenvectors,
                inv_values,
            });
        }
        let chol = Cholesky::new(metric.clone()).ok_or_else(|| Error::SingularMetric {
            min_eigenvalue: min_eigenvalue(metric),
        })?;
        // Cholesky can succeed on numerically singular matrices. Since
        // lambda_min = 1/|M^-1|_2 >= 1/|M^-1|_F, the eigensolver only runs
        // when the cheap bound is inconclusive.
        let inv_norm = chol.inverse().norm();
        if !inv_norm.is_finite() || 1.0 / inv_norm < SINGULAR_EIGENVALUE {
            let lmin = min_eigenvalue(metric);
            if lmin < SINGULAR_EIGENVALUE {
                return Err(Error::SingularMetric { min_eigenvalue: lmin });
            }
        }
        Ok(RootSolver::Cholesky(chol))
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            RootSolver::Cholesky(c) => c.solve(rhs),
            RootSolver::Eigen {
                vectors,
                inv_values,
            } => {
                let coeffs = vectors.tr_mul(rhs).component_mul(inv_values);
                vectors * coeffs
            }
        }
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a: f64, &b| a.max(b.abs()))
}

pub fn vec_max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a: f64, &b| a.max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_solve() {
        let m = DMatrix::from_diagonal_element(2, 2, 2.0);
        let s = RootSolver::new(&m, 0.0).unwrap();
        let u = s.solve(&DVector::from_vec(vec![2.0, 4.0]));
        assert!((u - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 3.0, 3.0, 3.0]);
        assert!(matches!(
            RootSolver::new(&m, 0.0),
            Err(Error::SingularMetric { .. })
        ));
        // Regularized pseudo-solve still works.
        let s = RootSolver::new(&m, 1e-3).unwrap();
        let u = s.solve(&DVector::from_vec(vec![6.0, 6.0]));
        assert!((u[0] - u[1]).abs() < 1e-12);
    }

    #[test]
    fn tiny_but_positive_eigenvalue_is_singular() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]));
        assert!(RootSolver::new(&m, 0.0).is_err());
    }

    #[test]
    fn symmetrize_averages() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 1.0]);
        symmetrize(&mut m);
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m[(1, 0)], 3.0);
    }
}
