//! Cholesky solves on the active block of `Γ̂` with a condition guard.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{ScoreMatchingMoments, CONDITION_LIMIT};
use crate::error::{Result, TorusError};

pub(crate) struct SpdSolver {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

impl SpdSolver {
    pub(crate) fn for_active(moments: &ScoreMatchingMoments, active: &[usize]) -> Result<Self> {
        let m = active.len();
        let matrix = DMatrix::from_fn(m, m, |r, c| moments.gamma_hat[(active[r], active[c])]);
        let singular = |condition: f64| TorusError::SingularMoments {
            condition,
            n: moments.n,
            n_params: m,
            full_params: moments.n_params(),
        };
        if m == 0 {
            return Err(singular(f64::INFINITY));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| singular(f64::INFINITY))?;
        if chol.l_dirty().diagonal().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(singular(f64::INFINITY));
        }
        let mut solver = SpdSolver {
            matrix,
            chol,
            condition: f64::INFINITY,
        };
        solver.condition = solver.estimate_condition();
        if solver.condition.is_nan() || solver.condition > CONDITION_LIMIT {
            return Err(singular(solver.condition));
        }
        Ok(solver)
    }

    #[cfg(test)]
    pub(crate) fn condition(&self) -> f64 {
        self.condition
    }

    pub(crate) fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()
    }

    /// Solve followed by one step of iterative refinement.
    pub(crate) fn solve_refined(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        let mut x = self.chol.solve(&b);
        let r = &b - &self.matrix * &x;
        x += self.chol.solve(&r);
        x.as_slice().to_vec()
    }

    pub(crate) fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    /// 1-norm condition number, with `‖A⁻¹‖₁` from Hager's estimator.
    fn estimate_condition(&self) -> f64 {
        let m = self.dim();
        let norm_a = (0..m)
            .map(|c| self.matrix.column(c).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut x = DVector::from_element(m, 1.0 / m as f64);
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.chol.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.chol.solve(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            if zmax <= z.dot(&x) || j == last_j {
                break;
            }
            x.fill(0.0);
            x[j] = 1.0;
            last_j = j;
        }
        // alternating-sign probe guards against underestimates
        let alt = DVector::from_fn(m, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (m.max(2) - 1) as f64)
        });
        let alt_est = 2.0 * self.chol.solve(&alt).iter().map(|v| v.abs()).sum::<f64>() / (3.0 * m as f64);
        let inv_norm = est.max(alt_est);
        if !inv_norm.is_finite() {
            return f64::INFINITY;
        }
        norm_a * inv_norm
    }
}
