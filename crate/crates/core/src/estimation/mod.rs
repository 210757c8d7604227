//! Score-matching estimation.
//!
//! For an exponential family the score-matching objective is quadratic,
//! `½ φᵀΓ̂φ - φᵀĤ`, so the unpenalized estimator solves `Γ̂φ = Ĥ`.

mod lasso;
mod linalg;
mod moments;

use serde::{Deserialize, Serialize};

pub use lasso::{
    default_lambda_grid, fit_group_lasso, fit_group_lasso_from_moments, lambda_max, select_lambda_cv,
    CvResult, CvRow, LassoOptions,
};
pub(crate) use linalg::SpdSolver;
pub use moments::{accumulate_moments, gamma_h_of_sample, jacobian_d, sm_objective, ScoreMatchingMoments};
pub(crate) use moments::{residual_columns, MomentSums};

use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::model::{FamilyMask, TorusGraphParams};

/// Condition estimates above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    GroupLasso { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: TorusGraphParams,
    pub moments: ScoreMatchingMoments,
    pub method: Method,
    /// `‖Γ̂_AA φ̂_A - Ĥ_A‖∞` on the active set.
    pub residual_norm: f64,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.moments.n
    }

    pub fn family(&self) -> &FamilyMask {
        self.params.family()
    }
}

pub(crate) fn check_family(data: &AngleMatrix, family: &FamilyMask) -> Result<()> {
    if family.d() != data.d() {
        return Err(TorusError::Dimension {
            expected: data.d(),
            got: family.d(),
        });
    }
    Ok(())
}

/// Active-set residual `‖Γ̂_AA φ_A - Ĥ_A‖∞`.
pub(crate) fn active_residual(moments: &ScoreMatchingMoments, phi: &[f64], active: &[usize]) -> f64 {
    active
        .iter()
        .map(|&a| {
            let row: f64 = active.iter().map(|&b| moments.gamma_hat[(a, b)] * phi[b]).sum();
            (row - moments.h_hat[a]).abs()
        })
        .fold(0.0, f64::max)
}

/// Unpenalized estimator restricted to the family's free parameters.
pub fn fit_closed_form(data: &AngleMatrix, family: &FamilyMask) -> Result<FitResult> {
    check_family(data, family)?;
    let moments = accumulate_moments(data)?;
    fit_closed_form_from_moments(moments, family)
}

pub fn fit_closed_form_from_moments(moments: ScoreMatchingMoments, family: &FamilyMask) -> Result<FitResult> {
    let p = moments.n_params();
    if family.active().len() != p {
        return Err(TorusError::Dimension {
            expected: p,
            got: family.active().len(),
        });
    }
    let active = family.active_indices();
    let solver = SpdSolver::for_active(&moments, &active)?;
    let rhs: Vec<f64> = active.iter().map(|&a| moments.h_hat[a]).collect();
    let sol = solver.solve_refined(&rhs);
    let mut phi = vec![0.0; p];
    for (&a, v) in active.iter().zip(sol) {
        phi[a] = v;
    }
    let residual_norm = active_residual(&moments, &phi, &active);
    let params = TorusGraphParams::new(family.d(), phi, family.clone())?;
    Ok(FitResult {
        params,
        moments,
        method: Method::ClosedForm,
        residual_norm,
    })
}
