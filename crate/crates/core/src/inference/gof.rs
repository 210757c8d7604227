//! Two-sample KS battery comparing data with draws from a fitted model.

use serde::{Deserialize, Serialize};

use crate::circular::{fisher_combine, ks_two_sample};
use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::model::TorusGraphParams;
use crate::sampling::{independent_chains, GibbsConfig};

pub const MIN_SYNTHETIC: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    /// Fisher-combined p-value of the per-channel tests.
    pub p_marginal: f64,
    /// Fisher-combined p-value of the pairwise difference tests; absent for d = 1.
    pub p_diff: Option<f64>,
    /// Fisher-combined p-value of the pairwise sum tests; absent for d = 1.
    pub p_sum: Option<f64>,
    pub channel_p: Vec<f64>,
    /// Per-pair p-values in canonical edge order.
    pub diff_p: Vec<f64>,
    pub sum_p: Vec<f64>,
}

fn ks_p(a: &[f64], b: &[f64]) -> Result<f64> {
    // a zero p-value would make the Fisher statistic infinite
    Ok(ks_two_sample(a, b)?.1.max(f64::MIN_POSITIVE))
}

/// Draws `n_synth` independent Gibbs states from `params` and compares, by two-sample
/// KS on values in `[0, 2π)`, every channel, every pairwise difference and
/// every pairwise sum with the data. Each group is Fisher-combined.
pub fn goodness_of_fit(data: &AngleMatrix, params: &TorusGraphParams, n_synth: usize, seed: u64) -> Result<GofResult> {
    if n_synth < MIN_SYNTHETIC {
        return Err(TorusError::domain(format!(
            "need at least {MIN_SYNTHETIC} synthetic samples, got {n_synth}"
        )));
    }
    if data.d() != params.d() {
        return Err(TorusError::Dimension {
            expected: params.d(),
            got: data.d(),
        });
    }
    let synth = independent_chains(params, n_synth, GibbsConfig::DEFAULT_BURN_IN, seed)?;
    let d = data.d();
    let channel_p = (0..d)
        .map(|j| ks_p(&data.column(j), &synth.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let mut diff_p = Vec::new();
    let mut sum_p = Vec::new();
    for (j, k) in params.layout().edges() {
        diff_p.push(ks_p(&data.differences(j, k), &synth.differences(j, k))?);
        sum_p.push(ks_p(&data.sums(j, k), &synth.sums(j, k))?);
    }
    let combine = |ps: &[f64]| -> Result<Option<f64>> {
        if ps.is_empty() {
            Ok(None)
        } else {
            fisher_combine(ps).map(Some)
        }
    };
    Ok(GofResult {
        p_marginal: fisher_combine(&channel_p)?,
        p_diff: combine(&diff_p)?,
        p_sum: combine(&sum_p)?,
        channel_p,
        diff_p,
        sum_p,
    })
}
