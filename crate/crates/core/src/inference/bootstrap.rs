//! Parametric bootstrap test that a set of edges is absent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::estimation::{
    accumulate_moments, default_lambda_grid, fit_group_lasso_from_moments, lambda_max, select_lambda_cv, FitResult,
    LassoOptions,
};
use crate::model::{FamilyKind, FamilyMask, TorusGraphParams};
use crate::rng::derive_seed;
use crate::sampling::{gibbs_sample, GibbsConfig};

pub const MIN_REPLICATES: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatistic {
    /// Number of tested edges with a nonzero penalized estimate.
    NonzeroEdgeCount,
    /// Largest coupling-block norm among the tested edges.
    MaxBlockNorm,
}

impl BootstrapStatistic {
    pub fn evaluate(self, params: &TorusGraphParams, edges: &[(usize, usize)]) -> f64 {
        match self {
            BootstrapStatistic::NonzeroEdgeCount => edges
                .iter()
                .filter(|&&(j, k)| params.coupling(j, k).iter().any(|&v| v != 0.0))
                .count() as f64,
            BootstrapStatistic::MaxBlockNorm => edges
                .iter()
                .map(|&(j, k)| params.coupling_norm(j, k))
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOptions {
    /// Family of both the null and the unrestricted fits.
    pub family: FamilyKind,
    pub folds: usize,
    pub grid_size: usize,
    /// Smallest grid penalty as a fraction of the largest useful one.
    pub grid_min_ratio: f64,
    pub lasso: LassoOptions,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            family: FamilyKind::Full,
            folds: 5,
            grid_size: 10,
            grid_min_ratio: 1e-2,
            lasso: LassoOptions::default(),
            burn_in: GibbsConfig::DEFAULT_BURN_IN,
            thin: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub p: f64,
    pub observed: f64,
    pub replicates: Vec<f64>,
    pub observed_lambda: f64,
    pub null_lambda: f64,
}

/// `(1 + #{b ≥ observed}) / (B + 1)`.
pub fn bootstrap_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&b| b >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Group-lasso fit with the penalty chosen by cross-validation.
fn cv_fit(data: &AngleMatrix, family: &FamilyMask, opts: &BootstrapOptions, seed: u64) -> Result<FitResult> {
    let moments = accumulate_moments(data)?;
    let top = lambda_max(&moments, family)?;
    let grid = default_lambda_grid(top, opts.grid_size, opts.grid_min_ratio);
    let cv = select_lambda_cv(data, family, opts.folds, &grid, seed, &opts.lasso)?;
    fit_group_lasso_from_moments(moments, family, cv.lambda_star, &opts.lasso)
}

fn lambda_of(fit: &FitResult) -> f64 {
    match fit.method {
        crate::estimation::Method::GroupLasso { lambda } => lambda,
        crate::estimation::Method::ClosedForm => 0.0,
    }
}

/// Tests that `null_edges` are absent: fits the model with those edges
/// removed, simulates `b` datasets of the same size from it, refits each
/// without restriction (penalty re-selected by cross-validation) and ranks
/// the observed statistic among the replicates.
pub fn bootstrap_null_test(
    data: &AngleMatrix,
    null_edges: &[(usize, usize)],
    b: usize,
    statistic: BootstrapStatistic,
    seed: u64,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if b < MIN_REPLICATES {
        return Err(TorusError::domain(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {b}"
        )));
    }
    if null_edges.is_empty() {
        return Err(TorusError::domain("no edges to test"));
    }
    let d = data.d();
    let full = FamilyMask::new(opts.family, d);
    let null = full.clone().with_zero_edges(null_edges)?;
    let edges = null.zero_edges().to_vec();

    let observed_fit = cv_fit(data, &full, opts, derive_seed(seed, 0))?;
    let observed = statistic.evaluate(&observed_fit.params, &edges);
    let null_fit = cv_fit(data, &null, opts, derive_seed(seed, 1))?;

    let replicates: Vec<Result<f64>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let base = 2 * i as u64 + 2;
            let cfg = GibbsConfig::new(data.n(), derive_seed(seed, base))
                .burn_in(opts.burn_in)
                .thin(opts.thin);
            let sim = gibbs_sample(&null_fit.params, &cfg)?;
            let fit = cv_fit(&sim, &full, opts, derive_seed(seed, base + 1))?;
            Ok(statistic.evaluate(&fit.params, &edges))
        })
        .collect();
    let replicates = replicates
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| TorusError::Replicate {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BootstrapResult {
        p: bootstrap_p_value(observed, &replicates),
        observed,
        replicates,
        observed_lambda: lambda_of(&observed_fit),
        null_lambda: lambda_of(&null_fit),
    })
}
