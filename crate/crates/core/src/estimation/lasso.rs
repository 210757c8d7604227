//! Group-ℓ1 penalized score matching and cross-validated penalty selection.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::{active_residual, check_family, FitResult, Method, MomentSums, ScoreMatchingMoments, SpdSolver};
use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::model::{FamilyMask, Layout, TorusGraphParams};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub max_iter: usize,
    /// Relative objective change threshold.
    pub tol: f64,
    /// Largest coordinate change between iterates.
    pub step_tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            max_iter: 50_000,
            tol: 1e-9,
            step_tol: 1e-8,
        }
    }
}

/// The problem restricted to active coordinates.
struct Problem {
    active: Vec<usize>,
    gamma: DMatrix<f64>,
    h: DVector<f64>,
    /// Ranges of penalized blocks in compact coordinates.
    groups: Vec<std::ops::Range<usize>>,
}

impl Problem {
    fn new(moments: &ScoreMatchingMoments, family: &FamilyMask) -> Self {
        let active = family.active_indices();
        let m = active.len();
        let gamma = DMatrix::from_fn(m, m, |r, c| moments.gamma_hat[(active[r], active[c])]);
        let h = DVector::from_iterator(m, active.iter().map(|&a| moments.h_hat[a]));
        let layout = Layout::new(family.d());
        let mut groups = Vec::new();
        for (j, k) in layout.edges() {
            let o = layout.coupling(j, k);
            let lo = active.partition_point(|&a| a < o);
            let hi = active.partition_point(|&a| a < o + 4);
            if hi > lo {
                groups.push(lo..hi);
            }
        }
        Problem { active, gamma, h, groups }
    }

    fn smooth(&self, x: &DVector<f64>, gx: &DVector<f64>) -> f64 {
        // gx = Γx
        0.5 * x.dot(gx) - x.dot(&self.h)
    }

    fn penalty(&self, x: &DVector<f64>, lambda: f64) -> f64 {
        lambda
            * self
                .groups
                .iter()
                .map(|g| x.rows(g.start, g.len()).norm())
                .sum::<f64>()
    }

    fn prox(&self, z: &mut DVector<f64>, threshold: f64) {
        for g in &self.groups {
            let mut block = z.rows_mut(g.start, g.len());
            let norm = block.norm();
            let scale = if norm > threshold { 1.0 - threshold / norm } else { 0.0 };
            block *= scale;
        }
    }

    fn lipschitz_guess(&self) -> f64 {
        let m = self.h.len();
        let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
        let mut est = 1.0;
        for _ in 0..30 {
            let w = &self.gamma * &v;
            let n = w.norm();
            if n == 0.0 {
                break;
            }
            est = n;
            v = w / n;
        }
        est.max(1e-12)
    }

    fn expand(&self, x: &DVector<f64>, p: usize) -> Vec<f64> {
        let mut phi = vec![0.0; p];
        for (&a, v) in self.active.iter().zip(x.iter()) {
            phi[a] = *v;
        }
        phi
    }
}

fn solve(problem: &Problem, lambda: f64, opts: &LassoOptions, start: Option<DVector<f64>>) -> Result<DVector<f64>> {
    let m = problem.h.len();
    let mut x = start.unwrap_or_else(|| DVector::zeros(m));
    if m == 0 {
        return Ok(x);
    }
    let mut gx = &problem.gamma * &x;
    let mut fx = problem.smooth(&x, &gx) + problem.penalty(&x, lambda);
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut theta = 1.0f64;
    let mut step = 1.0 / problem.lipschitz_guess();
    let mut last_change = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let fy_smooth = problem.smooth(&y, &gy);
        let grad = &gy - &problem.h;
        let (z, gz, fz_smooth) = loop {
            let mut z = &y - step * &grad;
            problem.prox(&mut z, lambda * step);
            let gz = &problem.gamma * &z;
            let fz_smooth = problem.smooth(&z, &gz);
            let diff = &z - &y;
            let bound = fy_smooth + grad.dot(&diff) + diff.norm_squared() / (2.0 * step);
            if fz_smooth <= bound + 1e-15 * fy_smooth.abs().max(1.0) || step < 1e-300 {
                break (z, gz, fz_smooth);
            }
            step *= 0.5;
        };
        let fz = fz_smooth + problem.penalty(&z, lambda);
        if fz > fx {
            // objective went up: drop momentum and restart from x
            if theta == 1.0 {
                // plain proximal step from x cannot increase the objective
                // beyond rounding; treat as converged
                return Ok(x);
            }
            theta = 1.0;
            y = x.clone();
            gy = gx.clone();
            continue;
        }
        let change = (&z - &x).amax();
        let rel = (fx - fz).abs() / fx.abs().max(1.0);
        last_change = change;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        y = &z + beta * (&z - &x);
        gy = &gz + beta * (&gz - &gx);
        theta = theta_next;
        x = z;
        gx = gz;
        fx = fz;
        if rel < opts.tol && change < opts.step_tol {
            return Ok(x);
        }
    }
    Err(TorusError::NoConvergence {
        iterations: opts.max_iter,
        residual: last_change,
    })
}

/// Minimizes `½ φᵀΓ̂φ - φᵀĤ + λ Σ_{j<k} ‖φ_jk‖₂` over the family's free
/// parameters. Marginal blocks are not penalized.
pub fn fit_group_lasso(data: &AngleMatrix, family: &FamilyMask, lambda: f64, opts: &LassoOptions) -> Result<FitResult> {
    check_family(data, family)?;
    let moments = super::accumulate_moments(data)?;
    fit_group_lasso_from_moments(moments, family, lambda, opts)
}

pub fn fit_group_lasso_from_moments(
    moments: ScoreMatchingMoments,
    family: &FamilyMask,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<FitResult> {
    fit_lasso_warm(moments, family, lambda, opts, None)
}

fn fit_lasso_warm(
    moments: ScoreMatchingMoments,
    family: &FamilyMask,
    lambda: f64,
    opts: &LassoOptions,
    start: Option<&[f64]>,
) -> Result<FitResult> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(TorusError::domain(format!("penalty must be finite and >= 0, got {lambda}")));
    }
    let p = moments.n_params();
    if family.active().len() != p {
        return Err(TorusError::Dimension {
            expected: p,
            got: family.active().len(),
        });
    }
    let problem = Problem::new(&moments, family);
    let start = start.map(|s| DVector::from_iterator(problem.active.len(), problem.active.iter().map(|&a| s[a])));
    let x = solve(&problem, lambda, opts, start)?;
    let phi = problem.expand(&x, p);
    let residual_norm = active_residual(&moments, &phi, &problem.active);
    let params = TorusGraphParams::new(family.d(), phi, family.clone())?;
    Ok(FitResult {
        params,
        moments,
        method: Method::GroupLasso { lambda },
        residual_norm,
    })
}

/// Smallest penalty at which every coupling block is zero: the largest
/// gradient block norm at the marginal-only solution.
pub fn lambda_max(moments: &ScoreMatchingMoments, family: &FamilyMask) -> Result<f64> {
    let p = moments.n_params();
    let d = family.d();
    let marginal: Vec<usize> = family.active_indices().into_iter().filter(|&a| a < 2 * d).collect();
    let mut phi = vec![0.0; p];
    if !marginal.is_empty() {
        let solver = SpdSolver::for_active(moments, &marginal)?;
        let rhs: Vec<f64> = marginal.iter().map(|&a| moments.h_hat[a]).collect();
        for (&a, v) in marginal.iter().zip(solver.solve(&rhs)) {
            phi[a] = v;
        }
    }
    let grad = moments.gradient(&phi)?;
    let layout = Layout::new(d);
    Ok(layout
        .edges()
        .map(|(j, k)| {
            let o = layout.coupling(j, k);
            (o..o + 4)
                .filter(|&i| family.is_active(i))
                .map(|i| grad[i] * grad[i])
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

/// `count` log-spaced penalties from `lambda_max` down to
/// `lambda_max · min_ratio`, in decreasing order.
pub fn default_lambda_grid(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count <= 1 {
        return vec![lambda_max];
    }
    let top = lambda_max.max(f64::MIN_POSITIVE).ln();
    let bottom = (lambda_max * min_ratio).max(f64::MIN_POSITIVE).ln();
    (0..count)
        .map(|i| (top + (bottom - top) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_loss: f64,
    pub fold_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda_star: f64,
    /// One row per grid value, in grid order.
    pub table: Vec<CvRow>,
}

/// K-fold cross-validation of the penalty using the held-out score-matching
/// objective as loss. Ties go to the larger penalty.
pub fn select_lambda_cv(
    data: &AngleMatrix,
    family: &FamilyMask,
    folds: usize,
    grid: &[f64],
    seed: u64,
    opts: &LassoOptions,
) -> Result<CvResult> {
    check_family(data, family)?;
    if folds < 2 {
        return Err(TorusError::domain("cross-validation needs at least 2 folds"));
    }
    if grid.is_empty() {
        return Err(TorusError::domain("penalty grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(TorusError::domain(format!("invalid penalty {bad}")));
    }
    if data.n() < folds {
        return Err(TorusError::domain(format!(
            "{} samples cannot fill {folds} folds",
            data.n()
        )));
    }
    if grid.len() == 1 {
        return Ok(CvResult {
            lambda_star: grid[0],
            table: vec![CvRow {
                lambda: grid[0],
                mean_loss: f64::NAN,
                fold_losses: Vec::new(),
            }],
        });
    }
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let fold_rows: Vec<Vec<usize>> = (0..folds)
        .map(|f| {
            let mut r: Vec<usize> = order.iter().skip(f).step_by(folds).copied().collect();
            r.sort_unstable();
            r
        })
        .collect();
    let sums: Vec<MomentSums> = fold_rows.iter().map(|r| MomentSums::over_rows(data, r)).collect();

    // decreasing penalties so each fit warm-starts from a sparser one
    let mut by_lambda: Vec<usize> = (0..grid.len()).collect();
    by_lambda.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut losses = vec![vec![0.0; folds]; grid.len()];
    for f in 0..folds {
        let others: Vec<&MomentSums> = (0..folds).filter(|&g| g != f).map(|g| &sums[g]).collect();
        let train = MomentSums::sum(&others).to_moments();
        let held = sums[f].to_moments();
        let mut warm: Option<Vec<f64>> = None;
        for &li in &by_lambda {
            let fit = fit_lasso_warm(train.clone(), family, grid[li], opts, warm.as_deref())?;
            losses[li][f] = super::sm_objective(fit.params.phi(), &held)?;
            warm = Some(fit.params.phi().to_vec());
        }
    }
    let table: Vec<CvRow> = grid
        .iter()
        .zip(losses)
        .map(|(&lambda, fold_losses)| CvRow {
            lambda,
            mean_loss: fold_losses.iter().sum::<f64>() / folds as f64,
            fold_losses,
        })
        .collect();
    let mut best = by_lambda[0];
    for &li in &by_lambda[1..] {
        if table[li].mean_loss < table[best].mean_loss {
            best = li;
        }
    }
    Ok(CvResult {
        lambda_star: grid[best],
        table,
    })
}
