//! Asymptotic covariance, χ² edge tests, graph construction, the partial
//! phase locking transform, goodness of fit and the parametric bootstrap.

mod bootstrap;
mod gof;

pub use bootstrap::{bootstrap_null_test, bootstrap_p_value, BootstrapOptions, BootstrapResult, BootstrapStatistic};
pub use gof::{goodness_of_fit, GofResult, MIN_SYNTHETIC};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::circular::{bessel_ratio, chi2_sf};
use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::estimation::{accumulate_moments, residual_columns, FitResult, ScoreMatchingMoments, SpdSolver};
use crate::model::{FamilyKind, Layout, TorusGraphParams};

/// Sandwich covariance `Γ̂⁻¹ V̂ Γ̂⁻¹` of `√N (φ̂ - φ)` on the active set.
///
/// Stored as `W = Γ̂⁻¹ R / √N` where `R` holds the per-sample residuals, so
/// that any block is `W_E W_Eᵀ`.
#[derive(Debug, Clone)]
pub struct AsymptoticCov {
    d: usize,
    active: Vec<usize>,
    position: Vec<Option<usize>>,
    w: DMatrix<f64>,
    n: usize,
}

impl AsymptoticCov {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Sub-block of the asymptotic covariance for full-vector indices.
    pub fn block(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        let rows: Vec<usize> = indices
            .iter()
            .map(|&i| {
                self.position
                    .get(i)
                    .copied()
                    .flatten()
                    .ok_or_else(|| TorusError::domain(format!("parameter {i} is not free in this fit")))
            })
            .collect::<Result<_>>()?;
        let sub = self.w.select_rows(&rows);
        Ok(&sub * sub.transpose())
    }

    /// Asymptotic covariance over the active set.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.w * self.w.transpose()
    }

    /// Covariance of the estimator itself, `Σ̂ / N`, over the active set.
    pub fn estimator_cov(&self) -> DMatrix<f64> {
        self.matrix() / self.n as f64
    }

    /// Asymptotic covariance embedded in the full `2d² × 2d²` layout, zero on
    /// fixed parameters.
    pub fn full(&self) -> DMatrix<f64> {
        let p = self.position.len();
        let m = self.matrix();
        let mut out = DMatrix::zeros(p, p);
        for (r, &a) in self.active.iter().enumerate() {
            for (c, &b) in self.active.iter().enumerate() {
                out[(a, b)] = m[(r, c)];
            }
        }
        out
    }
}

/// Sandwich covariance at `params` over the free parameters of its family.
pub fn asymptotic_cov(data: &AngleMatrix, params: &TorusGraphParams) -> Result<AsymptoticCov> {
    if data.d() != params.d() {
        return Err(TorusError::Dimension {
            expected: params.d(),
            got: data.d(),
        });
    }
    let moments = accumulate_moments(data)?;
    asymptotic_cov_with_moments(data, &moments, params)
}

/// As [`asymptotic_cov`] at the fitted parameters, reusing the fit's moments.
pub fn asymptotic_cov_for_fit(data: &AngleMatrix, fit: &FitResult) -> Result<AsymptoticCov> {
    if data.d() != fit.params.d() || data.n() != fit.n() {
        return Err(TorusError::domain("data do not match the fit"));
    }
    asymptotic_cov_with_moments(data, &fit.moments, &fit.params)
}

fn asymptotic_cov_with_moments(
    data: &AngleMatrix,
    moments: &ScoreMatchingMoments,
    params: &TorusGraphParams,
) -> Result<AsymptoticCov> {
    let active = params.family().active_indices();
    let solver = SpdSolver::for_active(moments, &active)?;
    let r = residual_columns(data, params.phi(), &active);
    let mut w = solver.solve_matrix(&r);
    w /= (data.n() as f64).sqrt();
    let mut position = vec![None; params.phi().len()];
    for (r, &a) in active.iter().enumerate() {
        position[a] = Some(r);
    }
    Ok(AsymptoticCov {
        d: params.d(),
        active,
        position,
        w,
        n: data.n(),
    })
}

/// Which coordinates of a coupling block are tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeMode {
    #[serde(rename = "full")]
    Full4,
    #[serde(rename = "rot")]
    Rotational2,
    #[serde(rename = "refl")]
    Reflectional2,
}

impl EdgeMode {
    fn offsets(self) -> std::ops::Range<usize> {
        match self {
            EdgeMode::Full4 => 0..4,
            EdgeMode::Rotational2 => 0..2,
            EdgeMode::Reflectional2 => 2..4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeMode::Full4 => "full",
            EdgeMode::Rotational2 => "rot",
            EdgeMode::Reflectional2 => "refl",
        }
    }
}

impl std::str::FromStr for EdgeMode {
    type Err = TorusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EdgeMode::Full4),
            "rot" => Ok(EdgeMode::Rotational2),
            "refl" => Ok(EdgeMode::Reflectional2),
            other => Err(TorusError::domain(format!("unknown edge test mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeTest {
    pub j: usize,
    pub k: usize,
    pub x2: f64,
    pub df: usize,
    pub p: f64,
}

impl EdgeTest {
    pub fn edge(&self) -> (usize, usize) {
        (self.j, self.k)
    }
}

/// Free coordinates of edge blocks under `mode`.
fn tested_indices(fit: &FitResult, edges: &[(usize, usize)], mode: EdgeMode) -> Result<Vec<usize>> {
    let layout = fit.params.layout();
    let mut idx = Vec::new();
    for &(j, k) in edges {
        let (j, k) = layout.normalize_edge(j, k)?;
        let o = layout.coupling(j, k);
        let free: Vec<usize> = mode
            .offsets()
            .map(|i| o + i)
            .filter(|&i| fit.family().is_active(i))
            .collect();
        if free.is_empty() {
            return Err(TorusError::domain(format!(
                "edge ({j}, {k}) has no free '{}' parameters under family '{}'",
                mode.name(),
                fit.family().kind().name()
            )));
        }
        idx.extend(free);
    }
    Ok(idx)
}

fn wald(fit: &FitResult, cov: &AsymptoticCov, idx: &[usize]) -> Result<(f64, f64)> {
    let phi = DVector::from_iterator(idx.len(), idx.iter().map(|&i| fit.params.phi()[i]));
    if phi.iter().all(|&v| v == 0.0) {
        return Ok((0.0, 1.0));
    }
    let block = cov.block(idx)?;
    let chol = block.cholesky().ok_or(TorusError::DegenerateTest)?;
    let x2 = cov.n() as f64 * phi.dot(&chol.solve(&phi));
    if !x2.is_finite() {
        return Err(TorusError::DegenerateTest);
    }
    let x2 = x2.max(0.0);
    Ok((x2, chi2_sf(x2, idx.len())?))
}

/// Wald test `X² = N φ̂_Eᵀ Σ̂_E⁻¹ φ̂_E ~ χ²(|E|)` for one edge.
pub fn edge_test(fit: &FitResult, cov: &AsymptoticCov, j: usize, k: usize, mode: EdgeMode) -> Result<EdgeTest> {
    let (j, k) = fit.params.layout().normalize_edge(j, k)?;
    let idx = tested_indices(fit, &[(j, k)], mode)?;
    let (x2, p) = wald(fit, cov, &idx)?;
    Ok(EdgeTest {
        j,
        k,
        x2,
        df: idx.len(),
        p,
    })
}

/// Edge tests for every pair in canonical order.
pub fn all_edge_tests(fit: &FitResult, cov: &AsymptoticCov, mode: EdgeMode) -> Result<Vec<EdgeTest>> {
    fit.params
        .layout()
        .edges()
        .map(|(j, k)| edge_test(fit, cov, j, k, mode))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTest {
    pub edges: Vec<(usize, usize)>,
    pub x2: f64,
    pub df: usize,
    pub p: f64,
}

/// Joint Wald test over the concatenated blocks of several edges.
pub fn group_edge_test(
    fit: &FitResult,
    cov: &AsymptoticCov,
    edges: &[(usize, usize)],
    mode: EdgeMode,
) -> Result<GroupTest> {
    if edges.is_empty() {
        return Err(TorusError::domain("group test needs at least one edge"));
    }
    let layout = fit.params.layout();
    let mut norm: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(j, k)| layout.normalize_edge(j, k))
        .collect::<Result<_>>()?;
    let mut sorted = norm.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(TorusError::domain("group test edges must be distinct"));
    }
    let idx = tested_indices(fit, &norm, mode)?;
    let (x2, p) = wald(fit, cov, &idx)?;
    norm.shrink_to_fit();
    Ok(GroupTest {
        edges: norm,
        x2,
        df: idx.len(),
        p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    None,
    Bonferroni,
}

impl std::str::FromStr for Correction {
    type Err = TorusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "bonferroni" => Ok(Correction::Bonferroni),
            other => Err(TorusError::domain(format!("unknown correction '{other}'"))),
        }
    }
}

impl Correction {
    /// Corrected p-value for one of `m` tests.
    pub fn adjust(self, p: f64, m: usize) -> f64 {
        match self {
            Correction::None => p,
            Correction::Bonferroni => (p * m as f64).min(1.0),
        }
    }
}

/// Thresholded edge tests. An edge is present when its corrected p-value is
/// at most `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStructure {
    pub d: usize,
    pub alpha: f64,
    pub correction: Correction,
    pub tests: Vec<EdgeTest>,
    adjacency: Vec<bool>,
}

impl GraphStructure {
    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        self.adjacency[j * self.d + k]
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        self.adjacency.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    /// Present edges with `j < k`, in canonical order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        Layout::new(self.d).edges().filter(|&(j, k)| self.has_edge(j, k)).collect()
    }

    /// Raw p-values as a symmetric matrix; untested pairs and the diagonal
    /// hold 1.
    pub fn pvals(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![1.0; self.d]; self.d];
        for t in &self.tests {
            m[t.j][t.k] = t.p;
            m[t.k][t.j] = t.p;
        }
        m
    }

    pub fn corrected_p(&self, t: &EdgeTest) -> f64 {
        self.correction.adjust(t.p, self.tests.len())
    }
}

pub fn build_graph(d: usize, tests: &[EdgeTest], alpha: f64, correction: Correction) -> Result<GraphStructure> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TorusError::domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let layout = Layout::new(d);
    let mut seen = std::collections::HashSet::new();
    let mut adjacency = vec![false; d * d];
    let m = tests.len();
    for t in tests {
        let (j, k) = layout.normalize_edge(t.j, t.k)?;
        if !seen.insert((j, k)) {
            return Err(TorusError::domain(format!("duplicate test for edge ({j}, {k})")));
        }
        if !(0.0..=1.0).contains(&t.p) {
            return Err(TorusError::domain(format!("p-value {} outside [0, 1]", t.p)));
        }
        if correction.adjust(t.p, m) <= alpha {
            adjacency[j * d + k] = true;
            adjacency[k * d + j] = true;
        }
    }
    Ok(GraphStructure {
        d,
        alpha,
        correction,
        tests: tests.to_vec(),
        adjacency,
    })
}

/// Conditional coupling strength `A(√(α̂² + β̂²))` of a phase-difference fit,
/// where `A = I₁/I₀`.
pub fn partial_plv(fit: &FitResult, j: usize, k: usize) -> Result<f64> {
    match fit.family().kind() {
        FamilyKind::PhaseDiff | FamilyKind::UniformPhaseDiff => {}
        other => return Err(TorusError::FamilyScope(other.name().to_string())),
    }
    let (j, k) = fit.params.layout().normalize_edge(j, k)?;
    let [a, b, _, _] = fit.params.coupling(j, k);
    bessel_ratio(a.hypot(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::fit_closed_form;
    use crate::model::FamilyMask;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use std::f64::consts::TAU;

    fn uniform_data(n: usize, d: usize, seed: u64) -> AngleMatrix {
        let mut rng = rng_from_seed(seed);
        let v = (0..n * d).map(|_| rng.random_range(0.0..TAU)).collect();
        AngleMatrix::from_row_major(n, d, v).unwrap()
    }

    fn test(j: usize, k: usize, p: f64) -> EdgeTest {
        EdgeTest { j, k, x2: 0.0, df: 4, p }
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let x = uniform_data(400, 3, 70);
        let fit = fit_closed_form(&x, &FamilyMask::full(3)).unwrap();
        let cov = asymptotic_cov_for_fit(&x, &fit).unwrap();
        let m = cov.matrix();
        assert!((m.clone() - m.transpose()).amax() < 1e-12);
        let eig = m.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e > -1e-10));
        let direct = asymptotic_cov(&x, &fit.params).unwrap();
        assert!((direct.matrix() - cov.matrix()).amax() < 1e-10);
        assert_eq!(cov.full().shape(), (18, 18));
    }

    #[test]
    fn zero_block_gives_unit_p() {
        let x = uniform_data(300, 3, 71);
        let fam = FamilyMask::full(3).with_zero_edges(&[(0, 2)]).unwrap();
        let fit = fit_closed_form(&x, &fam).unwrap();
        let cov = asymptotic_cov_for_fit(&x, &fit).unwrap();
        assert!(edge_test(&fit, &cov, 0, 2, EdgeMode::Full4).is_err());
        let fit = fit_closed_form(&x, &FamilyMask::full(3)).unwrap();
        let mut zeroed = fit.clone();
        let mut params = zeroed.params.clone();
        params.set_coupling(0, 2, [0.0; 4]);
        zeroed.params = params;
        let t = edge_test(&zeroed, &cov, 2, 0, EdgeMode::Full4).unwrap();
        assert_eq!((t.j, t.k, t.x2, t.p, t.df), (0, 2, 0.0, 1.0, 4));
        let g = group_edge_test(&zeroed, &cov, &[(0, 2)], EdgeMode::Rotational2).unwrap();
        assert_eq!((g.p, g.df), (1.0, 2));
    }

    #[test]
    fn test_modes_and_masked_families() {
        let x = uniform_data(500, 3, 72);
        let fit = fit_closed_form(&x, &FamilyMask::full(3)).unwrap();
        let cov = asymptotic_cov_for_fit(&x, &fit).unwrap();
        for (mode, df) in [(EdgeMode::Full4, 4), (EdgeMode::Rotational2, 2), (EdgeMode::Reflectional2, 2)] {
            let t = edge_test(&fit, &cov, 0, 1, mode).unwrap();
            assert_eq!(t.df, df);
            assert!(t.x2 >= 0.0 && (0.0..=1.0).contains(&t.p));
        }
        let g = group_edge_test(&fit, &cov, &[(0, 1), (1, 2), (0, 2)], EdgeMode::Full4).unwrap();
        assert_eq!(g.df, 12);
        assert!(group_edge_test(&fit, &cov, &[(0, 1), (1, 0)], EdgeMode::Full4).is_err());
        assert!(group_edge_test(&fit, &cov, &[], EdgeMode::Full4).is_err());

        let pd = fit_closed_form(&x, &FamilyMask::new(FamilyKind::PhaseDiff, 3)).unwrap();
        let cov = asymptotic_cov_for_fit(&x, &pd).unwrap();
        assert_eq!(edge_test(&pd, &cov, 0, 1, EdgeMode::Full4).unwrap().df, 2);
        assert!(edge_test(&pd, &cov, 0, 1, EdgeMode::Reflectional2).is_err());
    }

    #[test]
    fn graph_thresholding() {
        let tests = vec![test(0, 1, 1.0), test(0, 2, 1.0), test(1, 2, 1.0)];
        let g = build_graph(3, &tests, 0.05, Correction::None).unwrap();
        assert!(g.edges().is_empty());

        let g = build_graph(3, &[test(0, 1, 0.05), test(1, 2, 0.0500001)], 0.05, Correction::None).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert!(g.has_edge(1, 0));

        let tests: Vec<EdgeTest> = Layout::new(5).edges().map(|(j, k)| test(j, k, 0.004)).collect();
        assert_eq!(tests.len(), 10);
        let g = build_graph(5, &tests, 0.05, Correction::Bonferroni).unwrap();
        assert!((g.corrected_p(&tests[0]) - 0.04).abs() < 1e-15);
        assert_eq!(g.edges().len(), 10);
        let adj = g.adjacency();
        for (j, row) in adj.iter().enumerate() {
            assert!(!row[j]);
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(v, adj[k][j]);
            }
        }
        assert!(build_graph(3, &[test(0, 1, 0.1), test(1, 0, 0.2)], 0.05, Correction::None).is_err());
        assert_eq!(build_graph(5, &tests, 0.05, Correction::Bonferroni).unwrap(), g);
    }

    #[test]
    fn partial_plv_examples() {
        let x = uniform_data(300, 3, 73);
        let full = fit_closed_form(&x, &FamilyMask::full(3)).unwrap();
        assert!(matches!(partial_plv(&full, 0, 1), Err(TorusError::FamilyScope(_))));

        let mut fit = fit_closed_form(&x, &FamilyMask::new(FamilyKind::UniformPhaseDiff, 3)).unwrap();
        let mut params = fit.params.clone();
        params.set_coupling(0, 1, [0.0; 4]);
        params.set_coupling(0, 2, [2.0f64.sqrt(), 2.0f64.sqrt(), 0.0, 0.0]);
        fit.params = params.clone();
        assert_eq!(partial_plv(&fit, 0, 1).unwrap(), 0.0);
        assert!((partial_plv(&fit, 0, 2).unwrap() - 0.697_774_657_964_008).abs() < 1e-12);
        let mut last = -1.0;
        for i in 0..50 {
            params.set_coupling(1, 2, [0.1 * i as f64, 0.05 * i as f64, 0.0, 0.0]);
            fit.params = params.clone();
            let v = partial_plv(&fit, 1, 2).unwrap();
            assert!(v > last && v < 1.0);
            last = v;
        }
    }
}
