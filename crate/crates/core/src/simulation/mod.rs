//! Synthetic data with known coupling structure, and the structure-recovery
//! harness.

mod recovery;

pub use recovery::{
    plv_recovery_experiment, recovery_experiment, roc_curve, run_experiment, trapezoid_auc, ExperimentConfig,
    ExperimentResults, RecoverySummary, Scorer, ROC_GRID_POINTS,
};

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circular::von_mises_draw;
use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::model::{FamilyKind, FamilyMask, Layout, TorusGraphParams};
use crate::rng::rng_from_seed;
use crate::sampling::{gibbs_sample, GibbsConfig};

/// Ground-truth edge set with `j < k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthGraph {
    pub d: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl TruthGraph {
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let layout = Layout::new(d);
        let edges = edges
            .into_iter()
            .map(|(j, k)| layout.normalize_edge(j, k))
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(TruthGraph { d, edges })
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        self.edges.contains(&(j.min(k), j.max(k)))
    }

    pub fn n_pairs(&self) -> usize {
        Layout::new(self.d).n_edges()
    }
}

/// Trials per coupling link whose noise is drawn at a lower concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub count: usize,
    pub kappa: f64,
}

impl Contamination {
    pub const NONE: Contamination = Contamination { count: 0, kappa: 0.0 };
}

/// Parameters of the chain generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSpec {
    pub d: usize,
    /// Phase offset added at every link.
    pub xi: f64,
    /// Concentration of the first node.
    pub kappa1: f64,
    /// Concentration of the link noise.
    pub kappa_eps: f64,
    pub contam: Contamination,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            d: 5,
            xi: PI / 100.0,
            kappa1: 0.01,
            kappa_eps: 40.0,
            contam: Contamination { count: 15, kappa: 0.1 },
        }
    }
}

fn check_kappa(k: f64, what: &str) -> Result<()> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(TorusError::domain(format!("{what} must be finite and >= 0, got {k}")));
    }
    Ok(())
}

/// Link noise for `n` trials with `contam.count` of them, chosen without
/// replacement, drawn at the contamination concentration.
fn link_noise<R: Rng>(n: usize, kappa: f64, contam: Contamination, rng: &mut R) -> Vec<f64> {
    let mut noisy = vec![false; n];
    for i in sample(rng, n, contam.count) {
        noisy[i] = true;
    }
    noisy
        .iter()
        .map(|&c| von_mises_draw(0.0, if c { contam.kappa } else { kappa }, rng))
        .collect()
}

/// `x₁ ~ vM(0, κ₁)`, `x_{j+1} = x_j + ξ + ε_j`. Truth is the chain
/// `{(j, j+1)}`.
pub fn gen_chain(n: usize, spec: &ChainSpec, seed: u64) -> Result<(AngleMatrix, TruthGraph)> {
    let d = spec.d;
    if d < 2 {
        return Err(TorusError::domain("a chain needs at least 2 nodes"));
    }
    if spec.contam.count > n {
        return Err(TorusError::domain(format!(
            "cannot contaminate {} of {n} trials",
            spec.contam.count
        )));
    }
    check_kappa(spec.kappa1, "kappa1")?;
    check_kappa(spec.kappa_eps, "kappa_eps")?;
    check_kappa(spec.contam.kappa, "contamination kappa")?;
    if !spec.xi.is_finite() {
        return Err(TorusError::domain("xi must be finite"));
    }
    let mut rng = rng_from_seed(seed);
    let mut columns = vec![(0..n).map(|_| von_mises_draw(0.0, spec.kappa1, &mut rng)).collect::<Vec<f64>>()];
    for j in 1..d {
        let eps = link_noise(n, spec.kappa_eps, spec.contam, &mut rng);
        let next = columns[j - 1].iter().zip(&eps).map(|(x, e)| x + spec.xi + e).collect();
        columns.push(next);
    }
    let data = AngleMatrix::from_columns(&columns)?;
    Ok((data, TruthGraph::new(d, (0..d - 1).map(|j| (j, j + 1)))?))
}

pub const INDIRECT_MIN_N: usize = 100;
const INDIRECT_CONTAM: Contamination = Contamination { count: 75, kappa: 0.1 };

/// Three nodes coupled only through the hub node 1 (0-based):
/// `x₁ ~ vM(0, 0.01)`, `x₀ = x₁ + π/6 + ε`, `x₂ = x₁ + π/100 + ε'`,
/// `ε, ε' ~ vM(0, 2)` with 75 trials per link at concentration 0.1.
pub fn gen_indirect_triple(n: usize, seed: u64) -> Result<(AngleMatrix, TruthGraph)> {
    if n < INDIRECT_MIN_N {
        return Err(TorusError::domain(format!(
            "indirect triple needs at least {INDIRECT_MIN_N} trials, got {n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let hub: Vec<f64> = (0..n).map(|_| von_mises_draw(0.0, 0.01, &mut rng)).collect();
    let e0 = link_noise(n, 2.0, INDIRECT_CONTAM, &mut rng);
    let e2 = link_noise(n, 2.0, INDIRECT_CONTAM, &mut rng);
    let x0 = hub.iter().zip(&e0).map(|(h, e)| h + PI / 6.0 + e).collect();
    let x2 = hub.iter().zip(&e2).map(|(h, e)| h + PI / 100.0 + e).collect();
    let data = AngleMatrix::from_columns(&[x0, hub, x2])?;
    Ok((data, TruthGraph::new(3, [(0, 1), (1, 2)])?))
}

/// Random uniform-marginal phase-difference model: `⌈density · d(d-1)/2⌉`
/// edges chosen uniformly, each with `(α, β)` of norm `coupling_scale` in a
/// uniformly random direction.
pub fn gen_random_torus_graph(
    d: usize,
    edge_density: f64,
    coupling_scale: f64,
    seed: u64,
) -> Result<(TorusGraphParams, TruthGraph)> {
    if !(edge_density > 0.0 && edge_density <= 1.0) {
        return Err(TorusError::domain(format!("edge density must lie in (0, 1], got {edge_density}")));
    }
    if !coupling_scale.is_finite() {
        return Err(TorusError::domain("coupling scale must be finite"));
    }
    let layout = Layout::new(d);
    let m = layout.n_edges();
    let count = ((edge_density * m as f64) - 1e-9).ceil().max(0.0) as usize;
    let all: Vec<(usize, usize)> = layout.edges().collect();
    let mut rng = rng_from_seed(seed);
    let mut chosen: Vec<(usize, usize)> = sample(&mut rng, m, count.min(m)).into_iter().map(|i| all[i]).collect();
    chosen.sort_unstable();
    let mut params = TorusGraphParams::new(
        d,
        vec![0.0; layout.n_params()],
        FamilyMask::new(FamilyKind::UniformPhaseDiff, d),
    )?;
    for &(j, k) in &chosen {
        let angle = rng.random::<f64>() * TAU;
        params.set_coupling(j, k, [coupling_scale * angle.cos(), coupling_scale * angle.sin(), 0.0, 0.0]);
    }
    Ok((params, TruthGraph::new(d, chosen)?))
}

/// Declarative description of a data generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Chain(ChainSpec),
    IndirectTriple,
    RandomTorusGraph {
        d: usize,
        edge_density: f64,
        #[serde(default = "default_coupling_scale")]
        coupling_scale: f64,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default = "default_thin")]
        thin: usize,
    },
    /// Independent von Mises channels with random means; no edges.
    Independent {
        d: usize,
        #[serde(default)]
        kappa: f64,
    },
}

fn default_coupling_scale() -> f64 {
    1.0
}

fn default_burn_in() -> usize {
    GibbsConfig::DEFAULT_BURN_IN
}

fn default_thin() -> usize {
    2
}

impl GeneratorSpec {
    pub fn random_torus_graph(d: usize, edge_density: f64) -> Self {
        GeneratorSpec::RandomTorusGraph {
            d,
            edge_density,
            coupling_scale: default_coupling_scale(),
            burn_in: default_burn_in(),
            thin: default_thin(),
        }
    }

    /// One dataset of `n` trials and its truth.
    pub fn generate(&self, n: usize, seed: u64) -> Result<(AngleMatrix, TruthGraph)> {
        match *self {
            GeneratorSpec::Chain(ref spec) => gen_chain(n, spec, seed),
            GeneratorSpec::IndirectTriple => gen_indirect_triple(n, seed),
            GeneratorSpec::RandomTorusGraph {
                d,
                edge_density,
                coupling_scale,
                burn_in,
                thin,
            } => {
                let (params, truth) = gen_random_torus_graph(d, edge_density, coupling_scale, seed)?;
                let cfg = GibbsConfig::new(n, crate::rng::derive_seed(seed, 1)).burn_in(burn_in).thin(thin);
                Ok((gibbs_sample(&params, &cfg)?, truth))
            }
            GeneratorSpec::Independent { d, kappa } => {
                check_kappa(kappa, "kappa")?;
                let mut rng = rng_from_seed(seed);
                let columns: Vec<Vec<f64>> = (0..d)
                    .map(|_| {
                        let mu = rng.random::<f64>() * TAU;
                        (0..n).map(|_| von_mises_draw(mu, kappa, &mut rng)).collect()
                    })
                    .collect();
                Ok((AngleMatrix::from_columns(&columns)?, TruthGraph::new(d, [])?))
            }
        }
    }
}
