//! ROC/AUC and error-rate evaluation of edge detection against known truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GeneratorSpec, TruthGraph};
use crate::circular::{rayleigh_statistic, rayleigh_test};
use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::estimation::fit_closed_form;
use crate::inference::{all_edge_tests, asymptotic_cov_for_fit, build_graph, Correction, EdgeMode, EdgeTest};
use crate::model::{FamilyKind, FamilyMask, Layout};
use crate::rng::derive_seed;

/// Number of false-positive-rate grid points used to average ROC curves.
pub const ROC_GRID_POINTS: usize = 512;

/// How pairs are scored and thresholded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scorer {
    /// Closed-form torus graph fit and Wald edge tests; pairs ranked by X².
    TorusGraph { family: FamilyKind, mode: EdgeMode },
    /// Rayleigh test on wrapped phase differences; pairs ranked by the
    /// Rayleigh statistic.
    Plv,
}

impl Scorer {
    pub const TORUS_FULL: Scorer = Scorer::TorusGraph {
        family: FamilyKind::Full,
        mode: EdgeMode::Full4,
    };

    pub fn label(&self) -> String {
        match self {
            Scorer::TorusGraph { family, mode } => format!("torus-{}-{}", family.name(), mode.name()),
            Scorer::Plv => "plv".to_string(),
        }
    }

    /// Per-pair tests in canonical edge order.
    pub fn edge_tests(&self, data: &AngleMatrix) -> Result<Vec<EdgeTest>> {
        match *self {
            Scorer::TorusGraph { family, mode } => {
                let fit = fit_closed_form(data, &FamilyMask::new(family, data.d()))?;
                let cov = asymptotic_cov_for_fit(data, &fit)?;
                all_edge_tests(&fit, &cov, mode)
            }
            Scorer::Plv => Layout::new(data.d())
                .edges()
                .map(|(j, k)| {
                    let w = data.differences(j, k);
                    Ok(EdgeTest {
                        j,
                        k,
                        x2: 2.0 * rayleigh_statistic(&w)?,
                        df: 2,
                        p: rayleigh_test(&w)?,
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    /// Trapezoid area under the averaged ROC curve.
    pub auc: f64,
    /// Averaged ROC, from (0, 0) to (1, 1).
    pub roc: Vec<(f64, f64)>,
    /// Pooled false-positive rate of the thresholded graphs.
    pub fpr_at_alpha: f64,
    pub fnr_at_alpha: f64,
    /// Binomial Monte-Carlo standard errors of the pooled rates.
    pub fpr_se: f64,
    pub fnr_se: f64,
    /// Fraction of replicates whose thresholded graph equals the truth.
    pub exact_recovery_rate: f64,
    /// Fraction of replicates whose thresholded graph has every edge.
    pub complete_graph_rate: f64,
    /// Per-replicate AUC; `None` when a replicate lacks positives or negatives.
    pub replicate_aucs: Vec<Option<f64>>,
    pub replicate_seeds: Vec<u64>,
}

/// ROC points of a scored set of pairs, highest scores first, tied scores
/// entering together. `None` without both positives and negatives.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Option<Vec<(f64, f64)>> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Some(points)
}

/// Area under a piecewise-linear curve.
pub fn trapezoid_auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// True-positive rate of a ROC polyline at `f`, taking the upper end of
/// vertical segments.
fn tpr_at(points: &[(f64, f64)], f: f64) -> f64 {
    let i = points.partition_point(|p| p.0 < f);
    if i == points.len() {
        return 1.0;
    }
    if points[i].0 == f {
        let last = points[i..].partition_point(|p| p.0 == f) + i - 1;
        return points[last].1;
    }
    let (a, b) = (points[i - 1], points[i]);
    a.1 + (b.1 - a.1) * (f - a.0) / (b.0 - a.0)
}

struct Replicate {
    scores: Vec<f64>,
    labels: Vec<bool>,
    detected: Vec<bool>,
}

fn run_replicate(
    gen: &GeneratorSpec,
    scorer: &Scorer,
    n: usize,
    alpha: f64,
    correction: Correction,
    seed: u64,
) -> Result<Replicate> {
    let (data, truth): (AngleMatrix, TruthGraph) = gen.generate(n, seed)?;
    let tests = scorer.edge_tests(&data)?;
    let graph = build_graph(data.d(), &tests, alpha, correction)?;
    Ok(Replicate {
        scores: tests.iter().map(|t| t.x2).collect(),
        labels: tests.iter().map(|t| truth.contains(t.j, t.k)).collect(),
        detected: tests.iter().map(|t| graph.has_edge(t.j, t.k)).collect(),
    })
}

fn summarize(reps: &[Replicate], seeds: Vec<u64>) -> RecoverySummary {
    let grid: Vec<f64> = (0..ROC_GRID_POINTS)
        .map(|i| i as f64 / (ROC_GRID_POINTS - 1) as f64)
        .collect();
    let mut mean_tpr = vec![0.0; grid.len()];
    let mut used = 0usize;
    let mut replicate_aucs = Vec::with_capacity(reps.len());
    let (mut fp, mut neg, mut fneg, mut pos) = (0usize, 0usize, 0usize, 0usize);
    let (mut exact, mut complete) = (0usize, 0usize);
    for r in reps {
        match roc_curve(&r.scores, &r.labels) {
            Some(points) => {
                used += 1;
                for (m, &f) in mean_tpr.iter_mut().zip(&grid) {
                    *m += tpr_at(&points, f);
                }
                replicate_aucs.push(Some(trapezoid_auc(&points)));
            }
            None => replicate_aucs.push(None),
        }
        for (&l, &det) in r.labels.iter().zip(&r.detected) {
            if l {
                pos += 1;
                fneg += usize::from(!det);
            } else {
                neg += 1;
                fp += usize::from(det);
            }
        }
        exact += usize::from(r.labels == r.detected);
        complete += usize::from(r.detected.iter().all(|&d| d));
    }
    let roc = if used == 0 {
        vec![(0.0, 0.0), (1.0, 1.0)]
    } else {
        let mut roc = vec![(0.0, 0.0)];
        roc.extend(grid.iter().zip(&mean_tpr).map(|(&f, &t)| (f, t / used as f64)));
        let last = roc.len() - 1;
        roc[last] = (1.0, 1.0);
        roc
    };
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let se = |p: f64, b: usize| if b == 0 { 0.0 } else { (p * (1.0 - p) / b as f64).sqrt() };
    let fpr = rate(fp, neg);
    let fnr = rate(fneg, pos);
    RecoverySummary {
        auc: trapezoid_auc(&roc),
        roc,
        fpr_at_alpha: fpr,
        fnr_at_alpha: fnr,
        fpr_se: se(fpr, neg),
        fnr_se: se(fnr, pos),
        exact_recovery_rate: rate(exact, reps.len()),
        complete_graph_rate: rate(complete, reps.len()),
        replicate_aucs,
        replicate_seeds: seeds,
    }
}

/// Runs `n_reps` independent replicates in parallel. Replicate `r` uses seed
/// `derive_seed(seed, r)`, so results depend only on the master seed.
pub fn run_experiment(
    gen: &GeneratorSpec,
    scorer: &Scorer,
    n_reps: usize,
    n: usize,
    alpha: f64,
    correction: Correction,
    seed: u64,
) -> Result<RecoverySummary> {
    if n_reps == 0 {
        return Err(TorusError::domain("need at least one replicate"));
    }
    let seeds: Vec<u64> = (0..n_reps as u64).map(|r| derive_seed(seed, r)).collect();
    let reps: Vec<Result<Replicate>> = seeds
        .par_iter()
        .map(|&s| run_replicate(gen, scorer, n, alpha, correction, s))
        .collect();
    let reps = reps
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| TorusError::Replicate {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&reps, seeds))
}

/// Torus graph edge tests (full family, 4-parameter blocks).
pub fn recovery_experiment(
    gen: &GeneratorSpec,
    n_reps: usize,
    n: usize,
    alpha: f64,
    correction: Correction,
    seed: u64,
) -> Result<RecoverySummary> {
    run_experiment(gen, &Scorer::TORUS_FULL, n_reps, n, alpha, correction, seed)
}

/// Rayleigh tests on pairwise phase differences.
pub fn plv_recovery_experiment(
    gen: &GeneratorSpec,
    n_reps: usize,
    n: usize,
    alpha: f64,
    correction: Correction,
    seed: u64,
) -> Result<RecoverySummary> {
    run_experiment(gen, &Scorer::Plv, n_reps, n, alpha, correction, seed)
}

/// Declarative benchmark description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub generator: GeneratorSpec,
    /// Trials per dataset.
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub correction: Correction,
    pub seed: u64,
    #[serde(default = "default_scorers")]
    pub scorers: Vec<Scorer>,
}

fn default_scorers() -> Vec<Scorer> {
    vec![Scorer::TORUS_FULL, Scorer::Plv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub results: Vec<ScorerSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSummary {
    pub scorer: Scorer,
    pub label: String,
    pub summary: RecoverySummary,
}

impl ExperimentConfig {
    pub fn run(&self) -> Result<ExperimentResults> {
        let results = self
            .scorers
            .iter()
            .map(|s| {
                Ok(ScorerSummary {
                    scorer: *s,
                    label: s.label(),
                    summary: run_experiment(&self.generator, s, self.reps, self.n, self.alpha, self.correction, self.seed)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentResults {
            schema_version: 1,
            config: self.clone(),
            results,
        })
    }
}
