//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero when any criterion fails.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rand::Rng;
use torus_graph::circular::ks_two_sample;
use torus_graph::estimation::{fit_closed_form, gamma_h_of_sample, jacobian_d};
use torus_graph::inference::{all_edge_tests, asymptotic_cov_for_fit, goodness_of_fit, Correction, EdgeMode};
use torus_graph::margins::{bivar_phase_diff_density, trivar_phase_diff_density};
use torus_graph::model::{
    log_unnorm_density, sine_model_embed, suff_stats, to_mean_centered, to_natural, MeanCenteredParams,
};
use torus_graph::rng::{rng_from_seed, TorusRng};
use torus_graph::sampling::{conditional_von_mises, gibbs_sample, independent_chains, GibbsConfig};
use torus_graph::simulation::{run_experiment, ChainSpec, GeneratorSpec, Scorer};
use torus_graph::{FamilyMask, TorusGraphParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_full_params(d: usize, scale: f64, rng: &mut TorusRng) -> TorusGraphParams {
    let phi = (0..2 * d * d).map(|_| rng.random_range(-scale..scale)).collect();
    TorusGraphParams::full(d, phi).unwrap()
}

fn flat_stats(x: &[f64]) -> Vec<f64> {
    suff_stats(x).flat()
}

/// Jacobian against central differences of the sufficient statistics, and
/// `H` against the negated Laplacian of the statistics by second differences.
fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(101);
    let (mut jac_err, mut h_err) = (0.0f64, 0.0f64);
    for d in 1..=6 {
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
            let jac = jacobian_d(&x);
            let (_, h) = gamma_h_of_sample(&x);
            let s0 = flat_stats(&x);
            let mut lap = vec![0.0; s0.len()];
            for l in 0..d {
                let shifted = |t: f64| {
                    let mut y = x.clone();
                    y[l] += t;
                    flat_stats(&y)
                };
                let (e1, m1) = (shifted(1e-6), shifted(-1e-6));
                for i in 0..s0.len() {
                    jac_err = jac_err.max(((e1[i] - m1[i]) / 2e-6 - jac[(i, l)]).abs());
                }
                let (e2, m2) = (shifted(1e-4), shifted(-1e-4));
                for i in 0..s0.len() {
                    lap[i] += (e2[i] - 2.0 * s0[i] + m2[i]) / 1e-8;
                }
            }
            for i in 0..s0.len() {
                h_err = h_err.max((h[i] + lap[i]).abs());
            }
        }
    }
    outcome(
        jac_err < 1e-6 && h_err < 1e-6,
        format!("max |D - fd| = {jac_err:.2e}, max |H + lap S| = {h_err:.2e}"),
    )
}

/// Power series for I₀, independent of the library's Bessel routines.
fn bessel_i0_series(z: f64) -> f64 {
    let q = z * z / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for m in 1..500 {
        term *= q / (m as f64 * m as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn criterion_2() -> Outcome {
    const G: usize = 1024;
    let mut rng = rng_from_seed(102);
    let grid: Vec<f64> = (0..G).map(|g| TAU * g as f64 / G as f64).collect();
    let mut worst = 0.0f64;
    for model in 0..20 {
        let d = 2 + model % 3;
        let p = random_full_params(d, 1.0, &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
        for k in 0..d {
            let rest: Vec<f64> = x.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| *v).collect();
            let (a, delta) = conditional_von_mises(&p, k, &rest).unwrap();
            let logs: Vec<f64> = grid
                .iter()
                .map(|&t| {
                    let mut y = x.clone();
                    y[k] = t;
                    log_unnorm_density(&p, &y).unwrap()
                })
                .collect();
            let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logs.iter().map(|l| (l - top).exp()).sum::<f64>() * TAU / G as f64;
            let norm = TAU * bessel_i0_series(a);
            for (&t, &l) in grid.iter().zip(&logs) {
                worst = worst.max(((l - top).exp() / z - (a * (t - delta).cos()).exp() / norm).abs());
            }
        }
    }
    outcome(worst < 1e-8, format!("sup error {worst:.2e} over 20 models"))
}

/// Sums a joint density grid along `x₁ - x₂ ≡ m` and normalizes.
fn diff_marginal(g: usize, joint: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; g];
    for i in 0..g {
        for j in 0..g {
            out[(i + g - j) % g] += joint(i, j);
        }
    }
    let z: f64 = out.iter().sum::<f64>() * TAU / g as f64;
    out.iter().map(|v| v / z).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from_seed(103);
    let mut bi = 0.0f64;
    const GB: usize = 512;
    let h = TAU / GB as f64;
    for _ in 0..5 {
        let (k1, k2) = (rng.random_range(0.0..2.5), rng.random_range(0.0..2.5));
        let (m1, m2) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
        let (a, b) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let oracle = diff_marginal(GB, |i, j| {
            let (x1, x2) = (i as f64 * h, j as f64 * h);
            (k1 * (x1 - m1).cos() + k2 * (x2 - m2).cos() + a * (x1 - x2).cos() + b * (x1 - x2).sin()).exp()
        });
        let got = bivar_phase_diff_density((k1, k2), (m1, m2), (a, b), GB).unwrap();
        bi = bi.max(sup_diff(&oracle, got.p.values()));
    }
    const GT: usize = 128;
    let h = TAU / GT as f64;
    let mut tri = 0.0f64;
    for _ in 0..2 {
        let c: Vec<(f64, f64)> = (0..3)
            .map(|_| (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
            .collect();
        let mut pair = vec![0.0; GT * GT];
        for i in 0..GT {
            for j in 0..GT {
                let (x1, x2) = (i as f64 * h, j as f64 * h);
                pair[i * GT + j] = (0..GT)
                    .map(|l| {
                        let x3 = l as f64 * h;
                        (c[0].0 * (x1 - x2).cos()
                            + c[0].1 * (x1 - x2).sin()
                            + c[1].0 * (x1 - x3).cos()
                            + c[1].1 * (x1 - x3).sin()
                            + c[2].0 * (x2 - x3).cos()
                            + c[2].1 * (x2 - x3).sin())
                        .exp()
                    })
                    .sum();
            }
        }
        let oracle = diff_marginal(GT, |i, j| pair[i * GT + j]);
        let got = trivar_phase_diff_density(c[0], c[1], c[2], GT).unwrap();
        tri = tri.max(sup_diff(&oracle, got.p.values()));
    }
    outcome(
        bi < 1e-6 && tri < 1e-5,
        format!("bivariate sup {bi:.2e} (512^2), trivariate sup {tri:.2e} (128^3)"),
    )
}

fn criterion_4() -> Outcome {
    let d = 3;
    let truth = random_full_params(d, 2.0, &mut rng_from_seed(104));
    let x = gibbs_sample(&truth, &GibbsConfig::new(100_000, 104).thin(5)).unwrap();
    let fit = fit_closed_form(&x, &FamilyMask::full(d)).unwrap();
    let residual = fit.moments.gradient(fit.params.phi()).unwrap().amax();
    let scale = fit.moments.h_hat.amax();
    let err = sup_diff(fit.params.phi(), truth.phi());
    outcome(
        residual <= 1e-8 * scale && err < 0.1,
        format!("residual {residual:.2e} (bound {:.2e}), max |phi_hat - phi| = {err:.4}", 1e-8 * scale),
    )
}

fn criterion_5() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let gens = [
        ("chain", GeneratorSpec::Chain(ChainSpec::default())),
        ("indirect triple", GeneratorSpec::IndirectTriple),
    ];
    for (i, (name, gen)) in gens.iter().enumerate() {
        let seed = 105 + i as u64;
        let torus = run_experiment(gen, &Scorer::TORUS_FULL, 50, 840, 0.001, Correction::Bonferroni, seed).unwrap();
        let plv = run_experiment(gen, &Scorer::Plv, 50, 840, 0.001, Correction::Bonferroni, seed).unwrap();
        pass &= torus.exact_recovery_rate >= 0.8 && plv.complete_graph_rate >= 0.8;
        lines.push(format!(
            "{name}: torus exact {:.2}, PLV complete {:.2}",
            torus.exact_recovery_rate, plv.complete_graph_rate
        ));
    }
    outcome(pass, lines.join("; "))
}

fn criterion_6() -> Outcome {
    let auc = |density: f64, seed: u64| {
        let gen = GeneratorSpec::RandomTorusGraph {
            d: 24,
            edge_density: density,
            coupling_scale: 1.0,
            burn_in: 500,
            thin: 2,
        };
        let s = run_experiment(&gen, &Scorer::TORUS_FULL, 30, 840, 0.05, Correction::None, seed).unwrap();
        let aucs: Vec<f64> = s.replicate_aucs.iter().flatten().copied().collect();
        aucs.iter().sum::<f64>() / aucs.len() as f64
    };
    let a25 = auc(0.25, 106);
    let a50 = auc(0.5, 107);
    outcome(
        a25 >= 0.9 && a50 < a25,
        format!("mean AUC {a25:.4} at 25% density, {a50:.4} at 50%"),
    )
}

fn criterion_7() -> Outcome {
    let alpha = 0.05;
    let mut pass = true;
    let mut lines = Vec::new();
    let gens = [
        ("null", GeneratorSpec::Independent { d: 5, kappa: 0.5 }),
        ("chain", GeneratorSpec::Chain(ChainSpec::default())),
    ];
    for (i, (name, gen)) in gens.iter().enumerate() {
        for correction in [Correction::None, Correction::Bonferroni] {
            let s = run_experiment(gen, &Scorer::TORUS_FULL, 100, 840, alpha, correction, 170 + i as u64).unwrap();
            pass &= s.fpr_at_alpha <= alpha + 2.0 * s.fpr_se;
            lines.push(format!(
                "{name}/{correction:?}: FPR {:.4} (se {:.4})",
                s.fpr_at_alpha,
                s.fpr_se
            ));
        }
    }
    let plv = run_experiment(
        &GeneratorSpec::Chain(ChainSpec::default()),
        &Scorer::Plv,
        100,
        840,
        alpha,
        Correction::Bonferroni,
        171,
    )
    .unwrap();
    pass &= plv.fpr_at_alpha > 0.5;
    lines.push(format!("chain PLV FPR {:.4}", plv.fpr_at_alpha));
    outcome(pass, lines.join("; "))
}

fn criterion_8() -> Outcome {
    let mut ps = Vec::new();
    for r in 0..2000u64 {
        let (x, _) = GeneratorSpec::Independent { d: 4, kappa: 0.5 }.generate(500, 108_000 + r).unwrap();
        let fit = fit_closed_form(&x, &FamilyMask::full(4)).unwrap();
        let cov = asymptotic_cov_for_fit(&x, &fit).unwrap();
        ps.extend(all_edge_tests(&fit, &cov, EdgeMode::Full4).unwrap().iter().map(|t| t.p));
    }
    // a fine deterministic grid stands in for the uniform distribution
    let m = 50_000;
    let grid: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let (stat, p) = ks_two_sample(&ps, &grid).unwrap();
    outcome(p > 0.001, format!("{} edge p-values, KS D {stat:.4}, p {p:.3}", ps.len()))
}

fn criterion_9() -> Outcome {
    let mut rng = rng_from_seed(109);
    let mut round = 0.0f64;
    let mut sine = 0.0f64;
    for draw in 0..100 {
        let d = 2 + draw % 4;
        let e = d * (d - 1) / 2;
        let mc = MeanCenteredParams {
            mu: (0..d).map(|_| rng.random_range(0.0..TAU)).collect(),
            kappa: (0..d).map(|_| rng.random_range(0.05..3.0)).collect(),
            lambdas: (0..e)
                .map(|_| [0; 4].map(|_| rng.random_range(-2.0..2.0)))
                .collect(),
        };
        let nat = to_natural(&mc).unwrap();
        let back = to_mean_centered(&nat).unwrap();
        let again = to_natural(&back).unwrap();
        round = round.max(sup_diff(nat.phi(), again.phi()));
        for (a, b) in back.lambdas.iter().zip(&mc.lambdas) {
            round = round.max(sup_diff(a, b));
        }
        for (a, b) in back.kappa.iter().zip(&mc.kappa) {
            round = round.max((a - b).abs());
        }
        for (a, b) in back.mu.iter().zip(&mc.mu) {
            let diff = (a - b).rem_euclid(TAU);
            round = round.max(diff.min(TAU - diff));
        }
        let lss: Vec<f64> = mc.lambdas.iter().map(|l| l[3]).collect();
        let s = sine_model_embed(&mc.mu, &mc.kappa, &lss).unwrap();
        for (j, k) in s.layout().edges() {
            let [p1, p2, p3, p4] = s.coupling(j, k);
            sine = sine.max((p1 * p1 + p2 * p2 - p3 * p3 - p4 * p4).abs());
        }
    }
    outcome(
        round < 1e-10 && sine < 1e-12,
        format!("roundtrip max error {round:.2e}, sine constraint max error {sine:.2e}"),
    )
}

fn criterion_10() -> Outcome {
    let gen = GeneratorSpec::RandomTorusGraph {
        d: 6,
        edge_density: 0.25,
        coupling_scale: 1.0,
        burn_in: 500,
        thin: 2,
    };
    let (base, _) = gen.generate(840, 110).unwrap();
    let model = fit_closed_form(&base, &FamilyMask::full(6)).unwrap().params;
    let runs = 100u64;
    let mut pass = 0;
    for r in 0..runs {
        let x = independent_chains(&model, 840, GibbsConfig::DEFAULT_BURN_IN, 110_000 + r).unwrap();
        let g = goodness_of_fit(&x, &model, 2000, 120_000 + r).unwrap();
        pass += (g.p_marginal > 0.01 && g.p_diff.unwrap() > 0.01 && g.p_sum.unwrap() > 0.01) as usize;
    }
    let rate = pass as f64 / runs as f64;
    outcome(rate >= 0.95, format!("all three combined p > 0.01 in {pass}/{runs} runs"))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("jacobian and divergence oracle", criterion_1, Duration::from_secs(5)),
        ("conditional von Mises oracle", criterion_2, Duration::from_secs(30)),
        ("analytic phase-difference margins", criterion_3, Duration::from_secs(120)),
        ("estimating equation and consistency", criterion_4, Duration::from_secs(120)),
        ("chain and indirect-triple recovery", criterion_5, Duration::from_secs(300)),
        ("d=24 AUC by edge density", criterion_6, Duration::from_secs(1800)),
        ("false-positive control", criterion_7, Duration::from_secs(600)),
        ("null edge p-value calibration", criterion_8, Duration::from_secs(600)),
        ("reparameterization and sine constraint", criterion_9, Duration::from_secs(60)),
        ("goodness-of-fit self-consistency", criterion_10, Duration::from_secs(900)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *limit;
        failed += (!pass) as usize;
        println!(
            "criterion {:>2} {}: {name}: {} [{:.1}s, limit {}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
