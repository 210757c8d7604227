use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use torus_graph::circular::mean_direction_interval;
use torus_graph::estimation::{
    accumulate_moments, default_lambda_grid, fit_closed_form_from_moments, fit_group_lasso_from_moments, lambda_max,
    select_lambda_cv, LassoOptions,
};
use torus_graph::inference::{all_edge_tests, asymptotic_cov, build_graph, goodness_of_fit, group_edge_test};
use torus_graph::io::{default_channel_names, load_csv, write_adjacency_csv, write_angles_csv, Dataset, GraphFile, ModelFile};
use torus_graph::margins::{bivar_phase_diff_density, population_plv_from_grid, trivar_phase_diff_density, write_grids_csv};
use torus_graph::model::project_to_sine_model;
use torus_graph::sampling::{gibbs_sample, GibbsConfig};
use torus_graph::simulation::{ExperimentConfig, Scorer};
use torus_graph::{FamilyMask, TorusError};

use crate::groups::Groups;
use crate::{
    BenchArgs, DataArgs, FitArgs, GofArgs, PhaseDensityArgs, PlvGraphArgs, RegionTestArgs, SampleArgs, SummarizeArgs,
    TestArgs,
};

fn load(data: &DataArgs) -> Result<Dataset> {
    load_csv(&data.data, &data.options()?).with_context(|| format!("reading {}", data.data.display()))
}

fn load_model(path: &Path, d: usize) -> Result<ModelFile> {
    let model = ModelFile::load(path).with_context(|| format!("reading {}", path.display()))?;
    if model.params.d() != d {
        return Err(TorusError::Dimension {
            expected: d,
            got: model.params.d(),
        })
        .context("model and data differ in dimension");
    }
    Ok(model)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(TorusError::from)?;
    }
    let f = File::create(path)
        .map_err(TorusError::from)
        .with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes pretty JSON to `out`, or to stdout when absent.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(TorusError::from)?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}").map_err(TorusError::from)?;
            w.flush().map_err(TorusError::from)?;
        }
        None => print_stdout(&text)?,
    }
    Ok(())
}

/// Prints a line to stdout; a closed pipe on the reader side is not an error.
fn print_stdout(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r.map_err(TorusError::from)?),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TorusError::Domain(format!("alpha must lie in [0, 1], got {alpha}")).into());
    }
    Ok(())
}

pub fn fit(args: FitArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let family = FamilyMask::new(args.family, ds.angles.d());
    let moments = accumulate_moments(&ds.angles)?;
    let opts = LassoOptions::default();
    let fit = if let Some(k) = args.cv {
        let grid = match args.grid {
            Some(g) => g,
            None => default_lambda_grid(lambda_max(&moments, &family)?, args.grid_size, 1e-3),
        };
        let cv = select_lambda_cv(&ds.angles, &family, k, &grid, args.seed, &opts)?;
        for row in &cv.table {
            eprintln!("lambda {:.6e}  held-out loss {:.6e}", row.lambda, row.mean_loss);
        }
        eprintln!("selected lambda {:.6e}", cv.lambda_star);
        fit_group_lasso_from_moments(moments, &family, cv.lambda_star, &opts)?
    } else if let Some(lambda) = args.lasso {
        fit_group_lasso_from_moments(moments, &family, lambda, &opts)?
    } else {
        fit_closed_form_from_moments(moments, &family)?
    };
    eprintln!(
        "fitted {} parameters on N = {} trials, residual {:.3e}",
        family.n_active(),
        fit.n(),
        fit.residual_norm
    );
    let model = ModelFile {
        params: fit.params,
        channel_names: Some(ds.channel_names),
        method: Some(fit.method),
        n: Some(fit.moments.n),
    };
    model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn write_graph(gf: &GraphFile, out: Option<&Path>, adjacency: Option<&Path>, names: &[String]) -> Result<()> {
    match out {
        Some(path) => gf.save(path).with_context(|| format!("writing {}", path.display()))?,
        None => print_stdout(&gf.to_json()?)?,
    }
    if let Some(path) = adjacency {
        let mut w = create(path)?;
        write_adjacency_csv(&mut w, &gf.graph, names)?;
    }
    let edges = gf.graph.edges();
    eprintln!("{} of {} edges present", edges.len(), gf.graph.tests.len());
    Ok(())
}

pub fn test(args: TestArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let ds = load(&args.data)?;
    let model = load_model(&args.model, ds.angles.d())?;
    let cov = asymptotic_cov(&ds.angles, &model.params)?;
    let fit = torus_graph::estimation::FitResult {
        params: model.params.clone(),
        moments: accumulate_moments(&ds.angles)?,
        method: model.method.unwrap_or(torus_graph::estimation::Method::ClosedForm),
        residual_norm: f64::NAN,
    };
    let tests = all_edge_tests(&fit, &cov, args.mode)?;
    let graph = build_graph(ds.angles.d(), &tests, args.alpha, args.correction)?;
    let gf = GraphFile {
        graph,
        channel_names: Some(ds.channel_names.clone()),
    };
    write_graph(&gf, args.out.as_deref(), args.adjacency.as_deref(), &ds.channel_names)
}

#[derive(Serialize)]
struct RegionResult {
    a: String,
    b: String,
    n_edges: usize,
    x2: f64,
    df: usize,
    p: f64,
    significant: bool,
}

pub fn region_test(args: RegionTestArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let ds = load(&args.data)?;
    let model = load_model(&args.model, ds.angles.d())?;
    let groups = Groups::load(&args.groups, &ds.channel_names).with_context(|| format!("reading {}", args.groups.display()))?;
    let pairs: Vec<(String, String)> = match &args.between {
        Some(v) => vec![(v[0].clone(), v[1].clone())],
        None => {
            let names: Vec<&String> = groups.0.iter().map(|(n, _)| n).collect();
            let mut out = Vec::new();
            for i in 0..names.len() {
                for j in i + 1..names.len() {
                    out.push((names[i].clone(), names[j].clone()));
                }
            }
            out
        }
    };
    let cov = asymptotic_cov(&ds.angles, &model.params)?;
    let fit = torus_graph::estimation::FitResult {
        params: model.params.clone(),
        moments: accumulate_moments(&ds.angles)?,
        method: model.method.unwrap_or(torus_graph::estimation::Method::ClosedForm),
        residual_norm: f64::NAN,
    };
    let mut results = Vec::new();
    for (a, b) in pairs {
        let edges = Groups::cross_pairs(groups.get(&a)?, groups.get(&b)?);
        let t = group_edge_test(&fit, &cov, &edges, args.mode)?;
        results.push(RegionResult {
            a,
            b,
            n_edges: edges.len(),
            x2: t.x2,
            df: t.df,
            p: t.p,
            significant: t.p <= args.alpha,
        });
    }
    emit_json(
        &json!({ "schema_version": 1, "alpha": args.alpha, "mode": args.mode, "tests": results }),
        args.out.as_deref(),
    )
}

pub fn sample(args: SampleArgs) -> Result<()> {
    let model = ModelFile::load(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let cfg = GibbsConfig::new(args.n, args.seed).burn_in(args.burn_in).thin(args.thin);
    let x = gibbs_sample(&model.params, &cfg)?;
    let names = model
        .channel_names
        .unwrap_or_else(|| default_channel_names(model.params.d()));
    let mut w = create(&args.out)?;
    write_angles_csv(&mut w, &x, &names)?;
    Ok(())
}

pub fn plv_graph(args: PlvGraphArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let ds = load(&args.data)?;
    let tests = Scorer::Plv.edge_tests(&ds.angles)?;
    let graph = build_graph(ds.angles.d(), &tests, args.alpha, args.correction)?;
    let gf = GraphFile {
        graph,
        channel_names: Some(ds.channel_names.clone()),
    };
    write_graph(&gf, args.out.as_deref(), args.adjacency.as_deref(), &ds.channel_names)
}

pub fn phase_density(args: PhaseDensityArgs) -> Result<()> {
    let mut w = create(&args.out)?;
    let (integral, plv) = if args.bivar {
        let m = bivar_phase_diff_density(args.kappa, args.mu, args.coupling, args.grid)?;
        write_grids_csv(&mut w, &[("p", &m.p), ("f", &m.f), ("g", &m.g)])?;
        (m.p.integral(), population_plv_from_grid(&m.p)?)
    } else {
        let m = trivar_phase_diff_density(args.c12, args.c13, args.c23, args.grid)?;
        write_grids_csv(&mut w, &[("p", &m.p), ("g", &m.g), ("h", &m.h)])?;
        (m.p.integral(), population_plv_from_grid(&m.p)?)
    };
    w.flush().map_err(TorusError::from)?;
    emit_json(&json!({ "grid": args.grid, "integral": integral, "plv": plv }), None)
}

pub fn gof(args: GofArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let model = load_model(&args.model, ds.angles.d())?;
    let params = if args.sine {
        project_to_sine_model(&model.params)?
    } else {
        model.params
    };
    let r = goodness_of_fit(&ds.angles, &params, args.n_synth, args.seed)?;
    emit_json(&r, args.out.as_deref())
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(TorusError::from)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(TorusError::from)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if config.schema_version != 1 {
        return Err(TorusError::Schema(format!("unsupported schema_version {}", config.schema_version)).into());
    }
    check_alpha(config.alpha)?;
    let results = config.run()?;
    std::fs::create_dir_all(&args.out).map_err(TorusError::from)?;
    emit_json(&results, Some(&args.out.join("results.json")))?;
    let mut summary = create(&args.out.join("summary.csv"))?;
    writeln!(
        summary,
        "scorer,auc,fpr_at_alpha,fpr_se,fnr_at_alpha,fnr_se,exact_recovery_rate,complete_graph_rate"
    )
    .map_err(TorusError::from)?;
    for r in &results.results {
        let s = &r.summary;
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            r.label, s.auc, s.fpr_at_alpha, s.fpr_se, s.fnr_at_alpha, s.fnr_se, s.exact_recovery_rate, s.complete_graph_rate
        )
        .map_err(TorusError::from)?;
        let mut roc = create(&args.out.join(format!("roc_{}.csv", r.label)))?;
        writeln!(roc, "fpr,tpr").map_err(TorusError::from)?;
        for (f, t) in &s.roc {
            writeln!(roc, "{f},{t}").map_err(TorusError::from)?;
        }
        roc.flush().map_err(TorusError::from)?;
        eprintln!("{}: AUC {:.4}, FPR {:.4}, FNR {:.4}", r.label, s.auc, s.fpr_at_alpha, s.fnr_at_alpha);
    }
    summary.flush().map_err(TorusError::from)?;
    Ok(())
}

pub fn summarize_diffs(args: SummarizeArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let gf = GraphFile::load(&args.graph).with_context(|| format!("reading {}", args.graph.display()))?;
    if gf.graph.d != ds.angles.d() {
        return Err(TorusError::Dimension {
            expected: ds.angles.d(),
            got: gf.graph.d,
        })
        .context("graph and data differ in dimension");
    }
    let groups = Groups::load(&args.groups, &ds.channel_names).with_context(|| format!("reading {}", args.groups.display()))?;
    let a = groups.get(&args.between[0])?;
    let b = groups.get(&args.between[1])?;
    let edges: Vec<(usize, usize)> = Groups::cross_pairs(a, b)
        .into_iter()
        .filter(|&(i, j)| gf.graph.has_edge(i, j))
        .collect();
    if edges.is_empty() {
        return Err(TorusError::Domain(format!(
            "no significant edges between '{}' and '{}'",
            args.between[0], args.between[1]
        ))
        .into());
    }
    let diffs: Vec<f64> = edges.iter().flat_map(|&(i, j)| ds.angles.differences(i, j)).collect();
    let ci = mean_direction_interval(&diffs, args.z)?;
    let mean = ci.mean.signed();
    let names: Vec<(String, String)> = edges
        .iter()
        .map(|&(i, j)| (ds.channel_names[i].clone(), ds.channel_names[j].clone()))
        .collect();
    emit_json(
        &json!({
            "schema_version": 1,
            "between": args.between,
            "edges": names,
            "n_angles": ci.n,
            "resultant_length": ci.resultant_length,
            "mean_rad": mean,
            "mean_deg": mean.to_degrees(),
            "half_width_rad": ci.half_width,
            "ci_deg": ci.half_width.map(|h| [(mean - h).to_degrees(), (mean + h).to_degrees()]),
        }),
        args.out.as_deref(),
    )
}
