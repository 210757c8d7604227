mod commands;
mod groups;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use torus_graph::inference::{Correction, EdgeMode};
use torus_graph::io::{CsvOptions, HeaderMode, Units};
use torus_graph::{FamilyKind, TorusError};

/// Torus graph analyses of multichannel phase data.
#[derive(Debug, Parser)]
#[command(name = "torus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a torus graph by score matching.
    Fit(FitArgs),
    /// Edgewise χ² tests against a fitted model.
    Test(TestArgs),
    /// Group χ² tests over all edges between channel groups.
    RegionTest(RegionTestArgs),
    /// Draw Gibbs samples from a model.
    Sample(SampleArgs),
    /// PLV graph from Rayleigh tests on pairwise phase differences.
    PlvGraph(PlvGraphArgs),
    /// Closed-form density of a pairwise phase difference.
    PhaseDensity(PhaseDensityArgs),
    /// KS/Fisher goodness-of-fit battery.
    Gof(GofArgs),
    /// Structure-recovery benchmark from an experiment config.
    Bench(BenchArgs),
    /// Pooled mean phase difference over significant edges between two groups.
    SummarizeDiffs(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitsArg {
    Radians,
    Degrees,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HeaderArg {
    Auto,
    Yes,
    No,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Trials × channels CSV of phase angles.
    data: PathBuf,
    #[arg(long, value_enum, default_value = "radians")]
    units: UnitsArg,
    #[arg(long, value_enum, default_value = "auto")]
    header: HeaderArg,
    #[arg(long, default_value = ",")]
    delimiter: char,
}

impl DataArgs {
    fn options(&self) -> anyhow::Result<CsvOptions> {
        if !self.delimiter.is_ascii() {
            return Err(TorusError::Domain(format!("delimiter '{}' is not ASCII", self.delimiter)).into());
        }
        Ok(CsvOptions {
            units: match self.units {
                UnitsArg::Radians => Units::Radians,
                UnitsArg::Degrees => Units::Degrees,
            },
            header: match self.header {
                HeaderArg::Auto => HeaderMode::Auto,
                HeaderArg::Yes => HeaderMode::Present,
                HeaderArg::No => HeaderMode::Absent,
            },
            delimiter: self.delimiter as u8,
        })
    }
}

/// Parses `a,b` into a pair of reals.
fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got '{s}'"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    s.parse().map_err(|e: TorusError| e.to_string())
}

fn parse_mode(s: &str) -> Result<EdgeMode, String> {
    s.parse().map_err(|e: TorusError| e.to_string())
}

fn parse_correction(s: &str) -> Result<Correction, String> {
    s.parse().map_err(|e: TorusError| e.to_string())
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// full, phasediff, uniform or uniform-phasediff.
    #[arg(long, default_value = "full", value_parser = parse_family)]
    family: FamilyKind,
    /// Group-lasso penalty.
    #[arg(long, conflicts_with = "cv")]
    lasso: Option<f64>,
    /// Choose the penalty by k-fold cross-validation.
    #[arg(long)]
    cv: Option<usize>,
    /// Penalty grid for cross-validation (comma separated).
    #[arg(long, value_delimiter = ',', requires = "cv")]
    grid: Option<Vec<f64>>,
    /// Size of the automatic penalty grid.
    #[arg(long, default_value_t = 20)]
    grid_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// none or bonferroni.
    #[arg(long, default_value = "bonferroni", value_parser = parse_correction)]
    correction: Correction,
    /// full, rot or refl.
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    mode: EdgeMode,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a 0/1 adjacency matrix.
    #[arg(long)]
    adjacency: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RegionTestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// JSON file naming channel groups.
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "rot", value_parser = parse_mode)]
    mode: EdgeMode,
    /// Restrict to one pair of groups.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    between: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(short = 'n', long = "n-samples")]
    n: usize,
    #[arg(long, default_value_t = 500)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlvGraphArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "bonferroni", value_parser = parse_correction)]
    correction: Correction,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    adjacency: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("model").required(true).args(["bivar", "trivar"])))]
struct PhaseDensityArgs {
    /// Two-node model: needs --kappa, --mu, --coupling.
    #[arg(long)]
    bivar: bool,
    /// Three-node model with uniform marginals: needs --c12, --c13, --c23.
    #[arg(long)]
    trivar: bool,
    #[arg(long, value_parser = parse_pair, default_value = "0,0", allow_hyphen_values = true)]
    kappa: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "0,0", allow_hyphen_values = true)]
    mu: (f64, f64),
    /// (α, β) of the 1–2 edge.
    #[arg(long, value_parser = parse_pair, default_value = "0,0", allow_hyphen_values = true)]
    coupling: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "0,0", allow_hyphen_values = true)]
    c12: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "0,0", allow_hyphen_values = true)]
    c13: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "0,0", allow_hyphen_values = true)]
    c23: (f64, f64),
    #[arg(long, default_value_t = 1024)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GofArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n_synth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compare against the sine-model projection of the model instead.
    #[arg(long)]
    sine: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
    between: Vec<String>,
    /// Normal quantile of the interval.
    #[arg(long, default_value_t = 1.96)]
    z: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// 1 for malformed documents, 3 for numerical failures, 2 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<TorusError>()) {
        Some(e) if e.is_schema() => 1,
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Test(a) => commands::test(a),
        Command::RegionTest(a) => commands::region_test(a),
        Command::Sample(a) => commands::sample(a),
        Command::PlvGraph(a) => commands::plv_graph(a),
        Command::PhaseDensity(a) => commands::phase_density(a),
        Command::Gof(a) => commands::gof(a),
        Command::Bench(a) => commands::bench(a),
        Command::SummarizeDiffs(a) => commands::summarize_diffs(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
