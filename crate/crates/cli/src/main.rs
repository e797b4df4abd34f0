//! `tsw`: reproducible pipelines over tree-sliced-Wasserstein distances.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation failure, 4 I/O error.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};
use tsw_core::build::{
    build_partition_tree_in, sample_ensemble, union_points, BuildConfig, BuiltTree, EdgeMetric, Hypercube,
    TreeEnsemble, TreeKind,
};
use tsw_core::datagen::{generate_orbit_dataset, OrbitConfig};
use tsw_core::io::{clouds_to_json, matrix_to_csv, read_dataset, read_ensemble, read_file, read_matrix_csv, write_file};
use tsw_core::kernel::{bandwidth_from_quantile, gram, min_eigenvalue, GramMatrix, MAX_EIGEN_SIZE};
use tsw_core::measures::{DiscreteMeasure, IndexedMeasure};
use tsw_core::rng::named_rng;
use tsw_core::transport::{
    exact_ot_with_limit, pairwise_tsw, sliced_wasserstein_1d, tree_sliced_wasserstein, CostMatrix,
    DEFAULT_SIZE_LIMIT,
};
use tsw_core::validate::{run_suite, Suite, SuiteReport};
use tsw_core::Error;

use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "tsw", version, about = "Tree-sliced-Wasserstein distances, kernels and validation suites")]
struct Cli {
    /// Worker threads for parallel stages; results do not depend on it.
    #[arg(long, global = true, env = "TSW_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the labeled orbit dataset.
    GenOrbits(GenOrbitsArgs),
    /// Sample an ensemble of random trees over a dataset's support points.
    BuildEnsemble(BuildEnsembleArgs),
    /// Pairwise distances between the measures of a dataset.
    Distances(DistancesArgs),
    /// Kernel Gram matrix from a distance matrix.
    Gram(GramArgs),
    /// Run validation suites; exits 3 if any check fails.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct GenOrbitsArgs {
    /// Class parameters, one class per value.
    #[arg(long, value_delimiter = ',', default_value = "2.5,3.5,4.0,4.1,4.3")]
    classes: Vec<f64>,
    /// Orbits per class.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    per_class: u64,
    /// Points per orbit, the start point included.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Quadtree,
    Cluster,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    L1,
}

#[derive(Debug, Args)]
struct BuildEnsembleArgs {
    /// Dataset JSON: labeled clouds or lists of weighted atoms.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "quadtree")]
    kind: KindArg,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    slices: u64,
    /// Deepest tree level.
    #[arg(long, default_value_t = 6)]
    depth: usize,
    /// Clusters per split (cluster trees).
    #[arg(long, default_value_t = 4)]
    kappa: usize,
    #[arg(long, value_enum, default_value = "euclidean")]
    edge_metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed root-cell growth in (0, 1] instead of a random one (quadtree).
    #[arg(long, requires = "offsets")]
    growth: Option<f64>,
    /// Fixed per-axis root-cell offsets in [0, 1], comma separated.
    #[arg(long, value_delimiter = ',', requires = "growth")]
    offsets: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Tsw,
    Sw,
    Exact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroundArg {
    /// Euclidean distances between support points.
    Euclidean,
    /// Tree metrics of the ensemble, averaged over slices.
    Tree,
}

#[derive(Debug, Args)]
struct DistancesArgs {
    /// Ensemble JSON (needed for `tsw` and for `exact --ground tree`).
    #[arg(long)]
    ensemble: Option<PathBuf>,
    /// Dataset JSON whose measures are compared.
    #[arg(long)]
    measures: PathBuf,
    #[arg(long, value_enum, default_value = "tsw")]
    mode: ModeArg,
    /// Ground cost for exact mode.
    #[arg(long, value_enum, default_value = "euclidean")]
    ground: GroundArg,
    /// `all`, or a file with one `i j` index pair per line.
    #[arg(long, default_value = "all")]
    pairs: String,
    /// Random directions for sliced mode.
    #[arg(long, default_value_t = 50)]
    directions: usize,
    /// Largest cost matrix (rows x columns) exact mode will solve.
    #[arg(long, default_value_t = DEFAULT_SIZE_LIMIT)]
    size_limit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GramArgs {
    /// Distance matrix CSV.
    #[arg(long)]
    dist: PathBuf,
    /// `none` (t = 1) or a percentage s: t = 1 / (s% quantile of the distances).
    #[arg(long, default_value = "none", value_parser = parse_quantile)]
    bandwidth_quantile: Quantile,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy)]
struct Quantile(Option<f64>);

fn parse_quantile(s: &str) -> Result<Quantile, String> {
    if s == "none" {
        return Ok(Quantile(None));
    }
    match s.parse::<f64>() {
        Ok(p) if p > 0.0 && p <= 100.0 => Ok(Quantile(Some(p))),
        _ => Err(format!("expected `none` or a percentage in (0, 100], got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    Oracle,
    Nd,
    Bound,
    Cluster,
    Rank,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per suite (suite defaults when omitted).
    #[arg(long)]
    trials: Option<usize>,
    /// Also write the JSON report (and its manifest) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Io(_) | Error::File { .. } | Error::Json(_) | Error::Parse(_)) => 4,
            CliError::Core(_) | CliError::Failed(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(Error::DimensionTooLarge { .. }) => {
                write!(f, "{}", self.core_message())?;
                write!(f, " (try --kind cluster)")
            }
            CliError::Core(_) => write!(f, "{}", self.core_message()),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn core_message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            _ => String::new(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match &cli.command {
        Command::GenOrbits(a) => gen_orbits(a),
        Command::BuildEnsemble(a) => build_ensemble(a),
        Command::Distances(a) => distances(a),
        Command::Gram(a) => gram_cmd(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Writes `bytes` to `out` and the finished manifest next to it.
fn emit(out: &Path, bytes: &[u8], mut manifest: RunManifest) -> CliResult<()> {
    let start = Instant::now();
    write_file(out, bytes)?;
    manifest.output(out, bytes);
    manifest.lap("write", start);
    let manifest = manifest.finish();
    let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)? + "\n";
    write_file(&RunManifest::path_for(out), text.as_bytes())?;
    Ok(())
}

fn read_input(path: &Path, manifest: &mut RunManifest) -> CliResult<()> {
    let text = read_file(path)?;
    manifest.input(path, text.as_bytes());
    Ok(())
}

fn gen_orbits(a: &GenOrbitsArgs) -> CliResult<()> {
    let cfg = OrbitConfig {
        class_params: a.classes.clone(),
        orbits_per_class: a.per_class as usize,
        points_per_orbit: a.points as usize,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = RunManifest::new("gen-orbits", json!(cfg), Some(a.seed));
    let start = Instant::now();
    let clouds = generate_orbit_dataset(&cfg)?;
    manifest.lap("generate", start);
    let text = clouds_to_json(&clouds)? + "\n";
    emit(&a.out, text.as_bytes(), manifest)
}

fn build_ensemble(a: &BuildEnsembleArgs) -> CliResult<()> {
    let kind = match a.kind {
        KindArg::Quadtree => TreeKind::Quadtree,
        KindArg::Cluster => TreeKind::Cluster,
    };
    let cfg = BuildConfig {
        deepest_level: a.depth,
        kappa: a.kappa,
        edge_metric: match a.edge_metric {
            MetricArg::Euclidean => EdgeMetric::Euclidean,
            MetricArg::L1 => EdgeMetric::L1,
        },
        seed: a.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut config = json!({ "input": a.input, "kind": kind, "slices": a.slices, "build": cfg });
    if let (Some(g), Some(o)) = (a.growth, &a.offsets) {
        if matches!(kind, TreeKind::Cluster) {
            return Err(CliError::Usage("--growth/--offsets apply to quadtree ensembles only".into()));
        }
        config["growth"] = json!(g);
        config["offsets"] = json!(o);
    }
    let mut manifest = RunManifest::new("build-ensemble", config, Some(a.seed));
    read_input(&a.input, &mut manifest)?;
    let measures = read_dataset(&a.input)?;
    let points = union_points(&measures);

    let start = Instant::now();
    let ens = match (a.growth, &a.offsets) {
        (Some(growth), Some(offsets)) => fixed_cube_ensemble(&points, a.slices as usize, &cfg, growth, offsets)?,
        _ => sample_ensemble(&points, a.slices as usize, &cfg, kind, a.seed)?,
    };
    manifest.lap("build", start);
    let text = serde_json::to_string(&ens).map_err(Error::from)? + "\n";
    emit(&a.out, text.as_bytes(), manifest)
}

/// Quadtree ensemble whose root cell is fixed rather than random, so every
/// slice is the same tree.
fn fixed_cube_ensemble(
    points: &[Vec<f64>],
    slices: usize,
    cfg: &BuildConfig,
    growth: f64,
    offsets: &[f64],
) -> CliResult<TreeEnsemble> {
    let cube = Hypercube::expand(points, growth, offsets).map_err(|e| CliError::Usage(e.to_string()))?;
    let built: BuiltTree = build_partition_tree_in(points, cfg, cube)?.into();
    Ok(TreeEnsemble {
        kind: TreeKind::Quadtree,
        config: cfg.clone(),
        master_seed: cfg.seed,
        points: points.to_vec(),
        trees: vec![built.tree; slices],
        point_to_node: vec![built.point_to_node; slices],
    })
}

fn read_pairs(path: &Path, n: usize) -> CliResult<Vec<(usize, usize)>> {
    let text = read_file(path)?;
    let mut pairs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parsed: Vec<usize> = fields.iter().filter_map(|f| f.parse().ok()).collect();
        match parsed[..] {
            [i, j] if fields.len() == 2 && i < n && j < n => pairs.push((i, j)),
            _ => {
                return Err(Error::Parse(format!(
                    "{}:{}: expected two measure indices below {n}, got {line:?}",
                    path.display(),
                    k + 1
                ))
                .into())
            }
        }
    }
    Ok(pairs)
}

/// Distance between measures `i` and `j` under the chosen mode.
struct PairDistance<'a> {
    args: &'a DistancesArgs,
    measures: &'a [DiscreteMeasure],
    ensemble: Option<&'a TreeEnsemble>,
    indexed: Option<Vec<IndexedMeasure>>,
}

impl PairDistance<'_> {
    fn eval(&self, i: usize, j: usize) -> tsw_core::Result<f64> {
        let (a, b) = (&self.measures[i], &self.measures[j]);
        match self.args.mode {
            ModeArg::Tsw => {
                let (ens, idx) = (self.ensemble.expect("checked"), self.indexed.as_ref().expect("checked"));
                tree_sliced_wasserstein(ens, &idx[i], &idx[j])
            }
            ModeArg::Sw => {
                if !a.is_uniform() || !b.is_uniform() {
                    return Err(Error::Validation(format!(
                        "sliced mode needs uniform weights (measures {i} and {j})"
                    )));
                }
                // the same directions for every pair
                let mut rng = named_rng(self.args.seed, "sliced-directions");
                sliced_wasserstein_1d(a.supports(), b.supports(), self.args.directions, &mut rng)
            }
            ModeArg::Exact => match self.args.ground {
                GroundArg::Euclidean => {
                    let costs = CostMatrix::euclidean(a.supports(), b.supports())?;
                    Ok(exact_ot_with_limit(&costs, a.weights(), b.weights(), self.args.size_limit)?.value)
                }
                GroundArg::Tree => {
                    let (ens, idx) = (self.ensemble.expect("checked"), self.indexed.as_ref().expect("checked"));
                    let (mi, mj) = (&idx[i], &idx[j]);
                    let mut total = 0.0;
                    for (s, tree) in ens.trees.iter().enumerate() {
                        let map = &ens.point_to_node[s];
                        let na: Vec<usize> = mi.indices.iter().map(|&p| map[p]).collect();
                        let nb: Vec<usize> = mj.indices.iter().map(|&p| map[p]).collect();
                        let costs = CostMatrix::tree_metric(tree, &na, &nb)?;
                        total += exact_ot_with_limit(&costs, &mi.weights, &mj.weights, self.args.size_limit)?.value;
                    }
                    Ok(total / ens.n_slices() as f64)
                }
            },
        }
    }
}

fn distances(a: &DistancesArgs) -> CliResult<()> {
    let needs_ensemble = matches!(a.mode, ModeArg::Tsw) || matches!((a.mode, a.ground), (ModeArg::Exact, GroundArg::Tree));
    if needs_ensemble && a.ensemble.is_none() {
        return Err(CliError::Usage("this mode needs --ensemble".into()));
    }
    if a.directions == 0 {
        return Err(CliError::Usage("--directions must be at least 1".into()));
    }
    let config = json!({
        "ensemble": a.ensemble,
        "measures": a.measures,
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "ground": format!("{:?}", a.ground).to_lowercase(),
        "pairs": a.pairs,
        "directions": a.directions,
        "size_limit": a.size_limit,
    });
    let mut manifest = RunManifest::new("distances", config, Some(a.seed));
    read_input(&a.measures, &mut manifest)?;
    let measures = read_dataset(&a.measures)?;
    let n = measures.len();
    let ensemble = match &a.ensemble {
        Some(p) if needs_ensemble => {
            read_input(p, &mut manifest)?;
            Some(read_ensemble(p)?)
        }
        _ => None,
    };
    let indexed = ensemble.as_ref().map(|e| e.index_measures(&measures)).transpose()?;
    let pairs = match a.pairs.as_str() {
        "all" => None,
        path => {
            read_input(Path::new(path), &mut manifest)?;
            Some(read_pairs(Path::new(path), n)?)
        }
    };

    let start = Instant::now();
    let text = match (&pairs, a.mode) {
        (None, ModeArg::Tsw) => {
            let d = pairwise_tsw(ensemble.as_ref().expect("checked"), indexed.as_ref().expect("checked"))?;
            matrix_to_csv(&d, None)?
        }
        _ => {
            let eval = PairDistance {
                args: a,
                measures: &measures,
                ensemble: ensemble.as_ref(),
                indexed,
            };
            match &pairs {
                None => {
                    let upper: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
                    let values = upper.par_iter().map(|&(i, j)| eval.eval(i, j)).collect::<tsw_core::Result<Vec<_>>>()?;
                    let mut d = tsw_core::DMatrix::zeros(n, n);
                    for (&(i, j), v) in upper.iter().zip(values) {
                        d[(i, j)] = v;
                        d[(j, i)] = v;
                    }
                    matrix_to_csv(&d, None)?
                }
                Some(list) => {
                    let values = list.par_iter().map(|&(i, j)| eval.eval(i, j)).collect::<tsw_core::Result<Vec<_>>>()?;
                    let mut out = String::from("i,j,distance\n");
                    for (&(i, j), v) in list.iter().zip(values) {
                        out.push_str(&format!("{i},{j},{v:.16e}\n"));
                    }
                    out
                }
            }
        }
    };
    manifest.lap("distances", start);
    emit(&a.out, text.as_bytes(), manifest)
}

fn gram_cmd(a: &GramArgs) -> CliResult<()> {
    let config = json!({ "dist": a.dist, "bandwidth_quantile": a.bandwidth_quantile.0 });
    let mut manifest = RunManifest::new("gram", config, None);
    read_input(&a.dist, &mut manifest)?;
    let (d, ids) = read_matrix_csv(&a.dist)?;
    let dist = GramMatrix::distance(d)?;
    let start = Instant::now();
    let t = bandwidth_from_quantile(&dist.off_diagonal(), a.bandwidth_quantile.0)?;
    let k = gram(&dist, t)?;
    manifest.lap("gram", start);
    let mut summary = json!({ "bandwidth": t });
    if k.len() <= MAX_EIGEN_SIZE {
        let start = Instant::now();
        summary["min_eigenvalue"] = json!(min_eigenvalue(&k.entries)?);
        manifest.lap("eigen", start);
    }
    manifest.config["derived"] = summary;
    let text = matrix_to_csv(&k.entries, Some(&ids))?;
    emit(&a.out, text.as_bytes(), manifest)
}

fn validate(a: &ValidateArgs) -> CliResult<()> {
    let suites: Vec<Suite> = match a.suite {
        SuiteArg::All => Suite::ALL.to_vec(),
        SuiteArg::Oracle => vec![Suite::Oracle],
        SuiteArg::Nd => vec![Suite::Nd],
        SuiteArg::Bound => vec![Suite::Bound],
        SuiteArg::Cluster => vec![Suite::Cluster],
        SuiteArg::Rank => vec![Suite::Rank],
    };
    if a.trials == Some(0) {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let config = json!({ "suite": format!("{:?}", a.suite).to_lowercase(), "trials": a.trials });
    let mut manifest = RunManifest::new("validate", config, Some(a.seed));
    let mut reports: Vec<SuiteReport> = Vec::new();
    for suite in suites {
        let start = Instant::now();
        let report = run_suite(suite, a.seed, a.trials)?;
        manifest.lap(suite.name(), start);
        for c in &report.checks {
            eprintln!(
                "{:<8} {:<36} {} worst={:.3e} tol={:.0e} cases={}",
                suite.name(),
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.worst,
                c.tolerance,
                c.cases
            );
        }
        reports.push(report);
    }
    let body: Value = json!({ "seed": a.seed, "passed": reports.iter().all(|r| r.passed), "reports": reports });
    let text = serde_json::to_string_pretty(&body).map_err(Error::from)? + "\n";
    println!("{text}");
    if let Some(out) = &a.out {
        emit(out, text.as_bytes(), manifest)?;
    }
    match reports.iter().find(|r| !r.passed) {
        None => Ok(()),
        Some(r) => Err(CliError::Failed(format!(
            "suite {} failed; first counterexample: {}",
            r.suite.name(),
            r.counterexample.as_ref().map_or_else(|| "none recorded".to_string(), Value::to_string)
        ))),
    }
}
