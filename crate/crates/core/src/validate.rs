//! Randomized validation suites certifying the closed forms against exact
//! oracles. Every suite is a pure function of its seed and trial count.

use std::collections::BTreeSet;

use combinatorics::combinations;
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::build::{
    build_clustering_tree, build_partition_tree, farthest_point_clustering_from, sample_ensemble,
    union_points, BuildConfig, EdgeMetric, TreeKind,
};
use crate::datagen::{dirichlet_weights, generate_orbit_dataset, random_measure, subsample_cloud, OrbitConfig};
use crate::kernel::{check_negative_definite, gram, gram_power, min_eigenvalue, negative_control, GramMatrix, PSD_EIGEN_TOL};
use crate::rng::{derive_seed, named_rng, StreamRng};
use crate::transport::{
    check_w2_bound, exact_ot_with_limit, nn_rank_experiment, pairwise_tsw, tree_wasserstein, CostMatrix,
};
use crate::tree::{NodeMeasure, RootedTree};
use crate::{Error, Point, Result};

/// Largest tree used by the oracle suite.
pub const ORACLE_MAX_NODES: usize = 32;
/// Largest number of supported nodes per measure in the oracle suite.
pub const ORACLE_MAX_SUPPORT: usize = 20;
/// Absolute tolerance between closed form and oracle.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Oracle,
    Nd,
    Bound,
    Cluster,
    Rank,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Oracle, Suite::Nd, Suite::Bound, Suite::Cluster, Suite::Rank];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::Nd => "nd",
            Suite::Bound => "bound",
            Suite::Cluster => "cluster",
            Suite::Rank => "rank",
        }
    }

    /// Trial count used when none is given.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Oracle => 200,
            Suite::Nd | Suite::Bound => 100,
            Suite::Cluster | Suite::Rank => 1,
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite {s:?}")))
    }
}

/// One property checked over many cases; `worst` is the largest observed
/// violation measure (compared against `tolerance`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            cases: 0,
            worst: f64::NEG_INFINITY,
            tolerance,
            passed: true,
        }
    }

    /// Records a case with violation measure `value`; returns whether it passed.
    fn record(&mut self, value: f64) -> bool {
        self.cases += 1;
        if value > self.worst || value.is_nan() {
            self.worst = value;
        }
        let ok = value <= self.tolerance;
        self.passed &= ok;
        ok
    }

    /// Records a boolean case.
    fn record_bool(&mut self, ok: bool) -> bool {
        self.record(if ok { 0.0 } else { 1.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<Check>,
    /// The first failing case, if any.
    pub counterexample: Option<Value>,
    /// Suite-specific summary values.
    pub details: Value,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, trials: usize, checks: Vec<Check>, counterexample: Option<Value>, details: Value) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            suite,
            seed,
            trials,
            checks,
            counterexample,
            details,
            passed,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_suite(suite: Suite, seed: u64, trials: Option<usize>) -> Result<SuiteReport> {
    let trials = trials.unwrap_or(suite.default_trials());
    match suite {
        Suite::Oracle => oracle_suite(seed, trials),
        Suite::Nd => nd_suite(seed, trials),
        Suite::Bound => bound_suite(seed, trials),
        Suite::Cluster => cluster_suite(),
        Suite::Rank => rank_suite(seed, &RankSuiteConfig::default()),
    }
}

fn random_cloud(rng: &mut StreamRng, n: usize, d: usize) -> Vec<Point> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// A random partition- or clustering-built tree with at most 32 nodes.
fn random_small_tree(rng: &mut StreamRng, kind: TreeKind) -> Result<RootedTree> {
    loop {
        let n = rng.random_range(2..=14);
        let d = rng.random_range(1..=3);
        let pts = random_cloud(rng, n, d);
        let cfg = BuildConfig {
            deepest_level: rng.random_range(1..=5),
            kappa: rng.random_range(2..=4),
            ..BuildConfig::default()
        };
        let tree = match kind {
            TreeKind::Quadtree => build_partition_tree(&pts, &cfg, rng)?.tree,
            TreeKind::Cluster => build_clustering_tree(&pts, &cfg, rng)?.tree,
        };
        if tree.len() <= ORACLE_MAX_NODES {
            return Ok(tree);
        }
    }
}

/// Random measure on at most 20 distinct nodes with flat Dirichlet weights.
fn random_node_support(rng: &mut StreamRng, tree: &RootedTree) -> (Vec<usize>, Vec<f64>) {
    let k = rng.random_range(1..=tree.len().min(ORACLE_MAX_SUPPORT));
    let mut nodes = rand::seq::index::sample(rng, tree.len(), k).into_vec();
    nodes.sort_unstable();
    let weights = dirichlet_weights(k, rng);
    (nodes, weights)
}

/// Closed-form TW against the transport LP with tree-metric costs.
pub fn oracle_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = named_rng(seed, "oracle");
    let mut check = Check::new("tw_equals_exact_ot", ORACLE_TOL);
    let mut counterexample = None;
    let mut by_kind = [0usize; 2];
    for trial in 0..trials {
        let kind = if trial % 2 == 0 { TreeKind::Quadtree } else { TreeKind::Cluster };
        by_kind[trial % 2] += 1;
        let tree = random_small_tree(&mut rng, kind)?;
        let (na, wa) = random_node_support(&mut rng, &tree);
        let (nb, wb) = random_node_support(&mut rng, &tree);
        let mu = NodeMeasure::from_weighted_nodes(&tree, &na, &wa)?;
        let nu = NodeMeasure::from_weighted_nodes(&tree, &nb, &wb)?;
        let tw = tree_wasserstein(&tree, &mu, &nu)?;
        let costs = CostMatrix::tree_metric(&tree, &na, &nb)?;
        let ot = exact_ot_with_limit(&costs, &wa, &wb, usize::MAX)?.value;
        if !check.record((tw - ot).abs()) && counterexample.is_none() {
            counterexample = Some(json!({
                "trial": trial, "tree": tree, "mu_nodes": na, "mu_weights": wa,
                "nu_nodes": nb, "nu_weights": wb, "tw": tw, "exact_ot": ot,
            }));
        }
    }
    let details = json!({ "partition_trees": by_kind[0], "clustering_trees": by_kind[1] });
    Ok(SuiteReport::new(Suite::Oracle, seed, trials, vec![check], counterexample, details))
}

/// Bandwidths for the kernel positive-definiteness checks.
pub const KERNEL_BANDWIDTHS: [f64; 3] = [0.1, 1.0, 10.0];
/// Slice counts cycled through by the definiteness suite.
pub const ND_SLICE_COUNTS: [usize; 3] = [1, 4, 10];

/// Negative definiteness of TSW matrices, positive definiteness of their
/// kernels, indefinite divisibility, and a failing negative control.
pub fn nd_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    const FAMILY: usize = 10;
    const VECTORS: usize = 100;
    let mut rng = named_rng(seed, "nd");
    let mut nd = Check::new("quadratic_form_nonpositive", crate::kernel::ND_QUADRATIC_TOL);
    let mut centered = Check::new("centered_eigenvalues_nonnegative", -PSD_EIGEN_TOL);
    let mut psd = Check::new("kernel_min_eigenvalue", -PSD_EIGEN_TOL);
    let mut divisible = Check::new("indefinite_divisibility", 1e-12);
    let mut control = Check::new("negative_control_rejected", 0.0);
    let mut counterexample = None;

    for trial in 0..trials {
        let n_s = ND_SLICE_COUNTS[trial % ND_SLICE_COUNTS.len()];
        let kind = if trial % 2 == 0 { TreeKind::Quadtree } else { TreeKind::Cluster };
        let d = rng.random_range(1..=3);
        let measures = (0..FAMILY)
            .map(|_| {
                let n = rng.random_range(1..=8);
                random_measure(d, n, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let points = union_points(&measures);
        let cfg = BuildConfig::default();
        let ens = sample_ensemble(&points, n_s, &cfg, kind, rng.random())?;
        let dist = pairwise_tsw(&ens, &ens.index_measures(&measures)?)?;

        let report = check_negative_definite(&dist, VECTORS, &mut rng)?;
        let ok_q = nd.record(report.max_quadratic_form);
        let ok_c = centered.record(-report.min_centered_eigenvalue);
        let mut ok_k = true;
        let mut ok_d = true;
        let dm = GramMatrix::distance(dist.clone())?;
        for t in KERNEL_BANDWIDTHS {
            let g = gram(&dm, t)?;
            ok_k &= psd.record(-min_eigenvalue(&g.entries)?);
            for i in [2u32, 4] {
                let powered = gram_power(&gram(&dm, t / f64::from(i))?, i)?;
                ok_d &= divisible.record((&g.entries - &powered.entries).amax());
            }
        }
        if !(ok_q && ok_c && ok_k && ok_d) && counterexample.is_none() {
            counterexample = Some(json!({
                "trial": trial, "slices": n_s, "kind": kind,
                "distances": matrix_rows(&dist), "nd_report": report,
            }));
        }
    }

    let report = check_negative_definite(&negative_control(), VECTORS, &mut rng)?;
    if !control.record_bool(!report.passed) && counterexample.is_none() {
        counterexample = Some(json!({ "negative_control": report }));
    }
    let details = json!({ "negative_control": report });
    Ok(SuiteReport::new(
        Suite::Nd,
        seed,
        trials,
        vec![nd, centered, psd, divisible, control],
        counterexample,
        details,
    ))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Largest separation depth of an accepted bound instance.
pub const BOUND_MAX_DEPTH: usize = 8;

/// The W2 bound and the per-level matching identity on random cloud pairs
/// whose separation depth is at most 8 (instances needing deeper trees are
/// redrawn and counted).
pub fn bound_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = named_rng(seed, "bound");
    let mut holds = Check::new("w2_bound_holds", 0.0);
    let mut identity = Check::new("level_identity_exact", 0.0);
    let mut counterexample = None;
    let mut redrawn = 0;
    let mut max_ratio = 0.0f64;
    let mut trial = 0;
    while trial < trials {
        let n = rng.random_range(1..=30);
        let d = rng.random_range(1..=3);
        let h = rng.random_range(1..=BOUND_MAX_DEPTH);
        let a = random_cloud(&mut rng, n, d);
        let b = random_cloud(&mut rng, n, d);
        let report = check_w2_bound(&a, &b, h, &mut rng)?;
        if report.depth > BOUND_MAX_DEPTH {
            redrawn += 1;
            continue;
        }
        trial += 1;
        max_ratio = max_ratio.max(report.w2 / report.rhs);
        let ok_b = holds.record(report.w2 - report.rhs - 1e-12);
        let ok_i = identity.record_bool(report.level_identity_holds());
        if !(ok_b && ok_i) && counterexample.is_none() {
            counterexample = Some(json!({ "a": a, "b": b, "h": h, "report": report }));
        }
    }
    let details = json!({ "redrawn_too_deep": redrawn, "max_w2_over_rhs": max_ratio });
    Ok(SuiteReport::new(Suite::Bound, seed, trials, vec![holds, identity], counterexample, details))
}

/// Optimal discrete k-center radius by enumerating center subsets.
pub fn optimal_kcenter_radius(points: &[Point], k: usize) -> f64 {
    let n = points.len();
    let dist = |i: usize, j: usize| EdgeMetric::Euclidean.distance(&points[i], &points[j]);
    let mut best = f64::INFINITY;
    for size in 1..=k.min(n) {
        for centers in combinations(n, size) {
            let r = (0..n)
                .map(|i| centers.iter().map(|&c| dist(i, c)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            best = best.min(r);
        }
    }
    best
}

/// Grids whose subsets are enumerated by the clustering suite.
pub fn cluster_grids() -> Vec<Vec<Point>> {
    let line: Vec<Point> = (0..8).map(|i| vec![f64::from(i)]).collect();
    let square: Vec<Point> = (0..3)
        .flat_map(|x| (0..3).map(move |y| vec![f64::from(x), f64::from(y)]))
        .collect();
    let uneven: Vec<Point> = [0.0, 1.0, 3.0, 7.0, 15.0, 16.0, 18.0, 22.0]
        .iter()
        .map(|&x| vec![x, (x * 0.5_f64).floor()])
        .collect();
    vec![line, square, uneven]
}

/// Farthest-point clustering radius is at most twice the optimum, for every
/// subset of at most 8 grid points, every kappa <= 3 and every first center.
pub fn cluster_suite() -> Result<SuiteReport> {
    let mut check = Check::new("radius_at_most_twice_optimal", 0.0);
    let mut counterexample = None;
    let mut sets = 0;
    let mut worst_ratio = 0.0f64;
    let mut seen = BTreeSet::new();
    for grid in cluster_grids() {
        for size in 1..=grid.len().min(8) {
            for subset in combinations(grid.len(), size) {
                let pts: Vec<Point> = subset.iter().map(|&i| grid[i].clone()).collect();
                let key: Vec<Vec<u64>> = pts.iter().map(|p| p.iter().map(|x| x.to_bits()).collect()).collect();
                if !seen.insert(key) {
                    continue;
                }
                sets += 1;
                for kappa in 1..=3 {
                    let opt = optimal_kcenter_radius(&pts, kappa);
                    for first in 0..pts.len() {
                        let c = farthest_point_clustering_from(&pts, kappa, first, EdgeMetric::Euclidean)?;
                        if opt > 0.0 {
                            worst_ratio = worst_ratio.max(c.radius / opt);
                        }
                        if !check.record(c.radius - 2.0 * opt) && counterexample.is_none() {
                            counterexample = Some(json!({
                                "points": pts, "kappa": kappa, "first": first,
                                "radius": c.radius, "optimal": opt,
                            }));
                        }
                    }
                }
            }
        }
    }
    let details = json!({ "point_sets": sets, "max_ratio": worst_ratio });
    Ok(SuiteReport::new(Suite::Cluster, 0, 1, vec![check], counterexample, details))
}

/// Parameters of the nearest-neighbor rank suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSuiteConfig {
    pub orbits: OrbitConfig,
    /// Points kept per cloud.
    pub subsample: usize,
    pub slice_counts: Vec<usize>,
    pub build: BuildConfig,
    pub kind: TreeKind,
    /// Allowed increase of the mean rank from one slice to the most slices.
    pub trend_tolerance: f64,
}

impl Default for RankSuiteConfig {
    fn default() -> Self {
        Self {
            orbits: OrbitConfig::default(),
            subsample: 50,
            slice_counts: vec![1, 2, 4, 6, 8, 10, 12],
            build: BuildConfig::default(),
            kind: TreeKind::Quadtree,
            trend_tolerance: 0.5,
        }
    }
}

/// Mean W2 rank of the TSW nearest neighbor does not grow with the number
/// of slices (beyond the tolerance) on orbit data.
pub fn rank_suite(seed: u64, cfg: &RankSuiteConfig) -> Result<SuiteReport> {
    let orbits = OrbitConfig {
        seed,
        ..cfg.orbits.clone()
    };
    let data = generate_orbit_dataset(&orbits)?;
    let clouds: Vec<Vec<Point>> = data
        .iter()
        .enumerate()
        .map(|(i, c)| subsample_cloud(&c.points, cfg.subsample, derive_seed(seed, i as u64)))
        .collect();
    let table = nn_rank_experiment(&clouds, &cfg.slice_counts, &cfg.build, cfg.kind, derive_seed(seed, 1 << 32))?;
    let first = table.mean_rank[0];
    let last = *table.mean_rank.last().expect("slice counts are non-empty");
    let mut check = Check::new("mean_rank_trend", cfg.trend_tolerance);
    let counterexample = (!check.record(last - first)).then(|| json!({ "table": table.mean_rank }));
    let details = json!({ "slice_counts": table.slice_counts, "mean_rank": table.mean_rank });
    Ok(SuiteReport::new(Suite::Rank, seed, 1, vec![check], counterexample, details))
}

/// Small combinatorics helper kept local to avoid a dependency.
mod combinatorics {
    /// All `k`-subsets of `0..n` in lexicographic order.
    pub fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
        let mut current: Option<Vec<usize>> = (k <= n).then(|| (0..k).collect());
        std::iter::from_fn(move || {
            let out = current.clone()?;
            let next = {
                let c = current.as_mut().expect("checked above");
                let mut i = k;
                loop {
                    if i == 0 {
                        break false;
                    }
                    i -= 1;
                    if c[i] < n - k + i {
                        c[i] += 1;
                        for j in i + 1..k {
                            c[j] = c[j - 1] + 1;
                        }
                        break true;
                    }
                }
            };
            if !next {
                current = None;
            }
            Some(out)
        })
    }
}
