//! Exact optimal transport between discrete measures.
//!
//! The primal transport LP is solved as an uncapacitated min-cost flow with a
//! primal network simplex (block-search pivoting over a strongly feasible
//! spanning tree, following the LEMON design). It is exact up to floating
//! point round-off and serves as the reference the closed forms are checked
//! against.

use crate::measures::SIMPLEX_TOL;
use crate::tree::RootedTree;
use crate::{Error, Point, Result};

/// Default bound on `n * m` for [`exact_ot`].
pub const DEFAULT_SIZE_LIMIT: usize = 10_000;

/// Dense nonnegative cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("cost matrix must be non-empty"));
        }
        if data.len() != rows * cols {
            return Err(Error::Cardinality {
                left: data.len(),
                right: rows * cols,
            });
        }
        if let Some(c) = data.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid(format!("cost {c} is negative or not finite")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(rows, cols, data)
    }

    /// Euclidean ground cost between two point sets.
    pub fn euclidean(a: &[Point], b: &[Point]) -> Result<Self> {
        Self::from_fn(a.len(), b.len(), |i, j| {
            crate::build::EdgeMetric::Euclidean.distance(&a[i], &b[j])
        })
    }

    /// Tree-metric ground cost between two lists of nodes.
    pub fn tree_metric(tree: &RootedTree, a: &[usize], b: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(a.len() * b.len());
        for &x in a {
            for &z in b {
                data.push(tree.path_length(x, z)?);
            }
        }
        Self::new(a.len(), b.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Optimal value and a sparse optimal coupling `(i, j, mass)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OtSolution {
    pub value: f64,
    pub plan: Vec<(usize, usize, f64)>,
}

/// Exact 1-Wasserstein cost `min <pi, C>` over couplings of `mu` and `nu`,
/// with the default desk-scale guard `n * m <= 10_000`.
pub fn exact_ot(costs: &CostMatrix, mu: &[f64], nu: &[f64]) -> Result<f64> {
    exact_ot_with_limit(costs, mu, nu, DEFAULT_SIZE_LIMIT).map(|s| s.value)
}

/// As [`exact_ot`], with an explicit size guard and the optimal plan.
pub fn exact_ot_with_limit(
    costs: &CostMatrix,
    mu: &[f64],
    nu: &[f64],
    limit: usize,
) -> Result<OtSolution> {
    let size = costs.rows * costs.cols;
    if size > limit {
        return Err(Error::SizeLimit { size, limit });
    }
    check_simplex(mu, costs.rows)?;
    check_simplex(nu, costs.cols)?;

    // zero-mass atoms carry no flow; drop them
    let rows: Vec<usize> = (0..costs.rows).filter(|&i| mu[i] > 0.0).collect();
    let cols: Vec<usize> = (0..costs.cols).filter(|&j| nu[j] > 0.0).collect();
    let supply: Vec<f64> = rows.iter().map(|&i| mu[i]).collect();
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = cols.iter().map(|&j| nu[j]).sum();
    let demand: Vec<f64> = cols
        .iter()
        .map(|&j| nu[j] * (total_supply / total_demand))
        .collect();
    let sub_costs: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| costs.get(i, j))
        .collect();

    let mut solver = NetworkSimplex::new(&supply, &demand, sub_costs);
    solver.run()?;

    let m = cols.len();
    let mut value = 0.0;
    let mut plan = Vec::new();
    for e in 0..solver.arc_num {
        let f = solver.flow[e];
        if f > 0.0 {
            value += f * solver.cost[e];
            plan.push((rows[e / m], cols[e % m], f));
        }
    }
    Ok(OtSolution { value, plan })
}

fn check_simplex(w: &[f64], len: usize) -> Result<()> {
    if w.len() != len {
        return Err(Error::Cardinality {
            left: w.len(),
            right: len,
        });
    }
    if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("transport weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("transport weights sum to {total}, not 1")));
    }
    Ok(())
}

const NONE: usize = usize::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Primal network simplex for the uncapacitated transportation problem.
///
/// Nodes `0..n` are sources, `n..n+m` sinks and `n+m` an artificial root.
/// Arc `i * m + j` carries mass from source `i` to sink `j`; arcs from
/// `n * m` on connect each node to the root and form the initial tree.
struct NetworkSimplex {
    arc_num: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,

    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,

    block_size: usize,
    next_arc: usize,
    /// Reduced costs above `-eps` count as nonnegative.
    eps: f64,
}

impl NetworkSimplex {
    fn new(supply: &[f64], demand: &[f64], costs: Vec<f64>) -> Self {
        let n = supply.len();
        let m = demand.len();
        let node_num = n + m;
        let arc_num = n * m;
        let all_arc_num = arc_num + node_num;
        let root = node_num;

        let mut source = Vec::with_capacity(all_arc_num);
        let mut target = Vec::with_capacity(all_arc_num);
        for i in 0..n {
            for j in 0..m {
                source.push(i);
                target.push(n + j);
            }
        }
        source.resize(all_arc_num, 0);
        target.resize(all_arc_num, 0);

        let max_cost = costs.iter().copied().fold(0.0, f64::max);
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let mut cost = costs;
        cost.resize(all_arc_num, 0.0);
        let mut flow = vec![0.0; all_arc_num];
        let mut state = vec![STATE_LOWER; all_arc_num];

        let mut pi = vec![0.0; node_num + 1];
        let mut parent = vec![NONE; node_num + 1];
        let mut pred = vec![NONE; node_num + 1];
        let mut thread = vec![0; node_num + 1];
        let mut rev_thread = vec![0; node_num + 1];
        let mut succ_num = vec![1; node_num + 1];
        let mut last_succ = vec![0; node_num + 1];
        let mut pred_dir = vec![DIR_UP; node_num + 1];

        for u in 0..node_num {
            let e = arc_num + u;
            parent[u] = root;
            pred[u] = e;
            thread[u] = u + 1;
            rev_thread[u + 1] = u;
            last_succ[u] = u;
            state[e] = STATE_TREE;
            if u < n {
                pred_dir[u] = DIR_UP;
                source[e] = u;
                target[e] = root;
                flow[e] = supply[u];
                cost[e] = 0.0;
            } else {
                pred_dir[u] = DIR_DOWN;
                pi[u] = art_cost;
                source[e] = root;
                target[e] = u;
                flow[e] = demand[u - n];
                cost[e] = art_cost;
            }
        }
        thread[root] = 0;
        rev_thread[0] = root;
        succ_num[root] = node_num + 1;
        last_succ[root] = root - 1;

        let block_size = ((arc_num as f64).sqrt().ceil() as usize).max(10);
        Self {
            arc_num,
            source,
            target,
            cost,
            flow,
            state,
            pi,
            parent,
            pred,
            thread,
            rev_thread,
            succ_num,
            last_succ,
            pred_dir,
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            block_size,
            next_arc: 0,
            eps: 64.0 * f64::EPSILON * art_cost,
        }
    }

    fn run(&mut self) -> Result<()> {
        while self.find_entering_arc() {
            self.find_join_node();
            let change = self.find_leaving_arc();
            if !self.delta.is_finite() {
                return Err(Error::Infeasible);
            }
            self.change_flow(change);
            if change {
                self.update_tree_structure();
                self.update_potential();
            }
        }
        let tol = 1e-9;
        if self.flow[self.arc_num..].iter().any(|&f| f > tol) {
            return Err(Error::Infeasible);
        }
        Ok(())
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        f64::from(self.state[e])
            * (self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]])
    }

    /// Block search: scan arcs in blocks from where the previous search
    /// stopped and take the most negative reduced cost of the first block
    /// that has one.
    fn find_entering_arc(&mut self) -> bool {
        let total = self.arc_num;
        let mut best = -self.eps;
        let mut found = false;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..total {
            let c = self.reduced_cost(e);
            if c < best {
                best = c;
                self.in_arc = e;
                found = true;
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source[self.in_arc], self.target[self.in_arc])
        } else {
            (self.target[self.in_arc], self.source[self.in_arc])
        };
        self.delta = f64::INFINITY;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            let d = if self.pred_dir[u] == DIR_DOWN {
                f64::INFINITY
            } else {
                self.flow[self.pred[u]]
            };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let d = if self.pred_dir[u] == DIR_UP {
                f64::INFINITY
            } else {
                self.flow[self.pred[u]]
            };
            if d <= self.delta && d.is_finite() {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }

        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self, change: bool) {
        if self.delta > 0.0 {
            let val = f64::from(self.state[self.in_arc]) * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source[self.in_arc];
            while u != self.join {
                self.flow[self.pred[u]] -= f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
            let mut u = self.target[self.in_arc];
            while u != self.join {
                self.flow[self.pred[u]] += f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
        }
        if change {
            self.state[self.in_arc] = STATE_TREE;
            let out = self.pred[self.u_out];
            self.state[out] = STATE_LOWER;
            self.flow[out] = 0.0;
        } else {
            self.state[self.in_arc] = -self.state[self.in_arc];
        }
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { DIR_UP } else { DIR_DOWN };

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            // when old_rev_thread == v_in, join and v_out coincide
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // re-hang the stem nodes between u_in and u_out
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // pred, pred_dir, last_succ and succ_num along the reversed stem
            let mut tmp_sc = 0isize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u] as isize - self.succ_num[p] as isize;
                self.succ_num[u] = tmp_sc as usize;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in]
            - self.pi[u_in]
            - f64::from(self.pred_dir[u_in]) * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}
