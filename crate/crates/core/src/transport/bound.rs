//! Empirical check of the bound `W2 <= TW_H / 2 + beta * sqrt(d) / 2^H`
//! between two equal-size point clouds.
//!
//! The tree is the full hypercube partition of the union of both clouds down
//! to a depth `H` at which every distinct point has its own cell. All points
//! sit at depth `H`; an edge from level `i - 1` to level `i` has length
//! `beta * sqrt(d) / 2^i`, the diameter of a level-`i` cell, with `beta` the
//! side of the root cube.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::Serialize;

use super::assignment::{optimal_assignment, AssignmentProblem};
use super::tw::tree_wasserstein;
use crate::build::{expand_hypercube, Hypercube};
use crate::measures::check_points;
use crate::tree::{NodeMeasure, RootedTree, TreeBuilder};
use crate::{Error, Point, Result};

/// Deepest partition level tried before giving up.
pub const MAX_SEPARATION_DEPTH: usize = 40;

/// Matching diagnostics at one level of the partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelCounts {
    pub level: usize,
    /// `n - q_i`: points of the first cloud left unmatched when pairs may
    /// only form inside a level-`i` cell.
    pub unmatched: usize,
    /// Half of `sum_e |A(subtree(v_e)) - B(subtree(v_e))|` over the edges
    /// entering level `i`, in point counts.
    pub half_edge_sum: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub dim: usize,
    pub w2: f64,
    pub tw_h: f64,
    pub beta: f64,
    /// Depth `H` actually used.
    pub depth: usize,
    pub rhs: f64,
    pub holds: bool,
    pub levels: Vec<LevelCounts>,
}

impl BoundReport {
    /// True when every level satisfies `unmatched == half_edge_sum`.
    pub fn level_identity_holds(&self) -> bool {
        self.levels.iter().all(|l| l.unmatched == l.half_edge_sum)
    }
}

/// Draws the root cube from `rng` and checks the bound at depth at least `h`.
pub fn check_w2_bound<R: Rng + ?Sized>(
    a: &[Point],
    b: &[Point],
    h: usize,
    rng: &mut R,
) -> Result<BoundReport> {
    check_clouds(a, b)?;
    let union: Vec<Point> = a.iter().chain(b).cloned().collect();
    let cube = expand_hypercube(&union, rng)?;
    check_w2_bound_in(a, b, h, &cube)
}

/// As [`check_w2_bound`] with a given root cube.
pub fn check_w2_bound_in(a: &[Point], b: &[Point], h: usize, cube: &Hypercube) -> Result<BoundReport> {
    let dim = check_clouds(a, b)?;
    if h == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    if cube.dim() != dim {
        return Err(Error::invalid("root cube dimension does not match the clouds"));
    }
    let union: Vec<Point> = a.iter().chain(b).cloned().collect();
    if let Some(i) = union.iter().position(|p| !cube.contains(p)) {
        return Err(Error::invalid(format!("point {i} lies outside the root cube")));
    }
    let n = a.len();
    let sep = separation_depth(&union, cube)?;
    let depth = h.max(sep);
    let paths: Vec<Vec<Vec<u64>>> = union.iter().map(|p| cell_path(p, cube, depth)).collect();

    let beta = cube.side;
    let diameter = |level: usize| beta * (dim as f64).sqrt() / 2f64.powi(level as i32);
    let grid = GridTree::new(&paths, depth, diameter);

    let mut count_a = vec![0.0; grid.tree.len()];
    let mut count_b = vec![0.0; grid.tree.len()];
    for (i, &leaf) in grid.leaf_of.iter().enumerate() {
        if i < n {
            count_a[leaf] += 1.0;
        } else {
            count_b[leaf] += 1.0;
        }
    }
    let sub_a = grid.tree.subtree_masses(&count_a);
    let sub_b = grid.tree.subtree_masses(&count_b);

    let mut levels = Vec::with_capacity(depth);
    for level in 1..=depth {
        let mut cells: BTreeMap<&[u64], (usize, usize)> = BTreeMap::new();
        for (i, path) in paths.iter().enumerate() {
            let e = cells.entry(&path[level - 1]).or_default();
            if i < n {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        let matched: usize = cells.values().map(|&(x, y)| x.min(y)).sum();
        let edge_sum: f64 = grid.levels[level]
            .iter()
            .map(|&v| (sub_a[v] - sub_b[v]).abs())
            .sum();
        levels.push(LevelCounts {
            level,
            unmatched: n - matched,
            half_edge_sum: (edge_sum as usize) / 2,
        });
    }

    let weights = vec![1.0; n];
    let mu = NodeMeasure::from_weighted_nodes(&grid.tree, &grid.leaf_of[..n], &weights)?;
    let nu = NodeMeasure::from_weighted_nodes(&grid.tree, &grid.leaf_of[n..], &weights)?;
    let tw_h = tree_wasserstein(&grid.tree, &mu, &nu)?;
    let w2 = optimal_assignment(&AssignmentProblem::w2(a.to_vec(), b.to_vec())?)?.value;
    let rhs = tw_h / 2.0 + diameter(depth);
    Ok(BoundReport {
        n,
        dim,
        w2,
        tw_h,
        beta,
        depth,
        rhs,
        holds: w2 <= rhs + 1e-12,
        levels,
    })
}

fn check_clouds(a: &[Point], b: &[Point]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Cardinality {
            left: a.len(),
            right: b.len(),
        });
    }
    let da = check_points(a)?;
    let db = check_points(b)?;
    if da != db {
        return Err(Error::invalid(format!("clouds have dimensions {da} and {db}")));
    }
    Ok(da)
}

/// Integer cell coordinates of `p` at levels `1..=depth`, obtained by the
/// same halving rule as the partition-tree builder.
fn cell_path(p: &[f64], cube: &Hypercube, depth: usize) -> Vec<Vec<u64>> {
    let mut min = cube.min_corner.clone();
    let mut side = cube.side;
    let mut idx = vec![0u64; p.len()];
    let mut path = Vec::with_capacity(depth);
    for _ in 0..depth {
        let half = 0.5 * side;
        for k in 0..p.len() {
            let upper = p[k] >= min[k] + half;
            idx[k] = idx[k] << 1 | u64::from(upper);
            if upper {
                min[k] += half;
            }
        }
        side = half;
        path.push(idx.clone());
    }
    path
}

/// Smallest level at which all distinct points lie in distinct cells.
fn separation_depth(points: &[Point], cube: &Hypercube) -> Result<usize> {
    let distinct: HashSet<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    let paths: Vec<Vec<Vec<u64>>> = points
        .iter()
        .map(|p| cell_path(p, cube, MAX_SEPARATION_DEPTH))
        .collect();
    for level in 1..=MAX_SEPARATION_DEPTH {
        let cells: HashSet<&Vec<u64>> = paths.iter().map(|path| &path[level - 1]).collect();
        if cells.len() == distinct.len() {
            return Ok(level);
        }
    }
    Err(Error::DepthCap(MAX_SEPARATION_DEPTH))
}

/// Occupied cells of every level as a tree, with all points at the bottom.
struct GridTree {
    tree: RootedTree,
    /// Nodes of each level, level 0 being the root.
    levels: Vec<Vec<usize>>,
    leaf_of: Vec<usize>,
}

impl GridTree {
    fn new(paths: &[Vec<Vec<u64>>], depth: usize, diameter: impl Fn(usize) -> f64) -> Self {
        let mut builder = TreeBuilder::new(None);
        let mut levels = vec![vec![builder.root()]];
        let mut node_of: Vec<usize> = vec![builder.root(); paths.len()];
        for level in 1..=depth {
            let mut cells: BTreeMap<(usize, &[u64]), usize> = BTreeMap::new();
            let mut this_level = Vec::new();
            for (i, path) in paths.iter().enumerate() {
                let parent = node_of[i];
                let v = *cells.entry((parent, &path[level - 1])).or_insert_with(|| {
                    let v = builder.add_child(parent, diameter(level), None);
                    this_level.push(v);
                    v
                });
                node_of[i] = v;
            }
            levels.push(this_level);
        }
        Self {
            tree: builder.finish(),
            levels,
            leaf_of: node_of,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn cloud(rng: &mut crate::rng::StreamRng, n: usize, d: usize) -> Vec<Point> {
        (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn identical_clouds() {
        let mut rng = seeded(1);
        let a = cloud(&mut rng, 10, 2);
        let r = check_w2_bound(&a, &a, 3, &mut rng).unwrap();
        assert_eq!(r.w2, 0.0);
        assert_eq!(r.tw_h, 0.0);
        assert!(r.rhs > 0.0 && r.holds);
        assert!(r.levels.iter().all(|l| l.unmatched == 0));
    }

    #[test]
    fn single_points_in_a_unit_cube() {
        let cube = Hypercube::new(vec![0.0], 1.0).unwrap();
        let r = check_w2_bound_in(&[vec![0.1]], &[vec![0.9]], 1, &cube).unwrap();
        assert_eq!(r.depth, 1);
        assert_eq!(r.levels, vec![LevelCounts { level: 1, unmatched: 1, half_edge_sum: 1 }]);
        // two edges of length 1/2 separate the points
        assert_eq!(r.tw_h, 1.0);
        assert_eq!(r.rhs, 1.0);
        assert!((r.w2 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn depth_grows_until_separation() {
        let cube = Hypercube::new(vec![0.0], 1.0).unwrap();
        let r = check_w2_bound_in(&[vec![0.1]], &[vec![0.2]], 1, &cube).unwrap();
        assert_eq!(r.depth, 3);
        assert_eq!(r.levels.len(), 3);
    }

    #[test]
    fn random_instances_hold() {
        let mut rng = seeded(5);
        for _ in 0..100 {
            let n = rng.random_range(1..=30);
            let d = rng.random_range(1..=3);
            let h = rng.random_range(1..=8);
            let a = cloud(&mut rng, n, d);
            let b = cloud(&mut rng, n, d);
            let r = check_w2_bound(&a, &b, h, &mut rng).unwrap();
            assert!(r.level_identity_holds(), "{r:?}");
            assert!(r.depth >= h);
        }
    }

    #[test]
    fn unequal_sizes_rejected() {
        let mut rng = seeded(0);
        assert!(check_w2_bound(&[vec![0.0]], &[vec![0.0], vec![1.0]], 2, &mut rng).is_err());
    }
}
