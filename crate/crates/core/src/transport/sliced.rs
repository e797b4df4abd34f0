//! The sliced-Wasserstein baseline: 1-D W1 between random projections.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::measures::check_points;
use crate::tree::{RootedTree, TreeBuilder};
use crate::{Error, Point, Result};

/// W1 between two uniform empirical measures on the line with the same
/// number of atoms: mean absolute difference of the sorted samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Cardinality {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("empty samples"));
    }
    let sorted = |x: &[f64]| {
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

/// A uniformly random unit vector (normalized Gaussian).
pub fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn project(points: &[Point], dir: &[f64]) -> Vec<f64> {
    points
        .iter()
        .map(|p| p.iter().zip(dir).map(|(x, u)| x * u).sum())
        .collect()
}

/// Average over `n_dirs` random directions of the 1-D W1 between the
/// projected clouds.
pub fn sliced_wasserstein_1d<R: Rng + ?Sized>(
    a: &[Point],
    b: &[Point],
    n_dirs: usize,
    rng: &mut R,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Cardinality {
            left: a.len(),
            right: b.len(),
        });
    }
    if n_dirs == 0 {
        return Err(Error::invalid("at least one direction is needed"));
    }
    let da = check_points(a)?;
    let db = check_points(b)?;
    if da != db {
        return Err(Error::invalid(format!("clouds have dimensions {da} and {db}")));
    }
    let mut total = 0.0;
    for _ in 0..n_dirs {
        let dir = random_direction(da, rng);
        total += wasserstein_1d(&project(a, &dir), &project(b, &dir))?;
    }
    Ok(total / n_dirs as f64)
}

/// Chain tree through the sorted values of `a` and `b`: the root is the
/// smallest value, each node hangs off its predecessor with the gap as
/// weight. Returns the tree and the node of every value of `a` and `b`.
pub fn chain_tree(a: &[f64], b: &[f64]) -> Result<(RootedTree, Vec<usize>, Vec<usize>)> {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    if all.is_empty() || all.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("chain values must be finite and non-empty"));
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&i, &j| all[i].total_cmp(&all[j]).then(i.cmp(&j)));

    let mut builder = TreeBuilder::new(Some(vec![all[order[0]]]));
    let mut node_of = vec![0; all.len()];
    let mut prev = builder.root();
    for w in order.windows(2) {
        let gap = all[w[1]] - all[w[0]];
        prev = builder.add_child(prev, gap, Some(vec![all[w[1]]]));
        node_of[w[1]] = prev;
    }
    let nodes_b = node_of.split_off(a.len());
    Ok((builder.finish(), node_of, nodes_b))
}
