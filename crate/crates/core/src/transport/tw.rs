//! Closed-form tree-Wasserstein and its slice average.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::build::TreeEnsemble;
use crate::measures::IndexedMeasure;
use crate::tree::{NodeMeasure, RootedTree};
use crate::{Error, Result};

/// `sum_e w_e |mu(subtree(v_e)) - nu(subtree(v_e))|`, children before parents.
pub fn tree_wasserstein(tree: &RootedTree, mu: &NodeMeasure, nu: &NodeMeasure) -> Result<f64> {
    if !std::ptr::eq(mu.tree(), tree) && mu.tree() != tree
        || !std::ptr::eq(nu.tree(), tree) && nu.tree() != tree
    {
        return Err(Error::TreeMismatch);
    }
    Ok(tw_from_subtree_masses(
        tree,
        &mu.subtree_masses(),
        &nu.subtree_masses(),
    ))
}

/// The edge sum for precomputed subtree masses.
pub fn tw_from_subtree_masses(tree: &RootedTree, a: &[f64], b: &[f64]) -> f64 {
    let root = tree.root();
    let mut total = 0.0;
    for &v in tree.bottom_up() {
        if v != root {
            total += tree.edge_weight(v) * (a[v] - b[v]).abs();
        }
    }
    total
}

/// Per-node mass of an indexed measure pushed through one slice's map.
fn node_mass(
    tree: &RootedTree,
    map: &[usize],
    measure: &IndexedMeasure,
    slice: usize,
) -> Result<Vec<f64>> {
    check_indexed(measure)?;
    let mut mass = vec![0.0; tree.len()];
    for (&p, &w) in measure.indices.iter().zip(&measure.weights) {
        let v = *map
            .get(p)
            .filter(|&&v| v < tree.len())
            .ok_or(Error::UnmappedPoint { point: p, slice })?;
        mass[v] += w;
    }
    Ok(mass)
}

fn check_indexed(m: &IndexedMeasure) -> Result<()> {
    if m.indices.is_empty() || m.indices.len() != m.weights.len() {
        return Err(Error::Cardinality {
            left: m.indices.len(),
            right: m.weights.len(),
        });
    }
    if m.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("measure weights must be finite and nonnegative"));
    }
    let total: f64 = m.weights.iter().sum();
    if (total - 1.0).abs() > crate::measures::SIMPLEX_TOL {
        return Err(Error::invalid(format!("measure weights sum to {total}, not 1")));
    }
    Ok(())
}

/// TW on slice `i` of an ensemble.
pub fn slice_tw(
    ens: &TreeEnsemble,
    slice: usize,
    mu: &IndexedMeasure,
    nu: &IndexedMeasure,
) -> Result<f64> {
    let tree = &ens.trees[slice];
    let map = &ens.point_to_node[slice];
    let a = tree.subtree_masses(&node_mass(tree, map, mu, slice)?);
    let b = tree.subtree_masses(&node_mass(tree, map, nu, slice)?);
    Ok(tw_from_subtree_masses(tree, &a, &b))
}

/// Average of TW over the ensemble's slices.
pub fn tree_sliced_wasserstein(
    ens: &TreeEnsemble,
    mu: &IndexedMeasure,
    nu: &IndexedMeasure,
) -> Result<f64> {
    check_ensemble(ens)?;
    let mut total = 0.0;
    for i in 0..ens.n_slices() {
        total += slice_tw(ens, i, mu, nu)?;
    }
    Ok(total / ens.n_slices() as f64)
}

fn check_ensemble(ens: &TreeEnsemble) -> Result<()> {
    if ens.trees.is_empty() || ens.trees.len() != ens.point_to_node.len() {
        return Err(Error::invalid(format!(
            "ensemble has {} trees and {} point maps",
            ens.trees.len(),
            ens.point_to_node.len()
        )));
    }
    Ok(())
}

/// A measure on one tree stored as its nonzero subtree masses, sorted by
/// node. TW between two embeddings is a weighted l1 distance.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEmbedding {
    entries: Vec<(usize, f64)>,
}

impl TreeEmbedding {
    pub fn new(tree: &RootedTree, mass: &[f64]) -> Self {
        let sub = tree.subtree_masses(mass);
        let root = tree.root();
        let entries = sub
            .into_iter()
            .enumerate()
            .filter(|&(v, m)| v != root && m != 0.0)
            .collect();
        Self { entries }
    }

    /// `sum_v w_v |a_v - b_v|` over the union of supports.
    pub fn distance(&self, other: &Self, tree: &RootedTree) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        while i < a.len() || j < b.len() {
            let (v, diff) = match (a.get(i), b.get(j)) {
                (Some(&(va, ma)), Some(&(vb, mb))) if va == vb => {
                    i += 1;
                    j += 1;
                    (va, ma - mb)
                }
                (Some(&(va, ma)), Some(&(vb, _))) if va < vb => {
                    i += 1;
                    (va, ma)
                }
                (Some(&(va, ma)), None) => {
                    i += 1;
                    (va, ma)
                }
                (_, Some(&(vb, mb))) => {
                    j += 1;
                    (vb, -mb)
                }
                (None, None) => unreachable!(),
            };
            total += tree.edge_weight(v) * diff.abs();
        }
        total
    }
}

/// Embeds every measure in every slice: `result[slice][measure]`.
pub fn embed_measures(
    ens: &TreeEnsemble,
    measures: &[IndexedMeasure],
) -> Result<Vec<Vec<TreeEmbedding>>> {
    check_ensemble(ens)?;
    (0..ens.n_slices())
        .into_par_iter()
        .map(|s| {
            let tree = &ens.trees[s];
            let map = &ens.point_to_node[s];
            measures
                .iter()
                .map(|m| Ok(TreeEmbedding::new(tree, &node_mass(tree, map, m, s)?)))
                .collect()
        })
        .collect()
}

/// Pairwise TW matrices, one per slice.
pub fn pairwise_slice_tw(
    ens: &TreeEnsemble,
    measures: &[IndexedMeasure],
) -> Result<Vec<DMatrix<f64>>> {
    let emb = embed_measures(ens, measures)?;
    let n = measures.len();
    Ok(emb
        .par_iter()
        .enumerate()
        .map(|(s, row)| {
            let tree = &ens.trees[s];
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let d = row[i].distance(&row[j], tree);
                    m[(i, j)] = d;
                    m[(j, i)] = d;
                }
            }
            m
        })
        .collect())
}

/// Averages the first `k` per-slice matrices in slice order.
pub fn average_slices(per_slice: &[DMatrix<f64>], k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > per_slice.len() {
        return Err(Error::invalid(format!(
            "cannot average {k} of {} slices",
            per_slice.len()
        )));
    }
    let mut acc = per_slice[0].clone();
    for m in &per_slice[1..k] {
        acc += m;
    }
    Ok(acc / k as f64)
}

/// Symmetric matrix of TSW distances with a zero diagonal.
pub fn pairwise_tsw(ens: &TreeEnsemble, measures: &[IndexedMeasure]) -> Result<DMatrix<f64>> {
    let per_slice = pairwise_slice_tw(ens, measures)?;
    average_slices(&per_slice, per_slice.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::{sample_ensemble, BuildConfig, TreeKind};
    use crate::tree::TreeBuilder;

    fn chain() -> RootedTree {
        let mut b = TreeBuilder::new(None);
        let a = b.add_child(0, 1.0, None);
        b.add_child(a, 2.0, None);
        b.finish()
    }

    #[test]
    fn chain_example() {
        let t = chain();
        let mu = NodeMeasure::dirac(&t, 2).unwrap();
        let nu = NodeMeasure::dirac(&t, 0).unwrap();
        assert_eq!(tree_wasserstein(&t, &mu, &nu).unwrap(), 3.0);
        assert_eq!(tree_wasserstein(&t, &mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_trees() {
        let t = chain();
        let other = t.scaled(2.0).unwrap();
        let mu = NodeMeasure::dirac(&t, 2).unwrap();
        let nu = NodeMeasure::dirac(&other, 0).unwrap();
        assert!(matches!(tree_wasserstein(&t, &mu, &nu), Err(Error::TreeMismatch)));
    }

    fn ensemble(n_slices: usize) -> TreeEnsemble {
        let pts: Vec<crate::Point> = (0..12)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()])
            .collect();
        sample_ensemble(&pts, n_slices, &BuildConfig::default(), TreeKind::Quadtree, 3).unwrap()
    }

    #[test]
    fn single_slice_equals_tree_tw() {
        let ens = ensemble(1);
        let mu = IndexedMeasure::new(vec![0, 3, 5], &[1.0, 2.0, 1.0]).unwrap();
        let nu = IndexedMeasure::uniform(vec![1, 7]).unwrap();
        let t = &ens.trees[0];
        let map = &ens.point_to_node[0];
        let nodes = |m: &IndexedMeasure| m.indices.iter().map(|&i| map[i]).collect::<Vec<_>>();
        let a = NodeMeasure::from_weighted_nodes(t, &nodes(&mu), &mu.weights).unwrap();
        let b = NodeMeasure::from_weighted_nodes(t, &nodes(&nu), &nu.weights).unwrap();
        let direct = tree_wasserstein(t, &a, &b).unwrap();
        assert_eq!(tree_sliced_wasserstein(&ens, &mu, &nu).unwrap(), direct);
    }

    #[test]
    fn copies_of_one_tree_average_to_it() {
        let mut ens = ensemble(1);
        let mu = IndexedMeasure::uniform(vec![2, 4]).unwrap();
        let nu = IndexedMeasure::uniform(vec![9]).unwrap();
        let single = tree_sliced_wasserstein(&ens, &mu, &nu).unwrap();
        ens.trees = vec![ens.trees[0].clone(); 4];
        ens.point_to_node = vec![ens.point_to_node[0].clone(); 4];
        let avg = tree_sliced_wasserstein(&ens, &mu, &nu).unwrap();
        assert!((avg - single).abs() <= 1e-15 * single.max(1.0));
    }

    #[test]
    fn unmapped_point_is_named() {
        let ens = ensemble(3);
        let mu = IndexedMeasure::uniform(vec![0, 40]).unwrap();
        let nu = IndexedMeasure::uniform(vec![1]).unwrap();
        let err = tree_sliced_wasserstein(&ens, &mu, &nu).unwrap_err();
        assert!(matches!(err, Error::UnmappedPoint { point: 40, slice: 0 }));
        assert!(err.to_string().contains("40"));
    }

    #[test]
    fn pairwise_matches_direct() {
        let ens = ensemble(5);
        let measures: Vec<IndexedMeasure> = (0..6)
            .map(|k| IndexedMeasure::new(vec![k, k + 1, (3 * k) % 12], &[1.0, 2.0, 0.5]).unwrap())
            .collect();
        let d = pairwise_tsw(&ens, &measures).unwrap();
        for i in 0..6 {
            assert_eq!(d[(i, i)], 0.0);
            for j in 0..6 {
                assert_eq!(d[(i, j)], d[(j, i)]);
                let direct = tree_sliced_wasserstein(&ens, &measures[i], &measures[j]).unwrap();
                assert!((d[(i, j)] - direct).abs() <= 1e-12);
            }
        }
    }
}
