//! How well TSW nearest neighbors agree with exact W2 nearest neighbors.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::assignment::{optimal_assignment, AssignmentProblem};
use super::tw::{average_slices, pairwise_slice_tw};
use crate::build::{sample_ensemble, union_points, BuildConfig, TreeKind};
use crate::measures::DiscreteMeasure;
use crate::{Error, Point, Result};

/// Mean W2 rank of the TSW nearest neighbor for each slice count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    pub slice_counts: Vec<usize>,
    pub mean_rank: Vec<f64>,
    /// `ranks[k][q]`: rank for query `q` with `slice_counts[k]` slices.
    pub ranks: Vec<Vec<usize>>,
}

/// Pairwise W2 (root-mean-square optimal matching) between equal-size clouds.
pub fn pairwise_w2(clouds: &[Vec<Point>]) -> Result<DMatrix<f64>> {
    let n = clouds.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| {
            let p = AssignmentProblem::w2(clouds[i].clone(), clouds[j].clone())?;
            Ok(optimal_assignment(&p)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// For each query `q`, the nearest other item under `approx` (ties to the
/// lowest index) and its rank under `exact`: one plus the number of other
/// items strictly closer to `q` in `exact`.
pub fn nn_ranks(approx: &DMatrix<f64>, exact: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = approx.nrows();
    if n < 2 || approx.shape() != (n, n) || exact.shape() != (n, n) {
        return Err(Error::invalid("need two square matrices over at least two items"));
    }
    Ok((0..n)
        .map(|q| {
            let nn = (0..n)
                .filter(|&p| p != q)
                .fold(None, |best: Option<usize>, p| match best {
                    Some(b) if approx[(q, b)] <= approx[(q, p)] => Some(b),
                    _ => Some(p),
                })
                .expect("at least one other item");
            let target = exact[(q, nn)];
            1 + (0..n).filter(|&o| o != q && exact[(q, o)] < target).count()
        })
        .collect())
}

/// Builds one ensemble with `max(slice_counts)` slices over the union of all
/// supports; TSW at `k` slices averages its first `k` trees. Every cloud is
/// used as a query against all others.
pub fn nn_rank_experiment(
    clouds: &[Vec<Point>],
    slice_counts: &[usize],
    cfg: &BuildConfig,
    kind: TreeKind,
    master_seed: u64,
) -> Result<RankTable> {
    if clouds.len() < 2 {
        return Err(Error::invalid("the rank experiment needs at least two clouds"));
    }
    let max_slices = *slice_counts
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("no slice counts given"))?;
    if slice_counts.contains(&0) {
        return Err(Error::invalid("slice counts must be positive"));
    }
    let measures = clouds
        .iter()
        .map(|c| DiscreteMeasure::uniform(c.clone()))
        .collect::<Result<Vec<_>>>()?;
    let points = union_points(&measures);
    let ens = sample_ensemble(&points, max_slices, cfg, kind, master_seed)?;
    let indexed = ens.index_measures(&measures)?;
    let per_slice = pairwise_slice_tw(&ens, &indexed)?;
    let w2 = pairwise_w2(clouds)?;

    let mut ranks = Vec::with_capacity(slice_counts.len());
    let mut mean_rank = Vec::with_capacity(slice_counts.len());
    for &k in slice_counts {
        let tsw = average_slices(&per_slice, k)?;
        let r = nn_ranks(&tsw, &w2)?;
        mean_rank.push(r.iter().sum::<usize>() as f64 / r.len() as f64);
        ranks.push(r);
    }
    Ok(RankTable {
        slice_counts: slice_counts.to_vec(),
        mean_rank,
        ranks,
    })
}
