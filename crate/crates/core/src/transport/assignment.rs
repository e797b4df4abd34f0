//! Optimal assignment between equal-size point clouds (Hungarian method).

use crate::measures::check_points;
use crate::{Error, Point, Result};

/// Largest cloud size accepted by [`optimal_assignment`].
pub const MAX_ASSIGNMENT_SIZE: usize = 500;

/// Two point clouds of equal cardinality and a cost exponent `p`; the cost
/// of matching `x` to `z` is `||x - z||^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub left: Vec<Point>,
    pub right: Vec<Point>,
    pub exponent: f64,
}

impl AssignmentProblem {
    pub fn new(left: Vec<Point>, right: Vec<Point>, exponent: f64) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::Cardinality {
                left: left.len(),
                right: right.len(),
            });
        }
        let dl = check_points(&left)?;
        let dr = check_points(&right)?;
        if dl != dr {
            return Err(Error::invalid(format!("clouds have dimensions {dl} and {dr}")));
        }
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(Error::invalid("cost exponent must be finite and at least 1"));
        }
        Ok(Self {
            left,
            right,
            exponent,
        })
    }

    /// The W2 problem: squared Euclidean costs.
    pub fn w2(left: Vec<Point>, right: Vec<Point>) -> Result<Self> {
        Self::new(left, right, 2.0)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        let sq: f64 = self.left[i]
            .iter()
            .zip(&self.right[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if self.exponent == 2.0 {
            sq
        } else {
            sq.sqrt().powf(self.exponent)
        }
    }
}

/// Optimal value and permutation (`left[i]` is matched to `right[perm[i]]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(mean_i ||x_i - z_perm(i)||^p)^(1/p)` at the optimum.
    pub value: f64,
    /// The minimal mean cost itself.
    pub mean_cost: f64,
    pub permutation: Vec<usize>,
}

/// Exact optimal assignment for clouds of at most 500 points.
pub fn optimal_assignment(problem: &AssignmentProblem) -> Result<Assignment> {
    let n = problem.len();
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::SizeLimit {
            size: n,
            limit: MAX_ASSIGNMENT_SIZE,
        });
    }
    let costs: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| problem.cost(i, j))
        .collect();
    let permutation = hungarian(n, &costs);
    let total: f64 = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i * n + j])
        .sum();
    let mean_cost = total / n as f64;
    Ok(Assignment {
        value: mean_cost.powf(1.0 / problem.exponent),
        mean_cost,
        permutation,
    })
}

/// Minimum-cost perfect matching on a dense `n x n` row-major matrix;
/// returns the column assigned to each row. Shortest augmenting paths with
/// potentials, O(n^3).
pub fn hungarian(n: usize, costs: &[f64]) -> Vec<usize> {
    assert_eq!(costs.len(), n * n, "square cost matrix expected");
    // 1-based rows/columns; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    perm
}
