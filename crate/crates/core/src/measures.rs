//! Discrete probability measures and persistence diagrams.

use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Tolerance on the total mass of normalized weights.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Rescales nonnegative weights so they sum to one.
pub fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::invalid(format!("weight {w} is negative or not finite")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("weights must contain at least one positive entry"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// A finitely supported probability measure on `R^d`.
///
/// Weights are normalized on construction. Duplicate supports are kept as
/// separate atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    supports: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from raw nonnegative weights (e.g. counts).
    pub fn new(supports: Vec<Point>, raw_weights: &[f64]) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::invalid("a measure needs at least one support point"));
        }
        if supports.len() != raw_weights.len() {
            return Err(Error::Cardinality {
                left: supports.len(),
                right: raw_weights.len(),
            });
        }
        check_points(&supports)?;
        let weights = normalize(raw_weights)?;
        Ok(Self { supports, weights })
    }

    /// Uniform measure over the given points (an empirical point cloud).
    pub fn uniform(supports: Vec<Point>) -> Result<Self> {
        let ones = vec![1.0; supports.len()];
        Self::new(supports, &ones)
    }

    pub fn dirac(point: Point) -> Result<Self> {
        Self::new(vec![point], &[1.0])
    }

    pub fn supports(&self) -> &[Point] {
        &self.supports
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.supports[0].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.supports.iter().zip(self.weights.iter().copied())
    }

    /// True when all weights are equal, i.e. the measure is a point cloud.
    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-15)
    }
}

/// Checks that a point set is non-empty, of consistent dimension and finite.
pub fn check_points(points: &[Point]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::invalid("point set is empty"))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::invalid("points must have dimension at least 1"));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::invalid(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
    }
    Ok(dim)
}

/// A measure whose supports are given as indices into a shared point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedMeasure {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl IndexedMeasure {
    /// Normalizes raw weights; repeated indices are allowed.
    pub fn new(indices: Vec<usize>, raw_weights: &[f64]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("an indexed measure needs at least one support"));
        }
        if indices.len() != raw_weights.len() {
            return Err(Error::Cardinality {
                left: indices.len(),
                right: raw_weights.len(),
            });
        }
        Ok(Self {
            indices,
            weights: normalize(raw_weights)?,
        })
    }

    pub fn uniform(indices: Vec<usize>) -> Result<Self> {
        let ones = vec![1.0; indices.len()];
        Self::new(indices, &ones)
    }
}

/// A (birth, death) pair.
pub type DiagramPoint = (f64, f64);

/// A multiset of finite (birth, death) pairs with `death >= birth`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    points: Vec<DiagramPoint>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<DiagramPoint>) -> Result<Self> {
        for (i, &(b, d)) in points.iter().enumerate() {
            if !b.is_finite() || !d.is_finite() {
                return Err(Error::invalid(format!(
                    "diagram point {i} ({b}, {d}) is not finite; truncate essential classes first"
                )));
            }
            if d < b {
                return Err(Error::invalid(format!(
                    "diagram point {i} has death {d} before birth {b}"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Parses the plain-text format: one whitespace-separated `birth death`
    /// pair per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected `birth death`, got {line:?}",
                    lineno + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {s:?}: {e}", lineno + 1)))
            };
            points.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::new(points)
    }

    pub fn to_text(&self) -> String {
        self.points
            .iter()
            .map(|(b, d)| format!("{b:?} {d:?}\n"))
            .collect()
    }

    pub fn points(&self) -> &[DiagramPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Orthogonal projection onto the diagonal `{(a, a)}`.
pub fn project_diagonal((birth, death): DiagramPoint) -> DiagramPoint {
    let mid = 0.5 * (birth + death);
    (mid, mid)
}

/// Turns two diagrams into two uniform measures of equal cardinality: each
/// diagram is completed with the diagonal projections of the other one.
pub fn augment_pair(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::invalid("cannot augment two empty diagrams"));
    }
    let as_point = |(x, y): DiagramPoint| vec![x, y];
    let first: Vec<Point> = a
        .points
        .iter()
        .copied()
        .chain(b.points.iter().copied().map(project_diagonal))
        .map(as_point)
        .collect();
    let second: Vec<Point> = b
        .points
        .iter()
        .copied()
        .chain(a.points.iter().copied().map(project_diagonal))
        .map(as_point)
        .collect();
    Ok((DiscreteMeasure::uniform(first)?, DiscreteMeasure::uniform(second)?))
}
