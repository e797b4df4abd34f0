//! Synthetic data: linked-twist-map orbits and random measures.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measures::DiscreteMeasure;
use crate::rng::{derive_seed, named_rng, seeded};
use crate::{Error, Point, Result};

/// Fractional part `x - floor(x)`, in `[0, 1)` also for negative `x`.
fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    // x - floor(x) rounds to 1.0 for tiny negative x
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// `n` points of the orbit of the linked twist map with parameter `t`
/// started at `(a0, b0)` (included as the first point):
/// `a' = a + t b (1 - b) mod 1`, then `b' = b + t a' (1 - a') mod 1`.
pub fn generate_orbit(t: f64, a0: f64, b0: f64, n: usize) -> Result<Vec<Point>> {
    if !(0.0..=1.0).contains(&a0) || !(0.0..=1.0).contains(&b0) {
        return Err(Error::invalid(format!("initial position ({a0}, {b0}) outside [0, 1]^2")));
    }
    if n == 0 {
        return Err(Error::invalid("an orbit needs at least one point"));
    }
    if !t.is_finite() {
        return Err(Error::invalid("orbit parameter must be finite"));
    }
    let (mut a, mut b) = (a0, b0);
    let mut out = Vec::with_capacity(n);
    out.push(vec![a, b]);
    for _ in 1..n {
        a = frac(a + t * b * (1.0 - b));
        b = frac(b + t * a * (1.0 - a));
        out.push(vec![a, b]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub class_params: Vec<f64>,
    pub orbits_per_class: usize,
    pub points_per_orbit: usize,
    pub seed: u64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            class_params: vec![2.5, 3.5, 4.0, 4.1, 4.3],
            orbits_per_class: 50,
            points_per_orbit: 200,
            seed: 0,
        }
    }
}

impl OrbitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_params.is_empty() {
            return Err(Error::invalid("at least one class parameter is needed"));
        }
        if let Some(t) = self.class_params.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::invalid(format!("class parameter {t} must be positive")));
        }
        if self.orbits_per_class == 0 || self.points_per_orbit == 0 {
            return Err(Error::invalid("orbit and point counts must be at least 1"));
        }
        Ok(())
    }
}

/// A point cloud with its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCloud {
    pub label: usize,
    pub points: Vec<Point>,
}

/// `orbits_per_class` orbits per class parameter, class by class, each from
/// a uniform random start. Orbit `k` draws its start from its own stream, so
/// orbits can be generated in parallel.
pub fn generate_orbit_dataset(cfg: &OrbitConfig) -> Result<Vec<LabeledCloud>> {
    cfg.validate()?;
    let base = derive_seed(cfg.seed, crate::rng::stream_id("orbits"));
    let jobs: Vec<(usize, f64)> = cfg
        .class_params
        .iter()
        .enumerate()
        .flat_map(|(label, &t)| std::iter::repeat_n((label, t), cfg.orbits_per_class))
        .collect();
    jobs.par_iter()
        .enumerate()
        .map(|(k, &(label, t))| {
            let mut rng = seeded(derive_seed(base, k as u64));
            let a0 = rng.random::<f64>();
            let b0 = rng.random::<f64>();
            Ok(LabeledCloud {
                label,
                points: generate_orbit(t, a0, b0, cfg.points_per_orbit)?,
            })
        })
        .collect()
}

/// Supports uniform on `[0, 1]^d`, weights from a flat Dirichlet draw.
pub fn random_measure<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    if d == 0 || n == 0 {
        return Err(Error::invalid("dimension and support size must be at least 1"));
    }
    let supports: Vec<Point> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let weights = dirichlet_weights(n, rng);
    DiscreteMeasure::new(supports, &weights)
}

/// Flat Dirichlet sample via normalized exponentials.
pub fn dirichlet_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.iter().map(|x| x / total).collect();
        }
    }
}

/// Seeded uniform subsample of `k` points of a cloud, in original order.
pub fn subsample_cloud(points: &[Point], k: usize, seed: u64) -> Vec<Point> {
    if k >= points.len() {
        return points.to_vec();
    }
    let mut rng = named_rng(seed, "subsample");
    let mut idx = rand::seq::index::sample(&mut rng, points.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_by_hand() {
        let orbit = generate_orbit(2.5, 0.5, 0.5, 2).unwrap();
        assert_eq!(orbit, vec![vec![0.5, 0.5], vec![0.125, 0.7734375]]);
    }

    #[test]
    fn origin_is_fixed() {
        for t in [2.5, 4.3, 7.0] {
            let orbit = generate_orbit(t, 0.0, 0.0, 20).unwrap();
            assert!(orbit.iter().all(|p| p == &vec![0.0, 0.0]));
        }
    }

    #[test]
    fn frac_handles_negatives() {
        assert_eq!(frac(-0.25), 0.75);
        assert_eq!(frac(1.5), 0.5);
        assert_eq!(frac(-1e-20), 0.0);
    }

    #[test]
    fn default_dataset() {
        let cfg = OrbitConfig::default();
        assert_eq!(cfg.class_params, vec![2.5, 3.5, 4.0, 4.1, 4.3]);
        let data = generate_orbit_dataset(&cfg).unwrap();
        assert_eq!(data.len(), 250);
        assert!(data.iter().all(|c| c.points.len() == 200));
        assert!(data
            .iter()
            .flat_map(|c| &c.points)
            .flatten()
            .all(|x| (0.0..1.0).contains(x)));
        assert_eq!(data, generate_orbit_dataset(&cfg).unwrap());
        assert_eq!(data[49].label, 0);
        assert_eq!(data[50].label, 1);
    }

    #[test]
    fn random_measures() {
        let m = random_measure(3, 1, &mut seeded(1)).unwrap();
        assert_eq!(m.weights(), &[1.0]);
        let m = random_measure(2, 15, &mut seeded(2)).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m, random_measure(2, 15, &mut seeded(2)).unwrap());
    }

    #[test]
    fn subsampling() {
        let pts: Vec<Point> = (0..10).map(|i| vec![i as f64]).collect();
        let s = subsample_cloud(&pts, 4, 3);
        assert_eq!(s.len(), 4);
        assert!(s.windows(2).all(|w| w[0][0] < w[1][0]));
        assert_eq!(s, subsample_cloud(&pts, 4, 3));
    }
}
