//! The exponential TSW kernel, Gram matrices, bandwidth selection and
//! definiteness checks.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::{Error, Result};

/// Largest matrix accepted by the eigenvalue checks.
pub const MAX_EIGEN_SIZE: usize = 2000;
/// Allowed asymmetry of a distance matrix.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Largest `c^T D c` over unit zero-sum `c` accepted as negative definite.
pub const ND_QUADRATIC_TOL: f64 = 1e-9;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_EIGEN_TOL: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Distance,
    Kernel,
}

/// A symmetric matrix of pairwise distances or kernel values.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    /// Kernel bandwidth `t`; `None` for distance matrices.
    pub bandwidth: Option<f64>,
    pub kind: MatrixKind,
}

impl GramMatrix {
    /// Wraps a distance matrix: square, symmetric within 1e-9, zero
    /// diagonal, finite nonnegative entries.
    pub fn distance(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::invalid(format!(
                "distance matrix must be square and non-empty, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let d = entries[(i, j)];
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::invalid(format!("entry ({i}, {j}) = {d} is not a distance")));
                }
                if (d - entries[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            entries,
            bandwidth: None,
            kind: MatrixKind::Distance,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Strict upper triangle, row by row.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[(i, j)])
            .collect()
    }
}

/// `exp(-t * tsw)`.
pub fn tsw_kernel(tsw: f64, t: f64) -> Result<f64> {
    check_bandwidth(t)?;
    if !(tsw >= 0.0) {
        return Err(Error::invalid(format!("distance {tsw} is negative")));
    }
    Ok((-t * tsw).exp())
}

fn check_bandwidth(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive and finite, got {t}")));
    }
    Ok(())
}

/// `t = 1 / q_s` with `q_s` the nearest-rank `s`% quantile (1-based index
/// `ceil(s / 100 * n)` of the sorted distances); `t = 1` without `s`.
pub fn bandwidth_from_quantile(distances: &[f64], percent: Option<f64>) -> Result<f64> {
    let Some(s) = percent else {
        return Ok(1.0);
    };
    if !(s > 0.0 && s <= 100.0) {
        return Err(Error::invalid(format!("quantile must lie in (0, 100], got {s}")));
    }
    if distances.is_empty() {
        return Err(Error::invalid("no distances to take a quantile of"));
    }
    if distances.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::invalid("distances must be finite and nonnegative"));
    }
    if distances.iter().all(|&d| d == 0.0) {
        return Err(Error::invalid("all distances are zero; bandwidth is undefined"));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((s / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    let q = sorted[rank - 1];
    if q == 0.0 {
        return Err(Error::invalid(format!(
            "the {s}% quantile of the distances is zero; bandwidth is undefined"
        )));
    }
    Ok(1.0 / q)
}

/// Entrywise `exp(-t * d)`.
pub fn gram(dist: &GramMatrix, t: f64) -> Result<GramMatrix> {
    check_bandwidth(t)?;
    if dist.kind != MatrixKind::Distance {
        return Err(Error::invalid("gram expects a distance matrix"));
    }
    Ok(GramMatrix {
        entries: dist.entries.map(|d| (-t * d).exp()),
        bandwidth: Some(t),
        kind: MatrixKind::Kernel,
    })
}

/// `k^i`: the kernel at bandwidth `t` from its value at `t / i`.
pub fn kernel_power(k: f64, i: u32) -> Result<f64> {
    if i == 0 {
        return Err(Error::invalid("power must be at least 1"));
    }
    Ok(k.powi(i as i32))
}

/// Entrywise power of a kernel matrix; the bandwidth is multiplied by `i`.
pub fn gram_power(g: &GramMatrix, i: u32) -> Result<GramMatrix> {
    if g.kind != MatrixKind::Kernel {
        return Err(Error::invalid("gram_power expects a kernel matrix"));
    }
    kernel_power(1.0, i)?;
    Ok(GramMatrix {
        entries: g.entries.map(|k| k.powi(i as i32)),
        bandwidth: g.bandwidth.map(|t| t * f64::from(i)),
        kind: MatrixKind::Kernel,
    })
}

/// Smallest eigenvalue of a symmetric matrix (at most 2000 x 2000).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n != m.ncols() || n == 0 {
        return Err(Error::invalid("eigenvalues need a non-empty square matrix"));
    }
    if n > MAX_EIGEN_SIZE {
        return Err(Error::SizeLimit {
            size: n,
            limit: MAX_EIGEN_SIZE,
        });
    }
    let sym = (m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.min())
}

/// Adds `lambda` to the diagonal; with `None`, uses
/// `max(0, -min eigenvalue) + 1e-10`. Returns the matrix and `lambda`.
pub fn add_diagonal(g: &GramMatrix, lambda: Option<f64>) -> Result<(GramMatrix, f64)> {
    let lambda = match lambda {
        Some(l) if l >= 0.0 && l.is_finite() => l,
        Some(l) => return Err(Error::invalid(format!("diagonal shift {l} must be nonnegative"))),
        None => (-min_eigenvalue(&g.entries)?).max(0.0) + 1e-10,
    };
    let mut out = g.clone();
    for i in 0..out.len() {
        out.entries[(i, i)] += lambda;
    }
    Ok((out, lambda))
}

/// Outcome of [`check_negative_definite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdReport {
    /// Largest `c^T D c` over the sampled unit zero-sum vectors.
    pub max_quadratic_form: f64,
    /// The vector attaining it.
    pub worst_vector: Vec<f64>,
    /// Smallest eigenvalue of `-J D J / 2`, `J` the centering projector.
    pub min_centered_eigenvalue: f64,
    pub passed: bool,
}

/// Tests `sum_ij c_i c_j D_ij <= 0` on zero-sum `c`: by sampling `trials`
/// Gaussian vectors, mean-subtracted and scaled to unit length, and exactly
/// through the spectrum of `-J D J / 2`.
pub fn check_negative_definite<R: Rng + ?Sized>(
    d: &DMatrix<f64>,
    trials: usize,
    rng: &mut R,
) -> Result<NdReport> {
    let n = d.nrows();
    if n == 0 || d.ncols() != n {
        return Err(Error::invalid("negative definiteness needs a square matrix"));
    }
    let mut max_q = f64::NEG_INFINITY;
    let mut worst = vec![0.0; n];
    for _ in 0..trials {
        let Some(c) = zero_sum_vector(n, rng) else {
            break;
        };
        let q = (c.transpose() * d * &c)[(0, 0)];
        if q > max_q {
            max_q = q;
            worst = c.iter().copied().collect();
        }
    }
    if max_q == f64::NEG_INFINITY {
        // a single point has no nonzero zero-sum vector
        max_q = 0.0;
    }
    let j = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let centered = -(&j * d * &j) * 0.5;
    let min_eig = min_eigenvalue(&centered)?;
    Ok(NdReport {
        max_quadratic_form: max_q,
        worst_vector: worst,
        min_centered_eigenvalue: min_eig,
        passed: max_q <= ND_QUADRATIC_TOL && min_eig >= PSD_EIGEN_TOL,
    })
}

fn zero_sum_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Option<DMatrix<f64>> {
    if n < 2 {
        return None;
    }
    loop {
        let mut c = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mean = c.mean();
        c.add_scalar_mut(-mean);
        let norm = c.norm();
        if norm > 0.0 {
            return Some(c / norm);
        }
    }
}

/// A symmetric zero-diagonal 3 x 3 matrix that is not negative definite:
/// the violated triangle inequality gives `c^T D c = 2` at `c = (-2, 1, 1)`.
pub fn negative_control() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 5.0, 1.0, 5.0, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn kernel_values() {
        assert_eq!(tsw_kernel(0.0, 3.0).unwrap(), 1.0);
        assert!((tsw_kernel(2f64.ln(), 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(tsw_kernel(1.0, 0.0).is_err());
        assert!(tsw_kernel(1.0, -1.0).is_err());
        let mut prev = 0.0;
        for t in [10.0, 1.0, 0.1, 0.01, 0.001] {
            let k = tsw_kernel(1.5, t).unwrap();
            assert!(k > prev && k <= 1.0);
            prev = k;
        }
    }

    #[test]
    fn quantile_bandwidth() {
        let d: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(bandwidth_from_quantile(&d, Some(50.0)).unwrap(), 0.02);
        assert_eq!(bandwidth_from_quantile(&d, Some(10.0)).unwrap(), 0.1);
        for s in [10.0, 20.0, 50.0] {
            assert_eq!(bandwidth_from_quantile(&[2.0], Some(s)).unwrap(), 0.5);
        }
        assert_eq!(bandwidth_from_quantile(&d, None).unwrap(), 1.0);
        assert!(bandwidth_from_quantile(&[0.0, 0.0], Some(50.0)).is_err());
        assert!(bandwidth_from_quantile(&[], Some(50.0)).is_err());
    }

    #[test]
    fn gram_of_zero_matrix() {
        let z = GramMatrix::distance(DMatrix::zeros(4, 4)).unwrap();
        let g = gram(&z, 2.0).unwrap();
        assert!(g.entries.iter().all(|&k| k == 1.0));
    }

    #[test]
    fn distance_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.1, 0.0]);
        assert!(GramMatrix::distance(asym).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(GramMatrix::distance(diag).is_err());
    }

    #[test]
    fn divisibility() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.5, 1.0, 0.0, 0.3, 2.5, 0.3, 0.0]);
        let d = GramMatrix::distance(d).unwrap();
        let t = 2.0;
        let direct = gram(&d, t).unwrap();
        let powered = gram_power(&gram(&d, t / 4.0).unwrap(), 4).unwrap();
        assert_eq!(powered.bandwidth, Some(t));
        assert!((direct.entries - powered.entries).amax() <= 1e-12);
        assert_eq!(kernel_power(0.3, 1).unwrap(), 0.3);
        assert!((kernel_power((-1f64).exp(), 2).unwrap() - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn nd_on_zero_and_l1() {
        let mut rng = seeded(4);
        let r = check_negative_definite(&DMatrix::zeros(5, 5), 50, &mut rng).unwrap();
        assert!(r.passed);
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let l1 = DMatrix::from_fn(12, 12, |i, j| {
            pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).abs()).sum()
        });
        assert!(check_negative_definite(&l1, 100, &mut rng).unwrap().passed);
    }

    #[test]
    fn negative_control_fails() {
        let d = negative_control();
        let c = DMatrix::from_column_slice(3, 1, &[-2.0, 1.0, 1.0]);
        assert_eq!((c.transpose() * &d * &c)[(0, 0)], 2.0);
        let r = check_negative_definite(&d, 100, &mut seeded(1)).unwrap();
        assert!(!r.passed);
        assert!(r.min_centered_eigenvalue < 0.0);
    }

    #[test]
    fn diagonal_shift() {
        let g = GramMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            bandwidth: Some(1.0),
            kind: MatrixKind::Kernel,
        };
        let (shifted, lambda) = add_diagonal(&g, None).unwrap();
        assert!((lambda - (1.0 + 1e-10)).abs() < 1e-12);
        assert!(min_eigenvalue(&shifted.entries).unwrap() > 0.0);
    }
}
