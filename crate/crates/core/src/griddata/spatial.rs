use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::rng::rng_from;
use crate::{Error, Result};

/// Exponential distance correlation `rho_ij = exp(-d_ij / d_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCorrelation {
    /// km
    pub d_scale: f64,
    /// Pairwise distances in km.
    pub distances: DMatrix<f64>,
}

impl SpatialCorrelation {
    pub fn new(d_scale: f64, distances: DMatrix<f64>) -> Result<Self> {
        if !(d_scale > 0.0) {
            return Err(Error::InvalidParameter("d_scale must be > 0".into()));
        }
        let n = distances.nrows();
        if distances.ncols() != n {
            return Err(Error::DimensionMismatch(
                "distance matrix must be square".into(),
            ));
        }
        for i in 0..n {
            if distances[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "distance d[{i}][{i}] must be 0"
                )));
            }
            for j in 0..i {
                let d = distances[(i, j)];
                if d != distances[(j, i)] || !(d >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "distances must be symmetric and >= 0 at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { d_scale, distances })
    }

    /// Nodes placed uniformly in a disc of diameter `span` km, so every
    /// pairwise distance lies in `(0, span]` and the kernel stays positive
    /// definite. Node indices follow the east-west order of the sites.
    pub fn random_sites(n: usize, d_scale: f64, span: f64, seed: u64) -> Result<Self> {
        if !(span > 0.0) {
            return Err(Error::InvalidParameter("span must be > 0".into()));
        }
        let mut rng = rng_from(seed, &[0xd1]);
        let r = span / 2.0;
        let mut pts: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let rad = r * rng.gen::<f64>().sqrt();
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                (rad * th.cos(), rad * th.sin())
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1)
            }
        });
        Self::new(d_scale, d)
    }

    /// Uncorrelated nodes.
    pub fn independent(n: usize) -> Self {
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { f64::INFINITY });
        Self {
            d_scale: 1.0,
            distances: d,
        }
    }

    pub fn len(&self) -> usize {
        self.distances.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.distances.map(|d| (-d / self.d_scale).exp())
    }

    pub fn restrict(&self, nodes: &[usize]) -> Self {
        let k = nodes.len();
        Self {
            d_scale: self.d_scale,
            distances: DMatrix::from_fn(k, k, |i, j| self.distances[(nodes[i], nodes[j])]),
        }
    }

    /// Symmetric square root of the correlation matrix after a PSD check.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        let rho = self.matrix();
        let n = rho.nrows();
        if rho == DMatrix::identity(n, n) {
            return Ok(rho);
        }
        let eig = SymmetricEigen::new(rho);
        let tol = 1e-10 * n.max(1) as f64;
        if let Some((index, &value)) = eig.eigenvalues.iter().enumerate().find(|(_, &v)| v < -tol) {
            return Err(Error::NotPositiveSemidefinite { index, value });
        }
        let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let v = &eig.eigenvectors;
        Ok(v * DMatrix::from_diagonal(&sqrt) * v.transpose())
    }
}

/// Mixes per-time-step innovation vectors (columns) through the correlation factor.
pub fn correlate_nodes(
    innovations: &DMatrix<f64>,
    corr: &SpatialCorrelation,
) -> Result<DMatrix<f64>> {
    if innovations.nrows() != corr.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} innovation rows for {} nodes",
            innovations.nrows(),
            corr.len()
        )));
    }
    Ok(corr.factor()? * innovations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn noise(n: usize, t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from(seed, &[]);
        DMatrix::from_fn(n, t, |_, _| rng.sample(StandardNormal))
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn two_nodes_reach_target_correlation() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 20.0, 20.0, 0.0]);
        let c = SpatialCorrelation::new(20.0, d).unwrap();
        let out = correlate_nodes(&noise(2, 100_000, 1), &c).unwrap();
        let r0: Vec<f64> = out.row(0).iter().copied().collect();
        let r1: Vec<f64> = out.row(1).iter().copied().collect();
        assert!((corr(&r0, &r1) - (-1.0f64).exp()).abs() < 0.02);
        for r in [&r0, &r1] {
            let var = r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64;
            assert!((var - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn infinite_distance_is_identity() {
        let x = noise(4, 50, 2);
        let out = correlate_nodes(&x, &SpatialCorrelation::independent(4)).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn zero_distance_gives_identical_rows() {
        let c = SpatialCorrelation::new(20.0, DMatrix::zeros(3, 3)).unwrap();
        let out = correlate_nodes(&noise(3, 200, 3), &c).unwrap();
        for j in 0..200 {
            assert!((out[(0, j)] - out[(1, j)]).abs() < 1e-9);
            assert!((out[(0, j)] - out[(2, j)]).abs() < 1e-9);
        }
    }

    #[test]
    fn non_psd_reported() {
        // pairwise distances violating the triangle inequality badly
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 100.0, 0.0, 0.0, 0.0, 100.0, 0.0, 0.0]);
        let c = SpatialCorrelation::new(1.0, d).unwrap();
        assert!(matches!(
            c.factor(),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn random_sites_within_span_and_psd() {
        let c = SpatialCorrelation::random_sites(64, 20.0, 1.0, 4).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let d = c.distances[(i, j)];
                assert!(d <= 1.0 + 1e-12);
                assert!(i == j || d > 0.0);
            }
        }
        assert!(c.factor().is_ok());
    }

    #[test]
    fn malformed_distances_rejected() {
        assert!(SpatialCorrelation::new(
            20.0,
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])
        )
        .is_err());
        assert!(SpatialCorrelation::new(
            20.0,
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0])
        )
        .is_err());
        assert!(SpatialCorrelation::new(0.0, DMatrix::zeros(2, 2)).is_err());
        assert!(correlate_nodes(&noise(3, 2, 0), &SpatialCorrelation::independent(2)).is_err());
    }
}
