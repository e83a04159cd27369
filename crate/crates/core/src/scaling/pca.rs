use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::entropy::sample_covariance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// One row per input row, `dims` columns.
    pub coords: Vec<Vec<f64>>,
    /// Unit principal axes, largest variance first.
    pub axes: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    /// Share of total variance captured by each axis.
    pub explained_ratio: Vec<f64>,
}

/// Projection onto the leading principal axes of the centered data. Each
/// axis is oriented so that its largest-magnitude loading is positive.
pub fn pca_project(rows: &[&[f64]], dims: usize) -> Result<PcaProjection> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData {
            what: "rows for PCA",
            have: rows.len(),
            need: 3,
        });
    }
    let cov = sample_covariance(rows)?;
    let d = cov.nrows();
    if dims == 0 || dims > d {
        return Err(Error::InvalidArgument(format!("cannot project {d}-dimensional data onto {dims} axes")));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]];
    let last = eig.eigenvalues[order[dims - 1]];
    if !(top > 0.0) || last <= 1e-12 * top {
        return Err(Error::Degenerate(format!("data rank is below {dims}")));
    }
    let axes: Vec<Vec<f64>> = order[..dims]
        .iter()
        .map(|&c| {
            let v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let pivot = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            v.into_iter().map(|x| sign * x).collect()
        })
        .collect();
    let n = rows.len() as f64;
    let mu: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let coords = rows
        .iter()
        .map(|r| {
            axes.iter()
                .map(|a| a.iter().zip(r.iter()).zip(&mu).map(|((w, x), m)| w * (x - m)).sum())
                .collect()
        })
        .collect();
    let explained_variance: Vec<f64> = order[..dims].iter().map(|&c| eig.eigenvalues[c]).collect();
    let explained_ratio = explained_variance.iter().map(|v| v / total).collect();
    Ok(PcaProjection {
        coords,
        axes,
        explained_variance,
        explained_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn rows(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn two_d_is_lossless() {
        let mut rng = SeededRng::new(1);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![3.0 * rng.normal(), rng.normal() + 1.0]).collect();
        let p = pca_project(&rows(&pts), 2).unwrap();
        for i in 0..pts.len() {
            for j in 0..i {
                assert!((dist(&pts[i], &pts[j]) - dist(&p.coords[i], &p.coords[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn plane_in_three_d() {
        let mut rng = SeededRng::new(2);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let (a, b) = (rng.normal(), rng.normal());
                vec![a + b, a - b, 2.0 * a]
            })
            .collect();
        let p = pca_project(&rows(&pts), 2).unwrap();
        assert!((p.explained_ratio[0] + p.explained_ratio[1] - 1.0).abs() < 1e-12);
        // Reconstruction from two axes.
        let n = pts.len() as f64;
        let mu: Vec<f64> = (0..3).map(|j| pts.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        for (r, c) in pts.iter().zip(&p.coords) {
            let rec: Vec<f64> = (0..3).map(|j| mu[j] + c[0] * p.axes[0][j] + c[1] * p.axes[1][j]).collect();
            assert!(dist(r, &rec) < 1e-9);
        }
    }

    #[test]
    fn isotropic_share() {
        let mut rng = SeededRng::new(3);
        let pts: Vec<Vec<f64>> = (0..4000).map(|_| (0..8).map(|_| rng.normal()).collect()).collect();
        let p = pca_project(&rows(&pts), 2).unwrap();
        let share = p.explained_ratio[0] + p.explained_ratio[1];
        assert!((share - 0.25).abs() < 0.05, "share {share}");
    }

    #[test]
    fn sign_convention() {
        let mut rng = SeededRng::new(4);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.normal(), 5.0 * rng.normal(), 0.1 * rng.normal()]).collect();
        let p = pca_project(&rows(&pts), 2).unwrap();
        for a in &p.axes {
            let big = a.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap();
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rank_one_rejected() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(pca_project(&rows(&pts), 2), Err(Error::Degenerate(_))));
    }
}
