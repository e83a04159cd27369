use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_N_MIN: usize = 25;

// Fixed chunking keeps the floating-point summation order independent of the
// thread count.
const ROW_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalEntropy {
    pub h: f64,
    pub n_samples: usize,
    pub d: usize,
    pub epsilon: f64,
    pub rank_deficient: bool,
}

fn column_means(rows: &[&[f64]], d: usize) -> Vec<f64> {
    let partial: Vec<Vec<f64>> = rows
        .par_chunks(ROW_CHUNK)
        .map(|chunk| {
            let mut s = vec![0.0; d];
            for r in chunk {
                for (acc, x) in s.iter_mut().zip(r.iter()) {
                    *acc += x;
                }
            }
            s
        })
        .collect();
    let mut total = vec![0.0; d];
    for p in partial {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    let n = rows.len() as f64;
    total.iter_mut().for_each(|t| *t /= n);
    total
}

/// Sample covariance with the n − 1 denominator.
pub fn sample_covariance(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "covariance",
            have: n,
            need: 2,
        });
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidArgument("rows have unequal dimension".into()));
    }
    let mu = column_means(rows, d);
    let partial: Vec<Vec<f64>> = rows
        .par_chunks(ROW_CHUNK)
        .map(|chunk| {
            // Upper triangle, row-major.
            let mut s = vec![0.0; d * d];
            let mut c = vec![0.0; d];
            for r in chunk {
                for ((ci, x), m) in c.iter_mut().zip(r.iter()).zip(&mu) {
                    *ci = x - m;
                }
                for a in 0..d {
                    let ca = c[a];
                    let row = &mut s[a * d..(a + 1) * d];
                    for b in a..d {
                        row[b] += ca * c[b];
                    }
                }
            }
            s
        })
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in partial {
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += p[a * d + b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Gaussian differential entropy from eigenvalues, `½[d ln(2πe) + Σ ln(λ + ε)]`.
/// Round-off negatives are clamped to zero first.
pub fn entropy_from_eigenvalues(eigenvalues: &[f64], epsilon: f64) -> f64 {
    let d = eigenvalues.len() as f64;
    let log_det: f64 = eigenvalues.iter().map(|&l| (l.max(0.0) + epsilon).ln()).sum();
    0.5 * (d * (std::f64::consts::TAU * std::f64::consts::E).ln() + log_det)
}

/// Global semantic entropy of one bin under a Gaussian model.
pub fn global_entropy(rows: &[&[f64]], epsilon: f64, n_min: usize) -> Result<GlobalEntropy> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be finite and non-negative")));
    }
    let need = n_min.max(2);
    if rows.len() < need {
        return Err(Error::InsufficientData {
            what: "global entropy bin",
            have: rows.len(),
            need,
        });
    }
    let cov = sample_covariance(rows)?;
    let d = cov.nrows();
    let ev = symmetric_eigenvalues(cov);
    Ok(GlobalEntropy {
        h: entropy_from_eigenvalues(&ev, epsilon),
        n_samples: rows.len(),
        d,
        epsilon,
        rank_deficient: ev.iter().any(|&l| l < epsilon),
    })
}
