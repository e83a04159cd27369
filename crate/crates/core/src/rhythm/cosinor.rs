use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::OMEGA_24H;

/// Single-component 24-hour cosinor fit
/// `y(t) = M + β_cos·cos ωt + β_sin·sin ωt + ε(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosinorFit {
    pub mesor: f64,
    pub beta_cos: f64,
    pub beta_sin: f64,
    pub amplitude: f64,
    /// Clock hour of the fitted maximum, in [0, 24).
    pub acrophase_h: f64,
    pub omega: f64,
    pub r2: f64,
    pub rss_full: f64,
    pub rss_null: f64,
    pub n_points: usize,
    pub p_lr: f64,
    /// Filled by a later FDR pass over a family of fits.
    pub p_fdr: Option<f64>,
    pub residuals: Vec<f64>,
}

impl CosinorFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.mesor + self.beta_cos * (self.omega * t).cos() + self.beta_sin * (self.omega * t).sin()
    }
}

/// Likelihood-ratio test of the cosinor against a mean-only model under
/// Gaussian errors: `Λ = n·ln(rss_null/rss_full)`, referred to χ²(2).
pub fn lr_test(fit: &CosinorFit) -> f64 {
    if fit.rss_null <= 0.0 {
        return 1.0;
    }
    if fit.rss_full <= 0.0 {
        return 0.0;
    }
    let lambda = (fit.n_points as f64 * (fit.rss_null / fit.rss_full).ln()).max(0.0);
    // Upper tail of χ² with two degrees of freedom.
    (-lambda / 2.0).exp()
}

/// Ordinary least-squares cosinor fit on `(t_hours, y)` pairs.
pub fn cosinor_fit(t: &[f64], y: &[f64]) -> Result<CosinorFit> {
    if t.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} times but {} values",
            t.len(),
            y.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in cosinor input".into()));
    }
    let mut distinct = t.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::InsufficientData {
            what: "cosinor distinct time points",
            have: distinct.len(),
            need: 4,
        });
    }
    let n = t.len();
    let omega = OMEGA_24H;
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => (omega * t[i]).cos(),
        _ => (omega * t[i]).sin(),
    });
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Degenerate(
            "cosinor design matrix is rank deficient".into(),
        ));
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd
        .solve(&yv, 0.0)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let fitted = &x * &beta;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss_full: f64 = residuals.iter().map(|e| e * e).sum();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let rss_null: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r2 = if rss_null > 0.0 {
        (1.0 - rss_full / rss_null).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (m, bc, bs) = (beta[0], beta[1], beta[2]);
    let mut acrophase = (bs.atan2(bc) / omega).rem_euclid(24.0);
    if acrophase >= 24.0 {
        acrophase = 0.0;
    }
    let mut fit = CosinorFit {
        mesor: m,
        beta_cos: bc,
        beta_sin: bs,
        amplitude: bc.hypot(bs),
        acrophase_h: acrophase,
        omega,
        r2,
        rss_full,
        rss_null,
        n_points: n,
        p_lr: 1.0,
        p_fdr: None,
        residuals,
    };
    fit.p_lr = lr_test(&fit);
    Ok(fit)
}
