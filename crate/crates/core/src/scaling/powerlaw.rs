use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{ols_line, ols_r2};

pub const DEFAULT_XMIN: usize = 2;
/// Sparse tail bins bias the log-binned slope toward zero; bins holding fewer
/// sizes than this are left out of the fit.
pub const DEFAULT_MIN_BIN_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub xmin: usize,
    pub n_points: usize,
    pub r2: f64,
    /// `(ln bin centre, ln normalized frequency)` for each fitted bin.
    pub points: Vec<(f64, f64)>,
}

/// Log-log slope of the size distribution over logarithmic bins
/// `[2^k, 2^(k+1))`. Bin densities are count / (bin width · total).
pub fn powerlaw_fit(sizes: &[usize], xmin: usize, min_bin_count: usize) -> Result<PowerLawFit> {
    if xmin == 0 {
        return Err(Error::InvalidArgument("xmin must be at least 1".into()));
    }
    let kept: Vec<usize> = sizes.iter().copied().filter(|&s| s >= xmin).collect();
    let mut distinct = kept.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() == 1 {
        return Err(Error::Degenerate("all cluster sizes are equal".into()));
    }
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            what: "distinct sizes at or above xmin",
            have: distinct.len(),
            need: 3,
        });
    }
    let total = kept.len() as f64;
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for &s in &kept {
        *bins.entry(s.ilog2()).or_default() += 1;
    }
    let points: Vec<(f64, f64)> = bins
        .into_iter()
        .filter(|&(_, c)| c >= min_bin_count.max(1))
        .map(|(k, c)| {
            let lo = (1u64 << k).max(xmin as u64) as f64;
            let hi = (1u64 << (k + 1)) as f64;
            ((lo * hi).sqrt().ln(), (c as f64 / ((hi - lo) * total)).ln())
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            what: "populated logarithmic bins",
            have: points.len(),
            need: 3,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (slope, intercept) =
        ols_line(&x, &y).ok_or_else(|| Error::Degenerate("bins have no spread".into()))?;
    Ok(PowerLawFit {
        exponent: slope,
        intercept,
        xmin,
        n_points: points.len(),
        r2: ols_r2(&x, &y, slope, intercept),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    /// Discrete sizes with P(s) ∝ s^(-1 - a) by inverse-CDF sampling of a
    /// continuous Pareto tail, floored.
    fn pareto_sizes(seed: u64, n: usize, a: f64) -> Vec<usize> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|_| {
                let u = 1.0 - rng.uniform();
                (u.powf(-1.0 / a)).floor().min(1e12) as usize
            })
            .collect()
    }

    #[test]
    fn pareto_exponent() {
        let sizes = pareto_sizes(17, 100_000, 0.6);
        let f = powerlaw_fit(&sizes, DEFAULT_XMIN, DEFAULT_MIN_BIN_COUNT).unwrap();
        assert!((f.exponent + 1.6).abs() < 0.15, "exponent {}", f.exponent);
        assert!(f.r2 > 0.95);
    }

    #[test]
    fn all_equal_is_degenerate() {
        assert!(matches!(powerlaw_fit(&[7; 50], 2, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn two_sizes_rejected() {
        assert!(matches!(
            powerlaw_fit(&[2, 2, 8, 8, 8], 2, 1),
            Err(Error::InsufficientData { have: 2, .. })
        ));
    }

    #[test]
    fn below_xmin_ignored() {
        let mut sizes = vec![1; 1000];
        sizes.extend([2, 2, 2, 3, 4, 4, 5, 9, 17, 40]);
        let a = powerlaw_fit(&sizes, 2, 1).unwrap();
        let b = powerlaw_fit(&sizes[1000..], 2, 1).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn power_of_two_rescaling(seed in 0u64..1000, j in 1u32..5) {
            let sizes: Vec<usize> = pareto_sizes(seed, 20_000, 0.8).into_iter().filter(|&s| s >= 2).collect();
            let scaled: Vec<usize> = sizes.iter().map(|s| s << j).collect();
            let a = powerlaw_fit(&sizes, 2, DEFAULT_MIN_BIN_COUNT).unwrap();
            let b = powerlaw_fit(&scaled, 2, DEFAULT_MIN_BIN_COUNT).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 0.02);
        }
    }
}
