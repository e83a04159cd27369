use crate::error::{Error, Result};

/// Benjamini–Hochberg adjusted p-values, returned in input order.
pub fn bh_fdr(pvalues: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = f64::INFINITY;
    for (pos, &i) in order.iter().enumerate().rev() {
        let rank = pos + 1;
        let v = (m as f64 * pvalues[i] / rank as f64).min(1.0);
        running = running.min(v);
        adjusted[i] = running;
    }
    Ok(adjusted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_spacing_collapses() {
        assert_eq!(bh_fdr(&[0.01, 0.02, 0.03, 0.04]).unwrap(), vec![0.04; 4]);
    }

    #[test]
    fn single_and_ones() {
        assert_eq!(bh_fdr(&[0.37]).unwrap(), vec![0.37]);
        assert_eq!(bh_fdr(&[1.0; 5]).unwrap(), vec![1.0; 5]);
        assert!(bh_fdr(&[]).unwrap().is_empty());
    }

    #[test]
    fn mixed_order() {
        // sorted 0.001 0.01 0.04 0.5 -> 0.004 0.02 0.0533 0.5
        let adj = bh_fdr(&[0.5, 0.001, 0.04, 0.01]).unwrap();
        let want = [0.5, 0.004, 0.04 * 4.0 / 3.0, 0.02];
        for (a, w) in adj.iter().zip(want) {
            assert!((a - w).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(bh_fdr(&[0.1, 1.2]).is_err());
        assert!(bh_fdr(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(p in prop::collection::vec(0.0f64..=1.0, 1..40)) {
            let adj = bh_fdr(&p).unwrap();
            let mut pairs: Vec<(f64, f64)> = p.iter().copied().zip(adj.iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pairs.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
            for (raw, a) in p.iter().zip(&adj) {
                prop_assert!(*a >= *raw * (1.0 - 1e-15) && *a <= 1.0);
            }
        }
    }
}
