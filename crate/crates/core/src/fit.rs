//! Least-squares power-law fits for convergence and scaling studies.

/// Slope of `log y` against `log x`, i.e. the exponent `p` in `y ≈ C xᵖ`.
///
/// Pairs with a non-positive or non-finite entry are skipped; `None` when
/// fewer than two usable pairs remain.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// `log₂` ratios of consecutive entries, the observed order under halving.
pub fn halving_orders(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(2.0)).collect();
        assert!((fit_exponent(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_exponent(&[1.0], &[1.0]).is_none());
        assert!(fit_exponent(&[1.0, 2.0], &[0.0, 0.0]).is_none());
    }

    #[test]
    fn halving_orders_of_quadratic_sequence() {
        let o = halving_orders(&[1.0, 0.25, 0.0625]);
        assert_eq!(o, vec![2.0, 2.0]);
    }
}
