use statrs::function::beta::inv_beta_reg;

/// Two-sided Clopper-Pearson interval for a binomial proportion at
/// confidence `level`. Requires `trials >= 1` and `successes <= trials`.
pub fn confidence_interval(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials >= 1 && successes <= trials, "need 0 <= successes <= trials, trials >= 1");
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    let alpha = 1.0 - level;
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 { 0.0 } else { inv_beta_reg(x, n - x + 1.0, alpha / 2.0) };
    let hi = if successes == trials { 1.0 } else { inv_beta_reg(x + 1.0, n - x, 1.0 - alpha / 2.0) };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta_reg;

    #[test]
    fn zero_successes() {
        let (lo, hi) = confidence_interval(0, 100, 0.99);
        assert_eq!(lo, 0.0);
        // closed form of the upper limit when x = 0
        let expect = 1.0 - 0.005f64.powf(1.0 / 100.0);
        assert!((hi - expect).abs() < 1e-10);
        assert!((hi - 0.0517).abs() < 1e-4);
    }

    #[test]
    fn all_successes() {
        let (lo, hi) = confidence_interval(100, 100, 0.99);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.005f64.powf(1.0 / 100.0)).abs() < 1e-10);
    }

    #[test]
    fn half_successes_symmetric() {
        let (lo, hi) = confidence_interval(50, 100, 0.99);
        assert!(lo < 0.5 && hi > 0.5);
        assert!(((0.5 - lo) - (hi - 0.5)).abs() < 1e-3);
    }

    #[test]
    fn limits_solve_the_binomial_tails() {
        // P(X >= x | lo) = alpha/2 and P(X <= x | hi) = alpha/2
        let (x, n) = (17u64, 250u64);
        let (lo, hi) = confidence_interval(x, n, 0.95);
        let (xf, nf) = (x as f64, n as f64);
        assert!((beta_reg(xf, nf - xf + 1.0, lo) - 0.025).abs() < 1e-9);
        assert!((1.0 - beta_reg(xf + 1.0, nf - xf, hi) - 0.025).abs() < 1e-9);
    }
}
