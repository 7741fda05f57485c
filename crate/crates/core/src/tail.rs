//! Tail probabilities and error thresholds from even-moment bounds.
//!
//! Markov's inequality applied to `S^{2k}` gives
//! `P(|S| >= eps) <= E(S^{2k}) / eps^{2k}`; for independent symmetric
//! summands the maximum of the partial sums obeys the same bound times two.
//! Everything here is evaluated in the log domain: the moments of interest
//! are routinely far below the smallest binary64 value.

use std::f64::consts::{LN_10, LN_2};

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::moment::{moment_bound, MomentSeries};
use crate::rational::{ln_rational, Rational};

/// Factor applied to the endpoint tail to bound the running maximum.
pub const LEVY_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TailBoundResult {
    pub k_used: usize,
    /// Bound on `E(S^{2k})` at `k_used`.
    pub moment: Rational,
    pub epsilon: f64,
    /// `min(1, factor * moment / epsilon^{2k})`; may underflow to zero, see `log10_probability`.
    pub probability: f64,
    pub log10_probability: f64,
    pub levy_factor_applied: bool,
}

impl TailBoundResult {
    pub fn two_k(&self) -> usize {
        2 * self.k_used
    }

    pub fn log10_moment(&self) -> f64 {
        ln_rational(&self.moment) / LN_10
    }

    pub fn significant_bits(&self) -> f64 {
        significant_bits(self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    EpsilonFromP,
    PFromEpsilon,
}

/// A tail-bound question about one moment series. Exactly one of
/// `probability` / `epsilon` is supplied, according to `mode`.
#[derive(Debug, Clone)]
pub struct TailBoundQuery {
    pub series: MomentSeries,
    pub mode: QueryMode,
    pub probability: Option<f64>,
    pub epsilon: Option<f64>,
    pub k_fixed: Option<usize>,
    pub use_levy: bool,
}

impl TailBoundQuery {
    pub fn epsilon_from_p(series: MomentSeries, probability: f64, use_levy: bool) -> Self {
        Self {
            series,
            mode: QueryMode::EpsilonFromP,
            probability: Some(probability),
            epsilon: None,
            k_fixed: None,
            use_levy,
        }
    }

    pub fn p_from_epsilon(series: MomentSeries, epsilon: f64, use_levy: bool) -> Self {
        Self {
            series,
            mode: QueryMode::PFromEpsilon,
            probability: None,
            epsilon: Some(epsilon),
            k_fixed: None,
            use_levy,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_fixed = Some(k);
        self
    }

    /// Runs the query; without `k_fixed` all orders of the series are scanned.
    pub fn evaluate(&self) -> Result<TailBoundResult> {
        if let Some(k) = self.k_fixed {
            check_order(&self.series, k)?;
        }
        match (self.mode, self.probability, self.epsilon) {
            (QueryMode::EpsilonFromP, Some(p), None) => match self.k_fixed {
                Some(k) => fixed_k_epsilon(&self.series, k, p, self.use_levy),
                None => optimize_k(&self.series, p, self.use_levy, self.series.order()),
            },
            (QueryMode::PFromEpsilon, None, Some(eps)) => match self.k_fixed {
                Some(k) => tail_bound_at(&self.series, k, eps, self.use_levy),
                None => best_probability(&self.series, eps, self.use_levy, self.series.order()),
            },
            _ => Err(Error::InvalidConfig(
                "exactly one of probability / epsilon must be given, matching the query mode".into(),
            )),
        }
    }
}

fn check_order(series: &MomentSeries, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::NonPositive { what: "k", value: "0".into() });
    }
    if k > series.order() {
        return Err(Error::OrderExceedsTruncation { k, order: series.order() });
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::NonPositive { what: "epsilon", value: epsilon.to_string() });
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

fn factor(use_levy: bool) -> f64 {
    if use_levy {
        LEVY_FACTOR
    } else {
        1.0
    }
}

/// Natural log of `min(1, factor * moment / epsilon^{2k})`.
pub fn ln_tail(moment: &Rational, k: usize, epsilon: f64, factor: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if moment.is_negative() {
        return Err(Error::InvalidModel("negative moment bound".into()));
    }
    if moment.is_zero() {
        return Ok(f64::NEG_INFINITY);
    }
    let ln = factor.ln() + ln_rational(moment) - 2.0 * k as f64 * epsilon.ln();
    Ok(ln.min(0.0))
}

/// Markov bound on the endpoint event `|S| >= epsilon`.
pub fn markov_tail(moment: &Rational, k: usize, epsilon: f64) -> Result<f64> {
    Ok(ln_tail(moment, k, epsilon, 1.0)?.exp())
}

/// Bound on `max_i |S_i| >= epsilon`; valid for independent symmetric summands.
pub fn levy_max_tail(moment: &Rational, k: usize, epsilon: f64) -> Result<f64> {
    Ok(ln_tail(moment, k, epsilon, LEVY_FACTOR)?.exp())
}

/// Threshold `eps = (factor * E(S^{2k}) / P)^{1/(2k)}`. A zero moment gives 0.
pub fn epsilon_for_probability(
    series: &MomentSeries,
    k: usize,
    probability: f64,
    use_levy: bool,
) -> Result<f64> {
    check_probability(probability)?;
    check_order(series, k)?;
    let moment = moment_bound(series, k)?;
    Ok(epsilon_from_moment(&moment, k, probability, use_levy))
}

fn epsilon_from_moment(moment: &Rational, k: usize, probability: f64, use_levy: bool) -> f64 {
    if moment.is_zero() {
        return 0.0;
    }
    let ln = (factor(use_levy).ln() + ln_rational(moment) - probability.ln()) / (2.0 * k as f64);
    ln.exp()
}

fn fixed_k_epsilon(
    series: &MomentSeries,
    k: usize,
    probability: f64,
    use_levy: bool,
) -> Result<TailBoundResult> {
    check_probability(probability)?;
    check_order(series, k)?;
    let moment = moment_bound(series, k)?;
    let epsilon = epsilon_from_moment(&moment, k, probability, use_levy);
    Ok(TailBoundResult {
        k_used: k,
        moment,
        epsilon,
        probability,
        log10_probability: probability.log10(),
        levy_factor_applied: use_levy,
    })
}

/// Fixed-order probability bound at a given threshold.
pub fn tail_bound_at(
    series: &MomentSeries,
    k: usize,
    epsilon: f64,
    use_levy: bool,
) -> Result<TailBoundResult> {
    check_order(series, k)?;
    let moment = moment_bound(series, k)?;
    let ln = ln_tail(&moment, k, epsilon, factor(use_levy))?;
    Ok(TailBoundResult {
        k_used: k,
        moment,
        epsilon,
        probability: ln.exp(),
        log10_probability: ln / LN_10,
        levy_factor_applied: use_levy,
    })
}

/// Order `k` in `1..=k_max` giving the smallest threshold at probability `P`.
/// Every order is evaluated; ties go to the smaller `k`.
pub fn optimize_k(
    series: &MomentSeries,
    probability: f64,
    use_levy: bool,
    k_max: usize,
) -> Result<TailBoundResult> {
    check_order(series, k_max)?;
    let mut best: Option<TailBoundResult> = None;
    for k in 1..=k_max {
        let candidate = fixed_k_epsilon(series, k, probability, use_levy)?;
        if best.as_ref().map_or(true, |b| candidate.epsilon < b.epsilon) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("k_max >= 1"))
}

/// Order `k` in `1..=k_max` giving the smallest probability bound at `epsilon`.
pub fn best_probability(
    series: &MomentSeries,
    epsilon: f64,
    use_levy: bool,
    k_max: usize,
) -> Result<TailBoundResult> {
    check_order(series, k_max)?;
    let mut best: Option<TailBoundResult> = None;
    for k in 1..=k_max {
        let candidate = tail_bound_at(series, k, epsilon, use_levy)?;
        if best
            .as_ref()
            .map_or(true, |b| candidate.log10_probability < b.log10_probability)
        {
            best = Some(candidate);
        }
    }
    Ok(best.expect("k_max >= 1"))
}

/// Leading-order threshold for `n = u^{-3/2}` uniform variables, `m = 1`,
/// `P = u^{3/2}`, with the Levy factor.
pub fn asymptotic_epsilon(u: f64, k: usize) -> Result<f64> {
    check_asymptotic(u, k)?;
    Ok(match k {
        1 => (4.0 / (9.0 * u * u)).powf(1.0 / 4.0),
        2 => (4.0 / (9.0 * u)).powf(1.0 / 8.0),
        3 => (100.0f64 / 81.0).powf(1.0 / 12.0),
        _ => (4900.0 * u / 729.0).powf(1.0 / 16.0),
    })
}

/// The same thresholds written as `log2(eps)`.
pub fn asymptotic_log2_epsilon(u: f64, k: usize) -> Result<f64> {
    check_asymptotic(u, k)?;
    let l3 = 3f64.log2();
    let lu = u.log2();
    Ok(match k {
        1 => (-lu + 1.0 - l3) / 2.0,
        2 => (-lu + 2.0 - 2.0 * l3) / 8.0,
        3 => (10f64.log2() - 2.0 * l3) / 6.0,
        _ => (lu + 2.0 * 70f64.log2() - 6.0 * l3) / 16.0,
    })
}

fn check_asymptotic(u: f64, k: usize) -> Result<()> {
    if !(1..=4).contains(&k) {
        return Err(Error::NoClosedForm(2 * k));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidConfig(format!("asymptotic regime needs 0 < u < 1, got {u}")));
    }
    Ok(())
}

/// `log2(eps)`: the number of bits above (positive) or below (negative)
/// the binary point that may be lost.
pub fn significant_bits(epsilon: f64) -> f64 {
    epsilon.ln() / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::{series_for_variable, series_power, MomentModel};
    use crate::rational::{int, pow2, ratio};
    use proptest::prelude::*;

    fn accumulation(u: Rational, n: u64, order: usize) -> MomentSeries {
        series_power(&series_for_variable(&MomentModel::uniform(u).unwrap(), order).unwrap(), n)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn markov_examples() {
        assert_eq!(markov_tail(&int(1), 1, 1.0).unwrap(), 1.0);
        assert_eq!(markov_tail(&int(0), 3, 0.5).unwrap(), 0.0);
        assert!(markov_tail(&int(1), 1, 0.0).is_err());
        assert!(markov_tail(&int(1), 1, -1.0).is_err());
        let u = pow2(-24);
        let m = &u * &u * int(2_000_000_000u64) / int(3);
        let p = markov_tail(&m, 1, 68.825).unwrap();
        assert!(rel(p, 5e-10) < 1e-4, "{p}");
        assert!(rel(levy_max_tail(&m, 1, 68.825).unwrap(), 1e-9) < 1e-4);
    }

    #[test]
    fn levy_examples() {
        assert!(rel(levy_max_tail(&ratio(1, 3), 1, 2.0).unwrap(), 1.0 / 6.0) < 1e-14);
        assert_eq!(levy_max_tail(&ratio(1, 2), 1, 1.0).unwrap(), 1.0);
        assert_eq!(levy_max_tail(&ratio(3, 5), 1, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn epsilon_examples() {
        let s = accumulation(pow2(-24), 2_000_000_000, 4);
        let e2 = epsilon_for_probability(&s, 2, 1e-9, true).unwrap();
        assert!(rel(e2, 0.42832) < 2e-4, "{e2}");
        let e4 = epsilon_for_probability(&s, 4, 1e-9, true).unwrap();
        assert!(rel(e4, 0.040042) < 2e-4, "{e4}");
        let single = series_for_variable(&MomentModel::support(int(1)).unwrap(), 1).unwrap();
        assert!(rel(epsilon_for_probability(&single, 1, 1.0, false).unwrap(), 1.0) < 1e-15);
        assert!(epsilon_for_probability(&single, 1, 0.0, false).is_err());
        assert!(epsilon_for_probability(&single, 2, 0.5, false).is_err());
    }

    #[test]
    fn optimize_examples() {
        let s = accumulation(pow2(-24), 2_000_000_000, 24);
        let best = optimize_k(&s, 1e-9, true, 24).unwrap();
        assert_eq!(best.two_k(), 44);
        assert!(rel(best.epsilon, 0.010153) < 2e-4);
        let only = optimize_k(&s, 1e-9, true, 1).unwrap();
        assert_eq!(only.k_used, 1);
        assert!(rel(only.epsilon, 68.825) < 2e-4);
    }

    #[test]
    fn asymptotic_examples() {
        let c = asymptotic_epsilon(0.3, 3).unwrap();
        assert!(rel(c, (100f64 / 81.0).powf(1.0 / 12.0)) < 1e-15);
        assert!((c - 1.0177).abs() < 1e-4);
        let u = 2f64.powi(-24);
        let e1 = asymptotic_epsilon(u, 1).unwrap();
        assert!(rel(e1, (4.0 * 2f64.powi(48) / 9.0).powf(0.25)) < 1e-14);
        assert!((significant_bits(e1) - (24.0 + 1.0 - 3f64.log2()) / 2.0).abs() < 1e-12);
        assert!(asymptotic_epsilon(u, 5).is_err());
        assert!(asymptotic_epsilon(1.0, 2).is_err());
        for k in 1..=4 {
            let a = significant_bits(asymptotic_epsilon(u, k).unwrap());
            let b = asymptotic_log2_epsilon(u, k).unwrap();
            assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn significant_bits_examples() {
        assert!((significant_bits(68.825) - 6.10).abs() < 5e-3);
        assert_eq!(significant_bits(1.0), 0.0);
        assert!((significant_bits(0.010153) + 6.62).abs() < 5e-3);
    }

    #[test]
    fn query_dispatch() {
        let s = accumulation(int(1), 10, 6);
        let q = TailBoundQuery::epsilon_from_p(s.clone(), 0.01, true);
        assert_eq!(q.evaluate().unwrap(), optimize_k(&s, 0.01, true, 6).unwrap());
        let q = TailBoundQuery::p_from_epsilon(s.clone(), 3.0, false).with_k(2);
        assert_eq!(q.evaluate().unwrap(), tail_bound_at(&s, 2, 3.0, false).unwrap());
        let mut bad = TailBoundQuery::p_from_epsilon(s, 3.0, false);
        bad.probability = Some(0.1);
        assert!(bad.evaluate().is_err());
    }

    proptest! {
        #[test]
        fn round_trip(n in 1u64..100_000, lp in -12.0f64..-1e-3, k in 1usize..=8) {
            let s = accumulation(ratio(1, 7), n, 8);
            let p = 10f64.powf(lp);
            let eps = epsilon_for_probability(&s, k, p, false).unwrap();
            let m = moment_bound(&s, k).unwrap();
            let back = markov_tail(&m, k, eps).unwrap();
            prop_assert!(rel(back, p) < 1e-9, "{} vs {}", back, p);
        }

        #[test]
        fn epsilon_monotone(n in 1u64..1000, a in -10.0f64..-0.01, b in -10.0f64..-0.01, k in 1usize..=6) {
            prop_assume!((a - b).abs() > 1e-6);
            let s = accumulation(int(1), n, 6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let e_lo = epsilon_for_probability(&s, k, 10f64.powf(lo), true).unwrap();
            let e_hi = epsilon_for_probability(&s, k, 10f64.powf(hi), true).unwrap();
            prop_assert!(e_lo > e_hi);
            let bigger = accumulation(ratio(11, 10), n, 6);
            prop_assert!(epsilon_for_probability(&bigger, k, 10f64.powf(lo), true).unwrap() > e_lo);
        }

        #[test]
        fn optimize_never_worse(n in 1u64..10_000_000, lp in -12.0f64..-0.5) {
            let s = accumulation(pow2(-10), n, 12);
            let p = 10f64.powf(lp);
            let best = optimize_k(&s, p, true, 12).unwrap();
            for k in 1..=12 {
                prop_assert!(best.epsilon <= epsilon_for_probability(&s, k, p, true).unwrap());
            }
        }

        #[test]
        fn probabilities_clamped(n in 1u64..1000, eps in 1e-6f64..1e3, k in 1usize..=6, levy: bool) {
            let s = accumulation(int(1), n, 6);
            let r = tail_bound_at(&s, k, eps, levy).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.probability));
        }

        #[test]
        fn log_domain_matches_direct(n in 1u64..1000, lp in -9.0f64..-0.1, k in 1usize..=4) {
            let s = accumulation(ratio(1, 2), n, 4);
            let p = 10f64.powf(lp);
            let m = crate::rational::to_f64(&moment_bound(&s, k).unwrap());
            let direct = (2.0 * m / p).powf(1.0 / (2 * k) as f64);
            let logged = epsilon_for_probability(&s, k, p, true).unwrap();
            prop_assert!(rel(logged, direct) < 1e-12);
        }
    }
}
