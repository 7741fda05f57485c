//! Second-order recursive filters `y_i = d_i - b1 y_{i-1} - b2 y_{i-2}`.
//!
//! Only filters with complex characteristic roots are handled. The roots of
//! `X^2 + b1 X + b2` then have modulus `sqrt(b2)`, so the filter is BIBO
//! stable exactly when `b2 < 1`. The impulse response gives the weight with
//! which an error injected `j` steps ago appears in the current output.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::moment::MomentModel;
use crate::rational::{from_f64, int, is_positive, to_ratio_string, Rational};
use crate::scenario::{ErrorVariableSpec, Scenario};
use crate::sim::dd::DoubleDouble;

/// Default number of weight buckets in [`filter_error_scenario`].
pub const DEFAULT_BUCKETS: usize = 64;

/// Bucket edges are spaced by this many steps per octave.
const BUCKETS_PER_OCTAVE: usize = 4;

const MAX_SUM_TERMS: usize = 100_000_000;

const TINY: f64 = 1e-290;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    b1: f64,
    b2: f64,
}

impl FilterSpec {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        if !(b1.is_finite() && b2.is_finite()) {
            return Err(Error::NonFinite(format!("filter coefficients b1 = {b1}, b2 = {b2}")));
        }
        if !(b2 > 0.0 && b1 * b1 < 4.0 * b2) {
            return Err(Error::RealRoots { b1, b2 });
        }
        Ok(Self { b1, b2 })
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    pub fn is_bibo_stable(&self) -> bool {
        self.b2 < 1.0
    }

    /// Modulus of the characteristic roots.
    pub fn root_modulus(&self) -> f64 {
        self.b2.sqrt()
    }

    /// `y_0..=y_n` for the input `d_0 = 1`, `d_i = 0` otherwise.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(n + 1);
        let (mut prev2, mut prev1) = (0.0f64, 1.0f64);
        y.push(prev1);
        for _ in 0..n {
            let next = -self.b1 * prev1 - self.b2 * prev2;
            y.push(next);
            prev2 = prev1;
            prev1 = next;
        }
        y
    }

    /// The impulse response in exact arithmetic on the binary64 coefficients.
    pub fn impulse_response_exact(&self, n: usize) -> Vec<Rational> {
        let b1 = from_f64(self.b1).expect("finite");
        let b2 = from_f64(self.b2).expect("finite");
        impulse_response_exact(&b1, &b2, n)
    }

    /// A constant `C` with `|y_n| <= C * sqrt(b2)^n` for every `n`.
    ///
    /// From `y_n = (l1^{n+1} - l2^{n+1}) / (l1 - l2)` with `|l1 - l2| = sqrt(4 b2 - b1^2)`.
    pub fn envelope_constant(&self) -> f64 {
        let gap = (4.0 * self.b2 - self.b1 * self.b1).sqrt();
        2.0 * self.root_modulus() / gap * (1.0 + 1e-9)
    }

    /// Running maxima of `|y_i| / b2^{i/2}` for `i = 0..=n`. Entries of
    /// magnitude below `1e-290` carry no relative accuracy and are skipped.
    pub fn envelope_ratios(&self, n: usize) -> Vec<f64> {
        let ln_rho = self.root_modulus().ln();
        let mut running = 0.0f64;
        self.impulse_response(n)
            .iter()
            .enumerate()
            .map(|(i, y)| {
                if y.abs() >= TINY {
                    running = running.max((y.abs().ln() - i as f64 * ln_rho).exp());
                }
                running
            })
            .collect()
    }

    /// `sqrt(b2 + 2 b1^2) / (1 - sqrt(b2))`, the closed-form bound on the
    /// accumulated effect of round-off errors on a stable filter.
    pub fn bibo_bound(&self) -> Result<f64> {
        if !self.is_bibo_stable() {
            return Err(Error::NotBiboStable(self.b2));
        }
        Ok((self.b2 + 2.0 * self.b1 * self.b1).sqrt() / (1.0 - self.root_modulus()))
    }

    /// `sum_{i >= 0} |y_i|` to within `tol`, stopping once the certified
    /// geometric tail bound drops below `tol / 2`.
    pub fn exact_coefficient_sum(&self, tol: f64) -> Result<f64> {
        if !self.is_bibo_stable() {
            return Err(Error::NotBiboStable(self.b2));
        }
        if !(tol > 0.0) {
            return Err(Error::NonPositive { what: "tol", value: tol.to_string() });
        }
        let rho = self.root_modulus();
        let ln_rho = rho.ln();
        let certified = self.envelope_constant();
        let mut fitted = 0.0f64;
        let mut sum = DoubleDouble::ZERO;
        let (mut prev2, mut prev1) = (0.0f64, 1.0f64);
        for i in 0..MAX_SUM_TERMS {
            let y = if i == 0 {
                1.0
            } else {
                let next = -self.b1 * prev1 - self.b2 * prev2;
                prev2 = prev1;
                prev1 = next;
                next
            };
            sum = sum + y.abs();
            if y.abs() >= TINY {
                fitted = fitted.max((y.abs().ln() - i as f64 * ln_rho).exp());
            }
            let constant = certified.max(fitted);
            let ln_tail = constant.ln() + (i + 1) as f64 * ln_rho - (1.0 - rho).ln();
            if ln_tail < (tol / 2.0).ln() {
                return Ok(sum.to_f64());
            }
        }
        Err(Error::NoConvergence(format!(
            "coefficient sum did not reach tol = {tol} within {MAX_SUM_TERMS} terms"
        )))
    }
}

pub fn impulse_response_exact(b1: &Rational, b2: &Rational, n: usize) -> Vec<Rational> {
    let mut y = Vec::with_capacity(n + 1);
    let (mut prev2, mut prev1) = (Rational::zero(), int(1));
    y.push(prev1.clone());
    for _ in 0..n {
        let next = -(b1 * &prev1) - b2 * &prev2;
        y.push(next.clone());
        prev2 = std::mem::replace(&mut prev1, next);
    }
    y
}

/// Bucket edges `w_max * 2^{-j/4}`, `j = 0..buckets`, in decreasing order.
fn bucket_edges(w_max: f64, buckets: usize) -> Vec<f64> {
    let fracs: Vec<f64> =
        (0..BUCKETS_PER_OCTAVE).map(|r| 2f64.powf(-(r as f64) / BUCKETS_PER_OCTAVE as f64)).collect();
    (0..buckets)
        .map(|j| {
            let octave = (j / BUCKETS_PER_OCTAVE) as i32;
            w_max * 2f64.powi(-octave) * fracs[j % BUCKETS_PER_OCTAVE]
        })
        .collect()
}

/// Scenario for `sum_i w_i * (X_{1,i} + ... + X_{m,i})` with every `X` uniform on `±u`.
///
/// Each `|w_i|` is rounded up to the nearest bucket edge so the result stays
/// an upper bound; weights below the last edge are rounded up to it. Zero
/// weights are dropped, and if nothing remains the scenario is degenerate.
pub fn weighted_scenario(
    weights: &[f64],
    u: &Rational,
    m: u64,
    buckets: usize,
    description: impl Into<String>,
) -> Result<Scenario> {
    let description = description.into();
    if !is_positive(u) {
        return Err(Error::NonPositive { what: "u", value: to_ratio_string(u) });
    }
    if m == 0 || buckets == 0 {
        return Err(Error::NonPositive { what: "m and buckets", value: format!("m = {m}, buckets = {buckets}") });
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::NonFinite(format!("filter weight {bad}; the impulse response overflowed")));
    }
    let w_max = weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    if w_max == 0.0 {
        return Ok(Scenario::degenerate(description));
    }
    let edges = bucket_edges(w_max, buckets);
    let mut counts = vec![0u64; buckets];
    for w in weights.iter().map(|w| w.abs()).filter(|w| *w > 0.0) {
        let j = edges.partition_point(|e| *e >= w) - 1;
        counts[j] += 1;
    }
    let mut groups = Vec::new();
    for (edge, count) in edges.iter().zip(&counts).filter(|(_, c)| **c > 0) {
        let total = count
            .checked_mul(m)
            .ok_or_else(|| Error::CountOverflow(format!("{count} weights * m = {m}")))?;
        let model = MomentModel::uniform(u * from_f64(*edge)?)?;
        groups.push(ErrorVariableSpec::new(model, total, format!("|weight| <= {edge:e}"))?);
    }
    Scenario::new(groups, description)
}

/// Error at the output of step `n` when each of steps `1..=n` injects `m`
/// errors of half-width `u`: the error from step `i` carries weight `y_{n-i}`.
pub fn filter_error_scenario(
    filter: &FilterSpec,
    n: usize,
    u: &Rational,
    m: u64,
    buckets: usize,
) -> Result<Scenario> {
    if n == 0 {
        return Err(Error::NonPositive { what: "n", value: "0".into() });
    }
    let weights = filter.impulse_response(n - 1);
    weighted_scenario(
        &weights,
        u,
        m,
        buckets,
        format!("filter b1 = {}, b2 = {} at step n = {n}, m = {m}", filter.b1, filter.b2),
    )
}
