//! Upper bounds on the even moments of sums of independent symmetric
//! random variables.
//!
//! Each variable contributes a truncated even series whose coefficient of
//! `z^{2j}` bounds `E(X^{2j}) / (2j)!`. For independent symmetric summands
//! the series of the sum is the product of the per-variable series, so
//! `E(S^{2k}) <= (2k)! * c_k` where `c_k` is the `k`-th coefficient of that
//! product. All arithmetic is exact.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{factorial, int, is_positive, ratio_str, ratio_str_vec, to_ratio_string, Rational};

/// Default truncation order of the moment series.
pub const DEFAULT_ORDER: usize = 32;

/// Default cap on the number of compositions enumerated by
/// [`brute_force_moment`].
pub const DEFAULT_COMPOSITION_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    /// `E(X^{2j}) <= u^{2j} / (2j + 1)`: the moments of the uniform law on `[-u, u]`.
    UniformBounded,
    /// `E(X^{2j}) <= u^{2j}`: any symmetric variable supported in `[-u, u]`.
    SupportBounded,
    /// Caller supplied bounds `m_1..m_K`.
    Custom,
}

/// Moment-bound family of one symmetric error variable with half-width `u`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentModel {
    kind: ModelKind,
    #[serde(with = "ratio_str")]
    u: Rational,
    #[serde(with = "ratio_str_vec", default, skip_serializing_if = "Option::is_none")]
    custom_moments: Option<Vec<Rational>>,
}

impl MomentModel {
    pub fn uniform(u: Rational) -> Result<Self> {
        Self::new(ModelKind::UniformBounded, u, None)
    }

    pub fn support(u: Rational) -> Result<Self> {
        Self::new(ModelKind::SupportBounded, u, None)
    }

    pub fn custom(u: Rational, moments: Vec<Rational>) -> Result<Self> {
        Self::new(ModelKind::Custom, u, Some(moments))
    }

    pub fn new(kind: ModelKind, u: Rational, custom_moments: Option<Vec<Rational>>) -> Result<Self> {
        let model = Self { kind, u, custom_moments };
        model.validate()?;
        Ok(model)
    }

    /// Checks the invariants; used after deserialization too.
    pub fn validate(&self) -> Result<()> {
        if !is_positive(&self.u) {
            return Err(Error::NonPositive { what: "u", value: to_ratio_string(&self.u) });
        }
        match (&self.kind, &self.custom_moments) {
            (ModelKind::Custom, None) => {
                Err(Error::InvalidModel("CUSTOM model requires custom_moments".into()))
            }
            (ModelKind::Custom, Some(ms)) => {
                let u2 = &self.u * &self.u;
                let mut cap = u2.clone();
                for (i, m) in ms.iter().enumerate() {
                    if m.is_negative() {
                        return Err(Error::InvalidModel(format!("moment m_{} is negative", i + 1)));
                    }
                    if m > &cap {
                        return Err(Error::InvalidModel(format!(
                            "moment m_{} = {} exceeds u^{} = {}",
                            i + 1,
                            to_ratio_string(m),
                            2 * (i + 1),
                            to_ratio_string(&cap)
                        )));
                    }
                    cap *= &u2;
                }
                Ok(())
            }
            (_, Some(_)) => {
                Err(Error::InvalidModel("custom_moments given for a non-CUSTOM model".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn u(&self) -> &Rational {
        &self.u
    }

    pub fn custom_moments(&self) -> Option<&[Rational]> {
        self.custom_moments.as_deref()
    }

    /// Same family with half-width scaled by `factor`; custom moments scale by `factor^{2j}`.
    pub fn scaled(&self, factor: &Rational) -> Result<Self> {
        let custom = self.custom_moments.as_ref().map(|ms| {
            let f2 = factor * factor;
            let mut p = f2.clone();
            ms.iter()
                .map(|m| {
                    let v = m * &p;
                    p *= &f2;
                    v
                })
                .collect()
        });
        Self::new(self.kind, &self.u * factor, custom)
    }

    /// Upper bound on `E(X^{2j})`; `j = 0` gives 1.
    pub fn even_moment(&self, j: usize) -> Result<Rational> {
        if j == 0 {
            return Ok(Rational::one());
        }
        let u2j = num_traits::pow(self.u.clone(), 2 * j);
        match self.kind {
            ModelKind::UniformBounded => Ok(u2j / int(2 * j as u64 + 1)),
            ModelKind::SupportBounded => Ok(u2j),
            ModelKind::Custom => {
                let ms = self.custom_moments.as_deref().unwrap_or_default();
                ms.get(j - 1)
                    .cloned()
                    .ok_or(Error::InsufficientCustomMoments { needed: j, got: ms.len() })
            }
        }
    }
}

/// Truncated even series `c_0 + c_1 z^2 + ... + c_K z^{2K}` with
/// `c_j >= E(S^{2j}) / (2j)!`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MomentSeries {
    coeffs: Vec<Rational>,
}

impl MomentSeries {
    /// The series of the zero variable: `[1, 0, ..., 0]`.
    pub fn identity(order: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); order + 1];
        coeffs[0] = Rational::one();
        Self { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<Rational>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidModel("series needs order >= 1".into()));
        }
        if !coeffs[0].is_one() {
            return Err(Error::InvalidModel("series must have c_0 = 1".into()));
        }
        if coeffs.iter().any(Signed::is_negative) {
            return Err(Error::InvalidModel("series coefficients must be nonnegative".into()));
        }
        Ok(Self { coeffs })
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> Option<&Rational> {
        self.coeffs.get(j)
    }

    /// Series truncated to a lower order.
    pub fn truncated(&self, order: usize) -> Self {
        let keep = order.min(self.order()) + 1;
        Self { coeffs: self.coeffs[..keep].to_vec() }
    }

    /// Integer numerators over one common denominator.
    fn over_common_denominator(&self) -> (Vec<BigInt>, BigInt) {
        let den = self.coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let nums = self.coeffs.iter().map(|c| c.numer() * (&den / c.denom())).collect();
        (nums, den)
    }

    // Convolution on integer numerators; only the final coefficients are reduced.
    fn mul_unchecked(&self, other: &Self) -> Self {
        let order = self.order();
        let (na, da) = self.over_common_denominator();
        let (nb, db) = if std::ptr::eq(self, other) { (na.clone(), da.clone()) } else { other.over_common_denominator() };
        let den = da * db;
        let coeffs = (0..=order)
            .map(|j| {
                let mut acc = BigInt::zero();
                for i in 0..=j {
                    if !na[i].is_zero() && !nb[j - i].is_zero() {
                        acc += &na[i] * &nb[j - i];
                    }
                }
                Rational::new(acc, den.clone())
            })
            .collect();
        Self { coeffs }
    }
}

pub fn series_for_variable(model: &MomentModel, order: usize) -> Result<MomentSeries> {
    if order == 0 {
        return Err(Error::NonPositive { what: "series order K", value: "0".into() });
    }
    let coeffs = (0..=order)
        .map(|j| Ok(model.even_moment(j)? / Rational::from_integer(factorial(2 * j))))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentSeries { coeffs })
}

/// Truncated Cauchy product over even powers (series of an independent sum).
pub fn series_product(a: &MomentSeries, b: &MomentSeries) -> Result<MomentSeries> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch { left: a.order(), right: b.order() });
    }
    Ok(a.mul_unchecked(b))
}

/// `n`-fold product of `a` with itself by binary exponentiation;
/// `n = 0` yields the identity series.
pub fn series_power(a: &MomentSeries, n: u64) -> MomentSeries {
    let mut result = MomentSeries::identity(a.order());
    let mut base = a.clone();
    let mut n = n;
    let mut first = true;
    while n > 0 {
        if n & 1 == 1 {
            result = if first { base.clone() } else { result.mul_unchecked(&base) };
            first = false;
        }
        n >>= 1;
        if n > 0 {
            base = base.mul_unchecked(&base);
        }
    }
    result
}

/// `(2k)! * c_k`, an upper bound on `E(S^{2k})`.
pub fn moment_bound(s: &MomentSeries, k: usize) -> Result<Rational> {
    let c = s
        .coeff(k)
        .ok_or(Error::OrderExceedsTruncation { k, order: s.order() })?;
    Ok(c * Rational::from_integer(factorial(2 * k)))
}

/// Closed forms of `E(S_n^{2k})` for `n` uniform `±u` variables, `2k <= 8`.
pub fn closed_form_moment(n: u64, u: &Rational, k: usize) -> Result<Rational> {
    if n == 0 {
        return Err(Error::NonPositive { what: "n", value: "0".into() });
    }
    if !is_positive(u) {
        return Err(Error::NonPositive { what: "u", value: to_ratio_string(u) });
    }
    let n = BigInt::from(n);
    // falling factorials n, n(n-1), n(n-1)(n-2), n(n-1)(n-2)(n-3)
    let f1 = Rational::from_integer(n.clone());
    let f2 = &f1 * Rational::from_integer(&n - 1);
    let f3 = &f2 * Rational::from_integer(&n - 2);
    let f4 = &f3 * Rational::from_integer(&n - 3);
    let r = |a: i64, b: i64| crate::rational::ratio(a, b);
    let poly = match k {
        1 => r(1, 3) * f1,
        2 => r(1, 5) * f1 + r(1, 3) * f2,
        3 => r(1, 7) * f1 + f2 + r(5, 9) * f3,
        4 => r(1, 9) * f1 + r(41, 15) * f2 + r(14, 3) * f3 + r(35, 27) * f4,
        _ => return Err(Error::NoClosedForm(2 * k)),
    };
    Ok(num_traits::pow(u.clone(), 2 * k) * poly)
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Direct evaluation of the multinomial moment formula: the sum over all
/// `k_1 + ... + k_n = k` of `(2k)! * prod_i E(X_i^{2k_i}) / (2k_i)!`.
pub fn brute_force_moment(models: &[MomentModel], k: usize, cap: u128) -> Result<Rational> {
    if models.is_empty() {
        return Ok(if k == 0 { Rational::one() } else { Rational::zero() });
    }
    let n = models.len() as u128;
    let count = binomial(k as u128 + n - 1, n - 1).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::CompositionCap { count, cap });
    }
    // per-variable table of E(X^{2j}) / (2j)!
    let tables = models
        .iter()
        .map(|m| {
            (0..=k)
                .map(|j| Ok(m.even_moment(j)? / Rational::from_integer(factorial(2 * j))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    fn walk(tables: &[Vec<Rational>], remaining: usize, acc: &Rational, total: &mut Rational) {
        match tables.split_first() {
            None => {}
            Some((last, [])) => *total += acc * &last[remaining],
            Some((head, rest)) => {
                for part in 0..=remaining {
                    if head[part].is_zero() {
                        continue;
                    }
                    walk(rest, remaining - part, &(acc * &head[part]), total);
                }
            }
        }
    }

    let mut total = Rational::zero();
    walk(&tables, k, &Rational::one(), &mut total);
    Ok(total * Rational::from_integer(factorial(2 * k)))
}
