//! Error-variable families built from concrete numerical programs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment::{series_for_variable, series_power, series_product, MomentModel, MomentSeries};
use crate::rational::{int, is_positive, pow2, to_ratio_string, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Representation {
    SignMagnitude,
    TwosComplement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExponentMode {
    Floating,
    /// Fixed point: the exponent is a property of the type.
    Fixed { exponent: i32 },
}

/// A binary number format with `precision` mantissa bits (leading bit included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpFormat {
    precision: u32,
    representation: Representation,
    mode: ExponentMode,
}

impl FpFormat {
    pub fn new(precision: u32, representation: Representation, mode: ExponentMode) -> Result<Self> {
        if precision < 2 {
            return Err(Error::InvalidConfig(format!("precision must be >= 2, got {precision}")));
        }
        Ok(Self { precision, representation, mode })
    }

    pub fn binary32() -> Self {
        Self { precision: 24, representation: Representation::SignMagnitude, mode: ExponentMode::Floating }
    }

    pub fn binary64() -> Self {
        Self { precision: 53, representation: Representation::SignMagnitude, mode: ExponentMode::Floating }
    }

    pub fn fixed(precision: u32, representation: Representation, exponent: i32) -> Result<Self> {
        Self::new(precision, representation, ExponentMode::Fixed { exponent })
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn mode(&self) -> ExponentMode {
        self.mode
    }

    /// `2^{e - p + 1}`; fixed-point formats ignore `exponent`.
    pub fn ulp(&self, exponent: i32) -> Rational {
        let e = match self.mode {
            ExponentMode::Floating => exponent,
            ExponentMode::Fixed { exponent } => exponent,
        };
        pow2(i64::from(e) - i64::from(self.precision) + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rounding {
    Nearest,
    Directed,
}

/// Symmetric model of one rounding error plus, for directed rounding, the
/// magnitude of the deterministic bias removed by centering.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundingErrorModel {
    pub model: MomentModel,
    pub offset: Option<Rational>,
}

pub fn rounding_error_model(format: &FpFormat, exponent: i32, rounding: Rounding) -> RoundingErrorModel {
    let half_ulp = format.ulp(exponent) / int(2);
    let model = MomentModel::uniform(half_ulp.clone()).expect("ulp is positive");
    let offset = match rounding {
        Rounding::Nearest => None,
        // a directed rounding error is uniform on [0, ulp) up to sign; centered it is uniform on ±ulp/2
        Rounding::Directed => Some(half_ulp),
    };
    RoundingErrorModel { model, offset }
}

/// `count` independent copies of one symmetric error variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorVariableSpec {
    pub model: MomentModel,
    pub count: u64,
    #[serde(default)]
    pub label: String,
}

impl ErrorVariableSpec {
    pub fn new(model: MomentModel, count: u64, label: impl Into<String>) -> Result<Self> {
        if count == 0 {
            return Err(Error::NonPositive { what: "group count", value: "0".into() });
        }
        Ok(Self { model, count, label: label.into() })
    }
}

/// A finite family of independent symmetric error variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub description: String,
    /// Set when every error weight vanished: the accumulated error is identically zero.
    #[serde(default)]
    pub degenerate: bool,
    pub groups: Vec<ErrorVariableSpec>,
}

impl Scenario {
    pub fn new(groups: Vec<ErrorVariableSpec>, description: impl Into<String>) -> Result<Self> {
        let scenario = Self { description: description.into(), degenerate: false, groups };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn degenerate(description: impl Into<String>) -> Self {
        Self { description: description.into(), degenerate: true, groups: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.groups {
            g.model.validate()?;
            if g.count == 0 {
                return Err(Error::NonPositive { what: "group count", value: "0".into() });
            }
        }
        if self.groups.is_empty() && !self.degenerate {
            return Err(Error::InvalidConfig("scenario has no error variables".into()));
        }
        Ok(())
    }

    pub fn total_count(&self) -> u128 {
        self.groups.iter().map(|g| u128::from(g.count)).sum()
    }

    /// Largest possible `|S|`: the sum of all half-widths.
    pub fn deterministic_max(&self) -> Rational {
        self.groups.iter().fold(int(0), |acc, g| acc + g.model.u() * int(g.count))
    }

    /// Groups with identical models merged, in first-appearance order.
    pub fn merged_groups(&self) -> Vec<(MomentModel, u64)> {
        let mut merged: Vec<(MomentModel, u64)> = Vec::new();
        for g in &self.groups {
            match merged.iter_mut().find(|(m, _)| *m == g.model) {
                Some((_, c)) => *c = c.saturating_add(g.count),
                None => merged.push((g.model.clone(), g.count)),
            }
        }
        merged
    }

    /// Moment series of the total error: one power per distinct model, multiplied together.
    pub fn series(&self, order: usize) -> Result<MomentSeries> {
        let mut acc = MomentSeries::identity(order);
        for (model, count) in self.merged_groups() {
            let single = series_for_variable(&model, order)?;
            acc = series_product(&acc, &series_power(&single, count))?;
        }
        Ok(acc)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    /// Plain-text (TOML) rendering.
    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let sc: Self = toml::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.description)?;
        for g in &self.groups {
            write!(f, "; {} x {:?}(u = {})", g.count, g.model.kind(), to_ratio_string(g.model.u()))?;
        }
        Ok(())
    }
}

fn check_u(u: &Rational, what: &'static str) -> Result<()> {
    if !is_positive(u) {
        return Err(Error::NonPositive { what, value: to_ratio_string(u) });
    }
    Ok(())
}

/// `n` iterations of an accumulation, each carrying `m` errors of half-width `u`.
pub fn accumulation_scenario(n: u64, m: u64, u: &Rational) -> Result<Scenario> {
    if n == 0 || m == 0 {
        return Err(Error::NonPositive { what: "n and m", value: format!("n = {n}, m = {m}") });
    }
    check_u(u, "u")?;
    let count = n
        .checked_mul(m)
        .ok_or_else(|| Error::CountOverflow(format!("n * m = {n} * {m} overflows 64 bits")))?;
    let group = ErrorVariableSpec::new(MomentModel::uniform(u.clone())?, count, "rounding")?;
    Scenario::new(vec![group], format!("accumulation of n = {n} terms with m = {m} errors each"))
}

/// Accumulation of sensor readings: one rounding error and one sensor error per step.
pub fn sensor_scenario(n: u64, u_round: &Rational, u_sensor: &Rational) -> Result<Scenario> {
    if n == 0 {
        return Err(Error::NonPositive { what: "n", value: "0".into() });
    }
    check_u(u_round, "u_round")?;
    check_u(u_sensor, "u_sensor")?;
    Scenario::new(
        vec![
            ErrorVariableSpec::new(MomentModel::uniform(u_round.clone())?, n, "rounding")?,
            ErrorVariableSpec::new(MomentModel::uniform(u_sensor.clone())?, n, "sensor")?,
        ],
        format!("accumulation of n = {n} sensor readings"),
    )
}
