//! Monte Carlo validation of the analytic bounds.
//!
//! Each replication streams one error path, tracking `max_i |S_i|` and
//! `|S_n|` without storing the path. Replications are grouped in fixed-size
//! chunks; chunk results are merged in chunk order, so reports are
//! bit-identical for any worker count.

pub mod ci;
pub mod dd;
pub mod rng;

use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::rational::{to_f64, Rational};
use crate::scenario::Scenario;
use crate::tail::TailBoundResult;

pub use ci::confidence_interval;
use dd::DoubleDouble;

/// Default two-sided confidence level for every interval in a report.
pub const DEFAULT_CI_LEVEL: f64 = 0.99;
/// Default cap on replications x steps.
pub const DEFAULT_OPERATION_CAP: u128 = 100_000_000_000;
pub const DESK_MAX_REPLICATIONS: u64 = 1_000_000;
pub const DESK_MAX_STEPS: u64 = 1_000_000;

const CHUNK: u64 = 1024;

/// Distribution of the data `d_i` fed to the binary32 accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataModel {
    /// Uniform on `[lo, hi)`, rounded to binary32.
    Uniform { lo: f64, hi: f64 },
    /// Log-uniform on `[lo, hi)` with `0 < lo < hi`.
    LogUniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

impl DataModel {
    fn validate(&self, n: u64) -> Result<()> {
        let (lo, hi) = match *self {
            DataModel::Uniform { lo, hi } => (lo, hi),
            DataModel::LogUniform { lo, hi } => {
                if !(lo > 0.0) {
                    return Err(Error::InvalidConfig("log-uniform data needs lo > 0".into()));
                }
                (lo, hi)
            }
            DataModel::Constant { value } => (value, value),
        };
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidConfig(format!("bad data range [{lo}, {hi})")));
        }
        let worst = lo.abs().max(hi.abs()) * n as f64;
        if worst >= f64::from(f32::MAX) {
            return Err(Error::NonFinite(format!(
                "accumulating {n} values of magnitude up to {} may overflow binary32",
                lo.abs().max(hi.abs())
            )));
        }
        Ok(())
    }

    #[inline]
    fn sample<R: RngCore>(&self, rng: &mut R) -> f32 {
        match *self {
            DataModel::Uniform { lo, hi } => below(lo + (hi - lo) * rng::open_unit(rng), hi),
            DataModel::LogUniform { lo, hi } => {
                let (a, b) = (lo.ln(), hi.ln());
                below((a + (b - a) * rng::open_unit(rng)).exp(), hi)
            }
            DataModel::Constant { value } => value as f32,
        }
    }
}

#[inline]
fn below(v: f64, hi: f64) -> f32 {
    let x = v as f32;
    if f64::from(x) >= hi && hi > v {
        x.next_down()
    } else {
        x
    }
}

/// Source of the simulated errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// Draw every variable of the scenario uniformly on `±u`, group after group;
    /// the partial sums run over individual variables.
    Model { scenario: Scenario },
    /// Inject `m` uniform `±u` errors per step into the filter recurrence and
    /// track the output error for `horizon` steps.
    Filter { b1: f64, b2: f64, horizon: u64, #[serde(with = "crate::rational::ratio_str")] u: Rational, m: u64 },
    /// Run the accumulation in binary32 and measure its actual error against a
    /// double-double reference.
    Hardware { n: u64, data: DataModel },
}

impl Noise {
    fn steps(&self) -> u128 {
        match self {
            Noise::Model { scenario } => scenario.total_count(),
            Noise::Filter { horizon, m, .. } => u128::from(*horizon) * u128::from(*m),
            Noise::Hardware { n, .. } => u128::from(*n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: u64,
    pub noise: Noise,
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    #[serde(default = "default_cap")]
    pub operation_cap: u128,
    /// Lift the desk-scale limits on replications and path length.
    #[serde(default)]
    pub allow_large: bool,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_level() -> f64 {
    DEFAULT_CI_LEVEL
}

fn default_cap() -> u128 {
    DEFAULT_OPERATION_CAP
}

impl SimConfig {
    pub fn new(seed: u64, replications: u64, noise: Noise, epsilon_grid: Vec<f64>) -> Self {
        Self {
            seed,
            replications,
            noise,
            epsilon_grid,
            ci_level: DEFAULT_CI_LEVEL,
            operation_cap: DEFAULT_OPERATION_CAP,
            allow_large: false,
            threads: None,
        }
    }

    pub fn estimated_operations(&self) -> u128 {
        u128::from(self.replications) * self.noise.steps()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::NonPositive { what: "replications", value: "0".into() });
        }
        if self.epsilon_grid.is_empty() {
            return Err(Error::InvalidConfig("epsilon grid is empty".into()));
        }
        if self.epsilon_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidConfig("epsilon grid values must be positive and finite".into()));
        }
        if self.epsilon_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("epsilon grid must be strictly increasing".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidConfig(format!("ci level {} not in (0, 1)", self.ci_level)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        match &self.noise {
            Noise::Model { scenario } => scenario.validate()?,
            Noise::Filter { b1, b2, horizon, m, .. } => {
                FilterSpec::new(*b1, *b2)?;
                if *horizon == 0 || *m == 0 {
                    return Err(Error::NonPositive { what: "horizon and m", value: format!("{horizon}, {m}") });
                }
            }
            Noise::Hardware { n, data } => {
                if *n == 0 {
                    return Err(Error::NonPositive { what: "n", value: "0".into() });
                }
                data.validate(*n)?;
            }
        }
        if !self.allow_large {
            let steps = self.noise.steps();
            if self.replications > DESK_MAX_REPLICATIONS || steps > u128::from(DESK_MAX_STEPS) {
                return Err(Error::InvalidConfig(format!(
                    "outside desk scale (replications <= {DESK_MAX_REPLICATIONS}, steps <= {DESK_MAX_STEPS}): \
                     replications = {}, steps = {steps}",
                    self.replications
                )));
            }
        }
        let estimated = self.estimated_operations();
        if estimated > self.operation_cap {
            return Err(Error::CapExceeded { estimated, cap: self.operation_cap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub epsilon: f64,
    /// Replications with `max_i |S_i| >= epsilon`.
    pub count_max: u64,
    /// Replications with `|S_n| >= epsilon`.
    pub count_end: u64,
    pub p_max: f64,
    pub p_end: f64,
    /// Confidence interval of `p_max`.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Confidence interval of `p_end`.
    pub ci_end_lo: f64,
    pub ci_end_hi: f64,
}

/// Sample mean of `S_n^{2k}` with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoment {
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub replications: u64,
    pub rng: String,
    pub ci_level: f64,
    pub grid: Vec<GridPoint>,
    pub endpoint_moments: Vec<EmpiricalMoment>,
    /// Wall-clock time; `None` unless timing was requested, so reports stay reproducible.
    pub runtime_seconds: Option<f64>,
}

impl SimReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[derive(Clone)]
struct ChunkStats {
    hist_max: Vec<u64>,
    hist_end: Vec<u64>,
    // S_n^2 and its square, then S_n^4 and its square
    power_sums: [f64; 4],
}

impl ChunkStats {
    fn new(grid_len: usize) -> Self {
        Self { hist_max: vec![0; grid_len + 1], hist_end: vec![0; grid_len + 1], power_sums: [0.0; 4] }
    }

    fn record(&mut self, grid: &[f64], max_abs: f64, end: f64) {
        self.hist_max[grid.partition_point(|e| *e <= max_abs)] += 1;
        self.hist_end[grid.partition_point(|e| *e <= end.abs())] += 1;
        let s2 = end * end;
        let s4 = s2 * s2;
        self.power_sums[0] += s2;
        self.power_sums[1] += s4;
        self.power_sums[2] += s4;
        self.power_sums[3] += s4 * s4;
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.hist_max.iter_mut().zip(&other.hist_max) {
            *a += b;
        }
        for (a, b) in self.hist_end.iter_mut().zip(&other.hist_end) {
            *a += b;
        }
        for (a, b) in self.power_sums.iter_mut().zip(&other.power_sums) {
            *a += b;
        }
    }
}

/// Compiled per-replication path generator.
enum PathKernel {
    Model { groups: Vec<(f64, u64)> },
    Filter { b1: f64, b2: f64, horizon: u64, u: f64, m: u64 },
    Hardware { n: u64, data: DataModel },
}

impl PathKernel {
    fn new(noise: &Noise) -> Self {
        match noise {
            Noise::Model { scenario } => Self::Model {
                groups: scenario.groups.iter().map(|g| (to_f64(g.model.u()), g.count)).collect(),
            },
            Noise::Filter { b1, b2, horizon, u, m } => {
                Self::Filter { b1: *b1, b2: *b2, horizon: *horizon, u: to_f64(u), m: *m }
            }
            Noise::Hardware { n, data } => Self::Hardware { n: *n, data: *data },
        }
    }

    /// Returns `(max_i |S_i|, S_n)`.
    fn run<R: RngCore>(&self, rng: &mut R) -> Result<(f64, f64)> {
        match *self {
            PathKernel::Model { ref groups } => {
                let (mut s, mut max_abs) = (0.0f64, 0.0f64);
                for &(u, count) in groups {
                    for _ in 0..count {
                        s += rng::symmetric(rng, u);
                        max_abs = max_abs.max(s.abs());
                    }
                }
                Ok((max_abs, s))
            }
            PathKernel::Filter { b1, b2, horizon, u, m } => {
                let (mut e2, mut e1, mut max_abs) = (0.0f64, 0.0f64, 0.0f64);
                for _ in 0..horizon {
                    let injected: f64 = (0..m).map(|_| rng::symmetric(rng, u)).sum();
                    let e = injected - b1 * e1 - b2 * e2;
                    e2 = e1;
                    e1 = e;
                    max_abs = max_abs.max(e.abs());
                }
                Ok((max_abs, e1))
            }
            PathKernel::Hardware { n, data } => {
                let mut a = 0.0f32;
                let mut reference = DoubleDouble::ZERO;
                let mut max_abs = 0.0f64;
                let mut err = 0.0f64;
                for _ in 0..n {
                    let d = data.sample(rng);
                    a += d;
                    if !a.is_finite() {
                        return Err(Error::NonFinite("binary32 accumulator overflowed".into()));
                    }
                    reference = reference + f64::from(d);
                    err = (DoubleDouble::from(a) - reference).to_f64();
                    max_abs = max_abs.max(err.abs());
                }
                Ok((max_abs, err))
            }
        }
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Estimated exceedance probabilities of the max-excursion and endpoint events.
pub fn simulate_paths(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let kernel = PathKernel::new(&config.noise);
    let grid = &config.epsilon_grid;
    let reps = config.replications;
    let chunks = reps.div_ceil(CHUNK);

    let per_chunk: Vec<Result<ChunkStats>> = with_pool(config.threads, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut stats = ChunkStats::new(grid.len());
                for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                    let mut rng = rng::substream(config.seed, r);
                    let (max_abs, end) = kernel.run(&mut rng)?;
                    stats.record(grid, max_abs, end);
                }
                Ok(stats)
            })
            .collect()
    })?;

    let mut total = ChunkStats::new(grid.len());
    for chunk in per_chunk {
        total.merge(&chunk?);
    }

    let suffix = |hist: &[u64]| -> Vec<u64> {
        // count of replications whose statistic reached grid[j]
        let mut out = vec![0u64; grid.len()];
        let mut acc = 0u64;
        for j in (0..grid.len()).rev() {
            acc += hist[j + 1];
            out[j] = acc;
        }
        out
    };
    let counts_max = suffix(&total.hist_max);
    let counts_end = suffix(&total.hist_end);
    let n = reps as f64;
    let points = grid
        .iter()
        .zip(counts_max.iter().zip(&counts_end))
        .map(|(&epsilon, (&count_max, &count_end))| {
            let (ci_lo, ci_hi) = confidence_interval(count_max, reps, config.ci_level);
            let (ci_end_lo, ci_end_hi) = confidence_interval(count_end, reps, config.ci_level);
            GridPoint {
                epsilon,
                count_max,
                count_end,
                p_max: count_max as f64 / n,
                p_end: count_end as f64 / n,
                ci_lo,
                ci_hi,
                ci_end_lo,
                ci_end_hi,
            }
        })
        .collect();

    let moment = |k: usize, sum: f64, sum_sq: f64| {
        let mean = sum / n;
        let var = if reps > 1 { ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0) } else { 0.0 };
        EmpiricalMoment { k, mean, std_error: (var / n).sqrt() }
    };
    let endpoint_moments = vec![
        moment(1, total.power_sums[0], total.power_sums[1]),
        moment(2, total.power_sums[2], total.power_sums[3]),
    ];

    Ok(SimReport {
        seed: config.seed,
        replications: reps,
        rng: rng::RNG_NAME.to_string(),
        ci_level: config.ci_level,
        grid: points,
        endpoint_moments,
        runtime_seconds: None,
    })
}

/// Like [`simulate_paths`] but records the wall-clock runtime.
pub fn simulate_paths_timed(config: &SimConfig) -> Result<SimReport> {
    let start = Instant::now();
    let mut report = simulate_paths(config)?;
    report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// Per-step rounding errors of the binary32 accumulation, normalized by
/// `u = ulp(a_i) / 2` of the freshly rounded accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareStats {
    pub steps: u64,
    pub mean_over_u: f64,
    /// Half-width of the confidence interval on `mean_over_u`.
    pub mean_ci_halfwidth: f64,
    /// `E((X/u)^{2j})` for `2j = 2, 4, 6, 8`.
    pub even_moments_over_u: [f64; 4],
    /// `E((X/u)^{2j+1})` for `2j+1 = 1, 3, 5, 7`.
    pub odd_moments_over_u: [f64; 4],
    /// `mean / standard deviation` of the normalized errors.
    pub symmetry_ratio: f64,
    /// Reference values for the uniform law: `1/3, 1/5, 1/7, 1/9`.
    pub uniform_reference: [f64; 4],
}

#[inline]
fn ulp_f32(a: f32) -> f64 {
    let bits = a.abs().to_bits();
    let exp_field = (bits >> 23) as i32;
    let e = if exp_field == 0 { -126 } else { exp_field - 127 };
    2f64.powi(e - 23)
}

/// Runs the binary32 accumulation `R` times over `n` data points and
/// collects moment statistics of the per-step rounding errors.
pub fn hardware_error_paths(
    n: u64,
    data: DataModel,
    seed: u64,
    replications: u64,
    level: f64,
    operation_cap: u128,
) -> Result<HardwareStats> {
    if n == 0 || replications == 0 {
        return Err(Error::NonPositive { what: "n and replications", value: format!("{n}, {replications}") });
    }
    data.validate(n)?;
    let estimated = u128::from(n) * u128::from(replications);
    if estimated > operation_cap {
        return Err(Error::CapExceeded { estimated, cap: operation_cap });
    }
    let chunks = replications.div_ceil(CHUNK);
    // power sums of X/u for powers 1..=8
    let per_chunk: Vec<Result<[f64; 8]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sums = [0.0f64; 8];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replications) {
                let mut rng = rng::substream(seed, r);
                let mut a = 0.0f32;
                for _ in 0..n {
                    let d = data.sample(&mut rng);
                    let exact = DoubleDouble::from(a) + f64::from(d);
                    a += d;
                    if !a.is_finite() {
                        return Err(Error::NonFinite("binary32 accumulator overflowed".into()));
                    }
                    let err = (DoubleDouble::from(a) - exact).to_f64();
                    let x = err / (ulp_f32(a) / 2.0);
                    let mut p = 1.0;
                    for s in sums.iter_mut() {
                        p *= x;
                        *s += p;
                    }
                }
            }
            Ok(sums)
        })
        .collect();
    let mut sums = [0.0f64; 8];
    for chunk in per_chunk {
        for (a, b) in sums.iter_mut().zip(chunk?) {
            *a += b;
        }
    }
    let steps = n * replications;
    let count = steps as f64;
    let m: Vec<f64> = sums.iter().map(|s| s / count).collect();
    let var = (m[1] - m[0] * m[0]).max(0.0);
    let sd = var.sqrt();
    let z = statrs::function::erf::erfc_inv(1.0 - level) * std::f64::consts::SQRT_2;
    Ok(HardwareStats {
        steps,
        mean_over_u: m[0],
        mean_ci_halfwidth: z * sd / count.sqrt(),
        even_moments_over_u: [m[1], m[3], m[5], m[7]],
        odd_moments_over_u: [m[0], m[2], m[4], m[6]],
        symmetry_ratio: if sd > 0.0 { m[0] / sd } else { 0.0 },
        uniform_reference: [1.0 / 3.0, 1.0 / 5.0, 1.0 / 7.0, 1.0 / 9.0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub epsilon: f64,
    pub k: usize,
    pub bound: f64,
    pub empirical: f64,
    pub ci_lo: f64,
    /// `bound / empirical`; `None` when nothing was observed.
    pub slack: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub pass: bool,
    /// Thresholds at which the lower confidence limit exceeded the bound.
    pub failures: Vec<f64>,
    pub points: Vec<ValidationPoint>,
}

/// Checks analytic bounds against a simulation: PASS when, at every
/// threshold, the lower confidence limit of the empirical probability does
/// not exceed the bound. Bounds with the Levy factor are compared against
/// the max-excursion event, the others against the endpoint event.
pub fn validate_bound(sim: &SimReport, analytic: &[TailBoundResult]) -> Result<Validation> {
    let mut points = Vec::with_capacity(analytic.len());
    for a in analytic {
        let g = sim
            .grid
            .iter()
            .find(|g| ((g.epsilon - a.epsilon) / a.epsilon).abs() <= 1e-12)
            .ok_or_else(|| Error::InvalidConfig(format!("epsilon {} is not on the simulation grid", a.epsilon)))?;
        let (empirical, ci_lo) = if a.levy_factor_applied { (g.p_max, g.ci_lo) } else { (g.p_end, g.ci_end_lo) };
        points.push(ValidationPoint {
            epsilon: a.epsilon,
            k: a.k_used,
            bound: a.probability,
            empirical,
            ci_lo,
            slack: (empirical > 0.0).then(|| a.probability / empirical),
            pass: ci_lo <= a.probability,
        });
    }
    let mut failures: Vec<f64> = points.iter().filter(|p| !p.pass).map(|p| p.epsilon).collect();
    failures.dedup();
    Ok(Validation { pass: failures.is_empty(), failures, points })
}

/// One threshold of the maximal-inequality check `P(max) <= 2 P(end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyCheckPoint {
    pub epsilon: f64,
    pub p_max: f64,
    pub p_end: f64,
    /// Lower confidence limit of `P(max)`.
    pub max_lo: f64,
    /// Twice the upper confidence limit of `P(end)`.
    pub twice_end_hi: f64,
    pub pass: bool,
}

/// Compares the max-excursion and endpoint estimates at every threshold.
/// A point passes unless the max event is significantly more frequent than
/// twice the endpoint event.
pub fn levy_factor_check(sim: &SimReport) -> Vec<LevyCheckPoint> {
    sim.grid
        .iter()
        .map(|g| LevyCheckPoint {
            epsilon: g.epsilon,
            p_max: g.p_max,
            p_end: g.p_end,
            max_lo: g.ci_lo,
            twice_end_hi: 2.0 * g.ci_end_hi,
            pass: g.ci_lo <= 2.0 * g.ci_end_hi,
        })
        .collect()
}

/// Sample mean of `S_n^{2k}` against the analytic moment bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Passes when the lower confidence limit of the sample mean does not exceed the bound.
pub fn endpoint_moment_check(sim: &SimReport, series: &crate::moment::MomentSeries) -> Result<Vec<MomentCheck>> {
    let z = statrs::function::erf::erfc_inv(1.0 - sim.ci_level) * std::f64::consts::SQRT_2;
    sim.endpoint_moments
        .iter()
        .filter(|m| m.k <= series.order())
        .map(|m| {
            let bound = to_f64(&crate::moment::moment_bound(series, m.k)?);
            Ok(MomentCheck {
                k: m.k,
                mean: m.mean,
                std_error: m.std_error,
                bound,
                pass: m.mean - z * m.std_error <= bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use crate::scenario::accumulation_scenario;
    use crate::tail::tail_bound_at;

    fn model(n: u64, u: i64) -> Noise {
        Noise::Model { scenario: accumulation_scenario(n, 1, &int(u)).unwrap() }
    }

    #[test]
    fn single_variable_never_exceeds_support() {
        for seed in [0, 1, 99] {
            let cfg = SimConfig::new(seed, 2000, model(1, 1), vec![2.0]);
            let r = simulate_paths(&cfg).unwrap();
            assert_eq!(r.grid[0].count_max, 0);
            assert_eq!(r.grid[0].count_end, 0);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(1, 0, model(10, 1), vec![1.0]);
        assert!(cfg.validate().is_err());
        cfg.replications = 10;
        cfg.epsilon_grid = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.epsilon_grid = vec![1.0, 2.0];
        cfg.operation_cap = 50;
        assert!(matches!(simulate_paths(&cfg), Err(Error::CapExceeded { estimated: 100, cap: 50 })));
        let big = SimConfig::new(1, 10, model(2_000_000, 1), vec![1.0]);
        assert!(big.validate().is_err());
        let hw = SimConfig::new(1, 1, Noise::Hardware { n: 10, data: DataModel::Uniform { lo: 1e38, hi: 3e38 } }, vec![1.0]);
        assert!(matches!(hw.validate(), Err(Error::NonFinite(_))));
    }

    #[test]
    fn counts_are_ordered_and_deterministic() {
        let grid: Vec<f64> = (1..=12).map(|i| i as f64 * 2.0).collect();
        let mut cfg = SimConfig::new(42, 3000, model(200, 1), grid);
        let a = simulate_paths(&cfg).unwrap();
        cfg.threads = Some(3);
        let b = simulate_paths(&cfg).unwrap();
        assert_eq!(a, b);
        for w in a.grid.windows(2) {
            assert!(w[1].count_max <= w[0].count_max);
            assert!(w[1].count_end <= w[0].count_end);
        }
        for g in &a.grid {
            assert!(g.count_end <= g.count_max);
        }
    }

    #[test]
    fn endpoint_moments_track_the_analytic_bound() {
        let cfg = SimConfig::new(5, 20_000, model(100, 1), vec![1.0]);
        let r = simulate_paths(&cfg).unwrap();
        // E(S^2) = n/3 exactly for uniform errors
        let m1 = &r.endpoint_moments[0];
        assert!((m1.mean - 100.0 / 3.0).abs() < 4.0 * m1.std_error);
        let m2 = &r.endpoint_moments[1];
        let bound = 100.0 / 5.0 + 100.0 * 99.0 / 3.0;
        assert!(m2.mean <= bound + 4.0 * m2.std_error);
    }

    #[test]
    fn filter_noise_identity_limit() {
        // b1 = 0, b2 tiny: the output error is essentially the last injection
        let noise = Noise::Filter { b1: 0.0, b2: 1e-300, horizon: 50, u: int(1), m: 1 };
        let r = simulate_paths(&SimConfig::new(3, 2000, noise, vec![1.0])).unwrap();
        assert_eq!(r.grid[0].count_end, 0);
    }

    #[test]
    fn hardware_zero_data_has_no_error() {
        let stats = hardware_error_paths(100, DataModel::Constant { value: 0.0 }, 1, 10, 0.99, u128::MAX).unwrap();
        assert_eq!(stats.mean_over_u, 0.0);
        assert_eq!(stats.even_moments_over_u, [0.0; 4]);
        let noise = Noise::Hardware { n: 100, data: DataModel::Constant { value: 0.0 } };
        let r = simulate_paths(&SimConfig::new(1, 10, noise, vec![1e-30])).unwrap();
        assert_eq!(r.grid[0].count_max, 0);
    }

    #[test]
    fn hardware_errors_look_uniform() {
        let stats = hardware_error_paths(1000, DataModel::Uniform { lo: 1.0, hi: 2.0 }, 11, 200, 0.99, u128::MAX).unwrap();
        assert!(stats.mean_over_u.abs() < 0.05);
        assert!(stats.even_moments_over_u[0] <= 0.40);
        assert!(stats.odd_moments_over_u[1].abs() < 0.05);
    }

    #[test]
    fn validate_contract() {
        let grid = vec![5.0, 10.0, 20.0];
        let sim = simulate_paths(&SimConfig::new(9, 5000, model(100, 1), grid.clone())).unwrap();
        let series = accumulation_scenario(100, 1, &int(1)).unwrap().series(4).unwrap();
        let bounds: Vec<_> = grid.iter().map(|e| tail_bound_at(&series, 2, *e, true).unwrap()).collect();
        assert!(validate_bound(&sim, &bounds).unwrap().pass);

        let mut fake = sim.clone();
        fake.grid[1].p_max = 0.30;
        fake.grid[1].ci_lo = 0.26;
        let mut tight = bounds.clone();
        tight[1].probability = 0.20;
        let v = validate_bound(&fake, &tight).unwrap();
        assert!(!v.pass);
        assert_eq!(v.failures, vec![10.0]);

        let mut zero = sim.clone();
        for g in &mut zero.grid {
            g.count_max = 0;
            g.p_max = 0.0;
            g.ci_lo = 0.0;
        }
        let tiny: Vec<_> = bounds.iter().map(|b| TailBoundResult { probability: 1e-30, ..b.clone() }).collect();
        assert!(validate_bound(&zero, &tiny).unwrap().pass);

        let off_grid = vec![tail_bound_at(&series, 2, 7.0, true).unwrap()];
        assert!(validate_bound(&sim, &off_grid).is_err());
    }

    #[test]
    fn ulp_of_f32() {
        assert_eq!(ulp_f32(1.0), 2f64.powi(-23));
        assert_eq!(ulp_f32(1.5), 2f64.powi(-23));
        assert_eq!(ulp_f32(2.0), 2f64.powi(-22));
        assert_eq!(ulp_f32(-3.0), 2f64.powi(-22));
        assert_eq!(ulp_f32(0.0), 2f64.powi(-149));
    }
}
