use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use levybound::error::{Error, Result};
use levybound::moment::{ModelKind, DEFAULT_ORDER};
use levybound::rational::{parse_count, parse_rational, to_f64, Rational};
use levybound::report::{
    check_hypotheses, check_kernel, cmd_epsilon, cmd_filter, cmd_moments, cmd_prob, cmd_simulate, cmd_table1,
    Accumulation, FilterQuery, Format, Kernel, SimNoise, SimulateQuery, DEFAULT_DIGITS,
};
use levybound::scenario::{rounding_error_model, ExponentMode, FpFormat, Representation, Rounding};
use levybound::sim::{DataModel, DEFAULT_CI_LEVEL, DEFAULT_OPERATION_CAP};

#[derive(Parser)]
#[command(name = "levybound", version, about = "Probabilistic bounds on accumulated round-off error")]
struct Cli {
    #[arg(long, value_enum, default_value_t = OutputFormat::Table, global = true)]
    format: OutputFormat,

    /// Significant digits in printed numbers.
    #[arg(long, default_value_t = DEFAULT_DIGITS, global = true)]
    digits: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Uniform,
    Support,
}

#[derive(Subcommand)]
enum Command {
    /// Error threshold exceeded with probability at most P.
    Epsilon {
        #[command(flatten)]
        acc: AccArgs,
        #[arg(long = "P", value_name = "P")]
        probability: String,
        /// Fixed order k (the bound uses E(S^2k)); omitted means the best k.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Bound |S_n| only instead of the running maximum.
        #[arg(long)]
        no_levy: bool,
    },
    /// Probability bound for exceeding a threshold.
    Prob {
        #[command(flatten)]
        acc: AccArgs,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        no_levy: bool,
    },
    /// Recompute the reference table of thresholds.
    Table1 {
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
    },
    /// Stability and error thresholds of y_i = d_i - b1 y_{i-1} - b2 y_{i-2}.
    Filter {
        #[arg(long, allow_hyphen_values = true)]
        b1: String,
        #[arg(long)]
        b2: String,
        /// Horizon: bound the output error at step n.
        #[arg(long)]
        n: String,
        #[arg(long)]
        u: String,
        #[arg(long, default_value_t = 1)]
        m: u64,
        #[arg(long = "P", value_name = "P")]
        probability: String,
        /// Apply the Levy factor to the running maximum (not established for filters).
        #[arg(long)]
        levy: bool,
        #[arg(long, default_value_t = levybound::filter::DEFAULT_BUCKETS)]
        buckets: usize,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
    },
    /// Monte Carlo estimate checked against the analytic bounds.
    Simulate {
        #[command(flatten)]
        acc: AccArgs,
        #[arg(long)]
        reps: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Comma-separated thresholds; omitted builds a grid from normal quantiles.
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
        /// Also put the analytic thresholds at these probabilities on the grid.
        #[arg(long = "P", value_name = "P", value_delimiter = ',')]
        probability: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        grid_points: usize,
        /// Orders k whose bounds are validated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        bound_k: Vec<usize>,
        #[arg(long, value_enum, default_value_t = NoiseKind::Model)]
        noise: NoiseKind,
        /// Data for hardware noise: uniform or log-uniform on [lo, hi), or constant lo.
        #[arg(long, value_enum, default_value_t = DataKind::Uniform)]
        data: DataKind,
        #[arg(long, default_value_t = 1.0)]
        lo: f64,
        #[arg(long, default_value_t = 2.0)]
        hi: f64,
        #[arg(long)]
        threads: Option<usize>,
        /// Cap on replications x steps.
        #[arg(long)]
        cap: Option<String>,
        /// Lift the desk-scale limits (1e6 replications, 1e6 steps).
        #[arg(long)]
        allow_large: bool,
        /// Record wall-clock runtime (makes the output non-reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(long, default_value_t = DEFAULT_CI_LEVEL)]
        ci_level: f64,
    },
    /// Exact bounds on E(S^2k) with closed-form cross-checks.
    Moments {
        #[command(flatten)]
        acc: AccArgs,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKind {
    Model,
    Hardware,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Uniform,
    LogUniform,
    Constant,
}

#[derive(Args)]
struct AccArgs {
    /// Iterations, e.g. 1e9 or 10^9.
    #[arg(long)]
    n: String,
    /// Errors per iteration.
    #[arg(long, default_value = "1")]
    m: String,
    /// Half-width of each error: 2^-24, 1/3 or a decimal.
    #[arg(long, conflicts_with = "precision")]
    u: Option<String>,
    /// Derive u from a binary format with this many mantissa bits.
    #[arg(long)]
    precision: Option<u32>,
    /// Exponent of the operands (with --precision).
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    exponent: i32,
    /// Directed rounding: errors are centered and the bias is reported separately.
    #[arg(long)]
    directed: bool,
    #[arg(long, value_enum, default_value_t = Model::Uniform)]
    model: Model,
    /// Truncation order of the moment series.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// Program shape: accumulation, dot, sum-of-squares, taylor.
    #[arg(long, default_value = "accumulation")]
    kernel: String,
    /// Declare asymmetric errors (refused).
    #[arg(long)]
    asymmetric: bool,
    /// Declare dependent errors (refused).
    #[arg(long)]
    dependent: bool,
}

impl AccArgs {
    fn build(&self) -> Result<Accumulation> {
        check_hypotheses(self.asymmetric, self.dependent)?;
        check_kernel(self.kernel.parse::<Kernel>()?)?;
        let n = parse_count(&self.n)?;
        let m = parse_count(&self.m)?;
        let (u, offset) = match (&self.u, self.precision) {
            (Some(u), None) => {
                if self.directed {
                    return Err(Error::InvalidConfig("--directed needs --precision and --exponent".into()));
                }
                (parse_rational(u)?, None)
            }
            (None, Some(p)) => {
                let format = FpFormat::new(p, Representation::SignMagnitude, ExponentMode::Floating)?;
                let rounding = if self.directed { Rounding::Directed } else { Rounding::Nearest };
                let model = rounding_error_model(&format, self.exponent, rounding);
                (model.model.u().clone(), model.offset)
            }
            _ => return Err(Error::InvalidConfig("give either --u or --precision".into())),
        };
        Ok(Accumulation {
            n,
            m,
            u,
            model: match self.model {
                Model::Uniform => ModelKind::UniformBounded,
                Model::Support => ModelKind::SupportBounded,
            },
            directed_offset: offset,
            order: self.order,
        })
    }
}

fn probability(s: &str) -> Result<f64> {
    let p = to_f64(&parse_rational(s)?);
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(p)
}

fn real(s: &str) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>().or_else(|_| parse_rational(t).map(|r: Rational| to_f64(&r)))
        .map_err(|_| Error::Parse(format!("not a number: '{s}'")))
}

fn run(cli: &Cli) -> Result<levybound::report::Report> {
    match &cli.command {
        Command::Epsilon { acc, probability: p, k, k_max, no_levy } => {
            cmd_epsilon(&acc.build()?, probability(p)?, *k, *k_max, !no_levy)
        }
        Command::Prob { acc, epsilon, k, no_levy } => cmd_prob(&acc.build()?, *epsilon, *k, !no_levy),
        Command::Table1 { order } => cmd_table1(*order),
        Command::Filter { b1, b2, n, u, m, probability: p, levy, buckets, order } => {
            let q = FilterQuery {
                levy: *levy,
                buckets: *buckets,
                order: *order,
                ..FilterQuery::new(real(b1)?, real(b2)?, parse_count(n)?, parse_rational(u)?, *m, probability(p)?)
            };
            cmd_filter(&q)
        }
        Command::Simulate {
            acc,
            reps,
            seed,
            epsilon,
            probability: ps,
            grid_points,
            bound_k,
            noise,
            data,
            lo,
            hi,
            threads,
            cap,
            allow_large,
            timing,
            ci_level,
        } => {
            let mut q = SimulateQuery::new(acc.build()?, parse_count(reps)?, *seed);
            q.epsilon = epsilon.clone();
            q.probabilities = ps.clone();
            q.grid_points = *grid_points;
            q.bound_k = bound_k.clone();
            q.noise = match noise {
                NoiseKind::Model => SimNoise::Model,
                NoiseKind::Hardware => SimNoise::Hardware(match data {
                    DataKind::Uniform => DataModel::Uniform { lo: *lo, hi: *hi },
                    DataKind::LogUniform => DataModel::LogUniform { lo: *lo, hi: *hi },
                    DataKind::Constant => DataModel::Constant { value: *lo },
                }),
            };
            q.threads = *threads;
            q.cap = match cap {
                Some(c) => u128::from(parse_count(c)?),
                None => DEFAULT_OPERATION_CAP,
            };
            q.allow_large = *allow_large;
            q.timing = *timing;
            q.ci_level = *ci_level;
            cmd_simulate(&q)
        }
        Command::Moments { acc, k_max } => cmd_moments(&acc.build()?, *k_max),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = match cli.format {
        OutputFormat::Json => Format::Json,
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Table => Format::Table,
    };
    let outcome = run(&cli).and_then(|report| Ok((report.render(format, cli.digits)?, report.passed())));
    match outcome {
        Ok((text, passed)) => {
            print!("{text}");
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
