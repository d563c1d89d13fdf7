//! `sharpbounds`: bounds, grids, sharpness witnesses and Monte Carlo runs
//! from the command line.
//!
//! Exit codes: 0 on success, 1 for I/O or parse failures, 2 when the inputs
//! parse but are infeasible (sensitivity parameters outside the feasible
//! region, epsilon out of range, degenerate sampling support, ...).

mod render;

use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sharpbounds::ingest::{read_counts_json, read_records_csv};
use sharpbounds::montecarlo::{run_mc_samples, samples_to_csv, with_threads, Parameter};
use sharpbounds::{
    feasible_region, margins_from_counts, validate_params, ContrastSpec, Error, McConfig, McSummary, ObservedMargins,
    ParamDistribution, WitnessTarget,
};

const THREADS_ENV: &str = "SHARPBOUNDS_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "sharpbounds",
    version,
    about = "Sharp sensitivity bounds for causal contrasts under unmeasured confounding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bounds on p(D_1=1), p(D_0=1) and a contrast for one (m, M) pair.
    Bounds(BoundsArgs),
    /// Contrast bounds over an evenly spaced (m, M) grid.
    Grid(GridArgs),
    /// Build a near-attaining confounded model and report its sharpness gaps.
    Witness(WitnessArgs),
    /// Monte Carlo distribution of the contrast bounds.
    Mc(McArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

#[derive(Args, Debug)]
struct MarginsSource {
    /// p(E=1)
    #[arg(long = "p-e1")]
    p_e1: Option<f64>,
    /// p(D=1 | E=0)
    #[arg(long = "p-d1-e0")]
    p_d1_e0: Option<f64>,
    /// p(D=1 | E=1)
    #[arg(long = "p-d1-e1")]
    p_d1_e1: Option<f64>,
    /// JSON file with keys d1e1, d0e1, d1e0, d0e0 ("-" for stdin)
    #[arg(long)]
    counts: Option<PathBuf>,
    /// CSV file with E and D columns ("-" for stdin)
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    margins: MarginsSource,
    /// Smallest risk over all (e, u) strata
    #[arg(long = "m", allow_negative_numbers = true)]
    m: f64,
    /// Largest risk over all (e, u) strata
    #[arg(long = "M", allow_negative_numbers = true)]
    big_m: f64,
    /// rr, rd, or, od
    #[arg(long, default_value = "rd")]
    contrast: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    margins: MarginsSource,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, default_value = "rd")]
    contrast: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct WitnessArgs {
    #[command(flatten)]
    margins: MarginsSource,
    #[arg(long = "m", allow_negative_numbers = true)]
    m: f64,
    #[arg(long = "M", allow_negative_numbers = true)]
    big_m: f64,
    /// theorem1 (lower p1, upper p0) or theorem2 (upper p1, lower p0)
    #[arg(long, default_value = "theorem1")]
    target: String,
    #[arg(long, default_value_t = sharpbounds::witness::DEFAULT_EPSILON, allow_negative_numbers = true)]
    epsilon: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    margins: MarginsSource,
    #[arg(long, default_value = "rd")]
    contrast: String,
    /// Number of (m, M) draws
    #[arg(long, default_value_t = sharpbounds::montecarlo::DEFAULT_SAMPLES)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Distribution of m: tnorm[:MEAN:VAR], uniform or point:VALUE
    /// (default: truncated normal with mean m*/2 and variance 0.1 on (0, m*))
    #[arg(long = "m-dist")]
    m_dist: Option<String>,
    /// Distribution of M: uniform, tnorm:MEAN:VAR or point:VALUE (default: uniform on (M*, 1))
    #[arg(long = "M-dist")]
    big_m_dist: Option<String>,
    #[arg(long, default_value_t = sharpbounds::montecarlo::DEFAULT_BINS)]
    bins: usize,
    /// Report P(bound <= x) for each given x
    #[arg(long = "threshold", allow_negative_numbers = true)]
    thresholds: Vec<f64>,
    /// Directory for lower_histogram.csv and upper_histogram.csv
    #[arg(long = "hist-dir")]
    hist_dir: Option<PathBuf>,
    /// Write every draw and its bounds as CSV to this file
    #[arg(long = "samples-out")]
    samples_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn open_input(path: &Path) -> CliResult<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdin().lock()))
    } else {
        File::open(path)
            .map(|f| Box::new(io::BufReader::new(f)) as Box<dyn Read>)
            .map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))
    }
}

impl MarginsSource {
    fn load(&self) -> CliResult<ObservedMargins> {
        let direct = [self.p_e1, self.p_d1_e0, self.p_d1_e1];
        let n_direct = direct.iter().filter(|v| v.is_some()).count();
        let sources = usize::from(n_direct > 0) + usize::from(self.counts.is_some()) + usize::from(self.data.is_some());
        if sources > 1 {
            return Err(Failure::input(
                "give margins either as --p-e1/--p-d1-e0/--p-d1-e1, --counts or --data, not a mix",
            ));
        }
        if let Some(path) = &self.counts {
            let counts = read_counts_json(open_input(path)?)?;
            return Ok(margins_from_counts(&counts)?);
        }
        if let Some(path) = &self.data {
            let counts = read_records_csv(open_input(path)?)?;
            return Ok(margins_from_counts(&counts)?);
        }
        match direct {
            [Some(p_e1), Some(p_d1_e0), Some(p_d1_e1)] => Ok(ObservedMargins::new(p_e1, p_d1_e0, p_d1_e1)?),
            _ => Err(Failure::input(
                "missing margins: give all of --p-e1, --p-d1-e0, --p-d1-e1, or --counts, or --data",
            )),
        }
    }
}

fn parse_contrast(name: &str) -> CliResult<ContrastSpec> {
    name.parse().map_err(|e: Error| Failure::input(e.to_string()))
}

/// Validates `(m, M)`; on failure the message carries the feasible region.
fn feasible_params(obs: &ObservedMargins, m: f64, big_m: f64) -> CliResult<sharpbounds::SensitivityParams> {
    validate_params(obs, m, big_m).map_err(|e| {
        let mut failure = Failure::from(e);
        failure.message = format!("{}\nfeasible region: {}", failure.message, feasible_region(obs));
        failure
    })
}

fn parse_number(s: &str, what: &str) -> CliResult<f64> {
    s.parse()
        .map_err(|_| Failure::input(format!("cannot parse {what} `{s}` as a number")))
}

fn parse_dist(spec: &str, param: Parameter, obs: &ObservedMargins) -> CliResult<ParamDistribution> {
    let parts: Vec<&str> = spec.split(':').collect();
    let default_mean = match param {
        Parameter::SmallM => feasible_region(obs).m_star.value() / 2.0,
        Parameter::BigM => {
            let (lo, hi) = feasible_region(obs).big_m_range();
            (lo + hi) / 2.0
        }
    };
    match parts.as_slice() {
        ["uniform"] => Ok(ParamDistribution::uniform(param, obs)),
        ["tnorm"] => Ok(ParamDistribution::truncated_normal(
            param,
            obs,
            default_mean,
            sharpbounds::montecarlo::DEFAULT_M_VARIANCE,
        )),
        ["tnorm", mean, var] => Ok(ParamDistribution::truncated_normal(
            param,
            obs,
            parse_number(mean, "mean")?,
            parse_number(var, "variance")?,
        )),
        ["point", value] => Ok(ParamDistribution::PointMass {
            value: parse_number(value, "point mass")?,
        }),
        _ => Err(Failure::input(format!(
            "cannot parse distribution `{spec}` (expected uniform, tnorm[:MEAN:VAR] or point:VALUE)"
        ))),
    }
}

fn threads_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::input(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn emit(output: &Output, text: &str) -> CliResult<()> {
    let write = |w: &mut dyn Write| -> io::Result<()> {
        w.write_all(text.as_bytes())?;
        if !text.ends_with('\n') {
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    match &output.out {
        Some(path) => {
            let mut file =
                File::create(path).map_err(|e| Failure::input(format!("cannot create {}: {e}", path.display())))?;
            write(&mut file)
        }
        None => write(&mut io::stdout().lock()),
    }
    .map_err(|e| Failure::input(format!("write failed: {e}")))
}

fn cmd_bounds(args: &BoundsArgs) -> CliResult<()> {
    let obs = args.margins.load()?;
    let spec = parse_contrast(&args.contrast)?;
    let params = feasible_params(&obs, args.m, args.big_m)?;
    let report = render::BoundsReport::compute(&obs, &params, &spec)?;
    emit(&args.output, &report.render(args.output.format)?)
}

fn cmd_grid(args: &GridArgs) -> CliResult<()> {
    let obs = args.margins.load()?;
    let spec = parse_contrast(&args.contrast)?;
    let table = sharpbounds::grid(&obs, args.steps, &spec)?;
    let text = match args.output.format {
        OutputFormat::Json => table.to_json()?,
        OutputFormat::Csv => table.to_csv()?,
        OutputFormat::Markdown => table.to_markdown(),
    };
    emit(&args.output, &text)
}

fn cmd_witness(args: &WitnessArgs) -> CliResult<()> {
    let obs = args.margins.load()?;
    let target: WitnessTarget = args.target.parse().map_err(|e: Error| Failure::input(e.to_string()))?;
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(args.epsilon).into());
    }
    let params = feasible_params(&obs, args.m, args.big_m)?;
    let report = render::WitnessReport::compute(&obs, &params, target, args.epsilon)?;
    emit(&args.output, &report.render(args.output.format)?)
}

fn cmd_mc(args: &McArgs) -> CliResult<()> {
    let obs = args.margins.load()?;
    let spec = parse_contrast(&args.contrast)?;
    let mut config = McConfig::new(&obs, spec, args.seed);
    config.n_samples = args.n;
    config.histogram_bins = args.bins;
    if let Some(d) = &args.m_dist {
        config.m_dist = parse_dist(d, Parameter::SmallM, &obs)?;
    }
    if let Some(d) = &args.big_m_dist {
        config.big_m_dist = parse_dist(d, Parameter::BigM, &obs)?;
    }
    let samples = with_threads(threads_from_env()?, || run_mc_samples(&obs, &config))??;
    let summary = McSummary::from_samples(&config, &samples);

    if let Some(path) = &args.samples_out {
        fs::write(path, samples_to_csv(&samples))
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }

    if let Some(dir) = &args.hist_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
        for (name, bound) in [("lower", &summary.lower), ("upper", &summary.upper)] {
            let path = dir.join(format!("{name}_histogram.csv"));
            fs::write(&path, bound.histogram.to_csv())
                .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
        }
    }

    let report = render::McReport::new(&obs, &config, &summary, &args.thresholds);
    emit(&args.output, &report.render(args.output.format)?)
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Witness(a) => cmd_witness(a),
        Command::Mc(a) => cmd_mc(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
