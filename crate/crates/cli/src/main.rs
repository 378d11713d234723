mod artifacts;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarmrate::bcd::{run_baselines, solve, sweep_energy, Status, DEFAULT_FRACTIONS};
use swarmrate::scenario::ScenarioConfig;
use swarmrate::validate::{run_all, SurrogateSet, ValidationOptions};
use swarmrate::Error;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_MAX_ITERS: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "swarmrate", version, about = "Max-min fair multi-UAV trajectory, power and scheduling planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize trajectories, powers and schedule.
    Solve(ScenarioArgs),
    /// Evaluate the static access point and initial circular baselines.
    Baseline(ScenarioArgs),
    /// Run the property suites.
    Validate(ValidateArgs),
    /// Re-solve with the energy budget at fractions of the reference consumption.
    SweepEnergy {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated budget fractions.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_FRACTIONS)]
        fractions: Vec<f64>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file; the built-in default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Samples per surrogate suite.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the results as JSON into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<Box<dyn std::error::Error>> for Failure {
    fn from(e: Box<dyn std::error::Error>) -> Self {
        Failure::Run(e.to_string())
    }
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Failure::Usage(format!("cannot read {}: {io}", path.display())),
            other => other.into(),
        })?,
        None => ScenarioConfig::default_scenario(args.seed.unwrap_or(0)),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(eps) = args.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(n) = args.max_iters {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Converged => 0,
        Status::Infeasible => EXIT_INFEASIBLE,
        Status::MaxIters => EXIT_MAX_ITERS,
    }
}

fn cmd_solve(args: &ScenarioArgs) -> Result<u8, Failure> {
    let cfg = load(args)?;
    let report = solve(&cfg)?;
    artifacts::write_solve(&args.out_dir, &report, &cfg)?;
    println!("status: {}", report.status.as_str());
    if let Some(reason) = &report.reason {
        println!("reason: {reason}");
    }
    println!("iterations: {}", report.iterations);
    if let Some(mu) = report.min_rate() {
        println!("min rate: {mu:.6} bit/s/Hz");
    }
    println!("artifacts: {}", args.out_dir.display());
    Ok(status_code(report.status))
}

fn cmd_baseline(args: &ScenarioArgs) -> Result<u8, Failure> {
    let cfg = load(args)?;
    let b = run_baselines(&cfg)?;
    artifacts::write_baselines(&args.out_dir, &b)?;
    println!("static access point min rate: {:.6} bit/s/Hz", b.static_ap.report.min_rate);
    println!("initial circular min rate: {:.6} bit/s/Hz", b.circular.report.min_rate);
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8, Failure> {
    let opts = ValidationOptions {
        samples: args.samples,
        seed: args.seed,
        ..ValidationOptions::default()
    };
    let results = run_all(&opts, &SurrogateSet::default());
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {} ({} checks, worst error {:.3} of tolerance)", r.name, r.checks, r.worst_ratio);
        if let Some(c) = &r.counterexample {
            println!("  counterexample: {c}");
        }
    }
    if let Some(dir) = &args.out_dir {
        artifacts::write_validation(dir, &results)?;
    }
    Ok(if results.iter().all(|r| r.passed) { 0 } else { EXIT_FAILURE })
}

fn cmd_sweep(args: &ScenarioArgs, fractions: &[f64]) -> Result<u8, Failure> {
    if let Some(f) = fractions.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Failure::Usage(format!("invalid value for `--fractions`: {f}")));
    }
    let cfg = load(args)?;
    let sweep = sweep_energy(&cfg, fractions)?;
    artifacts::write_sweep(&args.out_dir, &sweep, &cfg)?;
    println!("reference energy: {:.1} J", sweep.reference_energy);
    if let Some(mu) = sweep.reference.min_rate() {
        println!("reference min rate: {mu:.6} bit/s/Hz");
    }
    for p in &sweep.points {
        let mu = p.report.min_rate().map_or("-".to_string(), |m| format!("{m:.6}"));
        println!("fraction {}: {} (min rate {mu})", p.fraction, p.report.status.as_str());
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Validate(a) => cmd_validate(a),
        Command::SweepEnergy { scenario, fractions } => cmd_sweep(scenario, fractions),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
