//! `coexist` — simulate the three-species chain, integrate its mean flow,
//! and compute extinction probabilities and times on the coexistence line.
//!
//! Exit codes: 0 success, 1 configuration error (bad flags, bad config
//! file, invalid parameters), 2 runtime error (I/O, truncated runs,
//! quadrature failures).

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use coexist::analytics::{build_scale_table, expected_tau, hit_prob_pm};
use coexist::diffusion::gamma_coefficients;
use coexist::experiment::{run_experiment, ExperimentConfig, ExperimentReport, Figure};
use coexist::flow::{integrate_flow, project_mstar, FlowOptions};
use coexist::model::{Params, ScaledPoint};
use coexist::sim::{replicate_rng, run_to_fixation, state_from_scaled, Mode, SimConfig};

#[derive(Parser)]
#[command(
    name = "coexist",
    version,
    about = "Three-species chain in a random environment: exact simulation and coexistence-line analytics",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Stop at the first extinction.
    FirstExtinction,
    /// Run to fixation of a single species (exponentially slow in N once
    /// only the two specialists remain).
    Fixation,
    /// Stop at the first of coexistence-line hit or extinction.
    GammaOrExtinction,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::FirstExtinction => Mode::ToFirstExtinction,
            ModeArg::Fixation => Mode::ToFixation,
            ModeArg::GammaOrExtinction => Mode::ToGammaOrExtinction,
        }
    }
}

/// `d,m` pair.
fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (d, m) = s
        .split_once(',')
        .ok_or_else(|| format!("expected d,m — got `{s}`"))?;
    let d: f64 = d.trim().parse().map_err(|e| format!("bad d: {e}"))?;
    let m: f64 = m.trim().parse().map_err(|e| format!("bad m: {e}"))?;
    Ok((d, m))
}

#[derive(Args)]
struct SimulateArgs {
    /// Population size.
    #[arg(long, default_value_t = 1000)]
    n: u32,
    /// Probability of the environment state favouring C.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Scaled starting point `d,m`; rounded onto the state lattice.
    #[arg(long, value_parser = parse_point)]
    init: (f64, f64),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "first-extinction")]
    mode: ModeArg,
    /// Coexistence-line hit tolerance in D units.
    #[arg(long, default_value_t = 1)]
    gamma_tol: i64,
    /// Abort runs longer than this many events.
    #[arg(long, default_value_t = 10_000_000_000)]
    max_events: u64,
    /// Record the path and write it as CSV `t,D,M` to --out.
    #[arg(long)]
    record_path: bool,
    /// Keep every k-th event of the recorded path.
    #[arg(long, default_value_t = 1)]
    stride: u64,
    /// Path CSV destination (with --record-path).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Starting point `d,m` inside the state triangle.
    #[arg(long, value_parser = parse_point)]
    init: (f64, f64),
    /// Integrator step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1e3)]
    t_max: f64,
    /// Stop when `|d - (2q-1)|` falls below this.
    #[arg(long, default_value_t = 1e-8)]
    gamma_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    corner_tol: f64,
    /// Trajectory CSV `t,d,m` destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Number of interior grid points.
    #[arg(long, default_value_t = 99)]
    grid: usize,
    /// Coefficient CSV `x,beta,alpha` destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Scale-function grid size.
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    /// Quadrature cutoff: the table covers `[eps, 1 - eps]`.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Starting position on the coexistence line.
    #[arg(long, conflicts_with = "init")]
    x: Option<f64>,
    /// Scaled starting point `d,m`; projected onto the line first.
    #[arg(long, value_parser = parse_point)]
    init: Option<(f64, f64)>,
    /// Population size used for chain-time units.
    #[arg(long, default_value_t = 1000)]
    n: u32,
    /// Also export CSV `x,phi,pm,etau` over the grid.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "lower")]
enum FigureArg {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

#[derive(Args)]
struct FiguresArgs {
    /// Which figure dataset to rebuild.
    #[arg(value_enum)]
    which: FigureArg,
    /// Population size(s); repeat for several. Defaults per figure.
    #[arg(long)]
    n: Vec<u32>,
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replicate and print its stopping record as JSON.
    Simulate(SimulateArgs),
    /// Integrate the deterministic mean flow and export the trajectory.
    Flow(FlowArgs),
    /// Tabulate the reduced diffusion coefficients on the coexistence line.
    Coeffs(CoeffsArgs),
    /// Extinction probability and expected time from the scale function.
    Analytic(AnalyticArgs),
    /// Run an experiment from a JSON config file.
    Experiment(ExperimentArgs),
    /// Rebuild one of the standard figure datasets.
    Figures(FiguresArgs),
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<coexist::Error> for CliError {
    fn from(e: coexist::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Flow(args) => flow(args),
        Command::Coeffs(args) => coeffs(args),
        Command::Analytic(args) => analytic(args),
        Command::Experiment(args) => experiment(args),
        Command::Figures(args) => figures(args),
    }
}

fn write_lines(out: Option<&PathBuf>, lines: Vec<String>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = std::io::BufWriter::new(fs::File::create(path)?);
            for line in lines {
                writeln!(w, "{line}")?;
            }
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for line in lines {
                writeln!(w, "{line}")?;
            }
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let params = Params::new(args.n, args.q)?;
    let init = state_from_scaled(args.init.0, args.init.1, params)?;
    let mut cfg = SimConfig::new(params, init, args.mode.into());
    cfg.gamma_tolerance = args.gamma_tol;
    cfg.max_events = args.max_events;
    cfg.record_path = args.record_path;
    cfg.path_stride = args.stride;
    let mut rng = replicate_rng(args.seed, 0);
    let (record, path) = run_to_fixation(&cfg, &mut rng)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&record).expect("record serializes")
    );
    if let Some(path_sample) = path {
        let mut lines = vec!["t,D,M".to_string()];
        lines.extend(
            path_sample
                .samples
                .iter()
                .map(|(t, s)| format!("{t},{},{}", s.d, s.m)),
        );
        write_lines(args.out.as_ref(), lines)?;
    }
    Ok(())
}

fn flow(args: FlowArgs) -> Result<(), CliError> {
    let y0 = ScaledPoint::new(args.init.0, args.init.1)?;
    let opts = FlowOptions {
        dt: args.dt,
        gamma_tol: args.gamma_tol,
        t_max: args.t_max,
        corner_tol: args.corner_tol,
    };
    let traj = integrate_flow(y0, args.q, &opts)?;
    let mut lines = vec!["t,d,m".to_string()];
    lines.extend(
        traj.points
            .iter()
            .map(|(t, y)| format!("{t},{},{}", y.d(), y.m())),
    );
    write_lines(args.out.as_ref(), lines)?;
    Ok(())
}

fn coeffs(args: CoeffsArgs) -> Result<(), CliError> {
    if args.grid == 0 {
        return Err(CliError::Config("grid must be >= 1".into()));
    }
    let mut lines = vec!["x,beta,alpha".to_string()];
    for i in 1..=args.grid {
        let x = i as f64 / (args.grid + 1) as f64;
        let g = gamma_coefficients(x, args.q)?;
        lines.push(format!("{x},{},{}", g.beta, g.alpha));
    }
    write_lines(args.out.as_ref(), lines)?;
    Ok(())
}

fn analytic(args: AnalyticArgs) -> Result<(), CliError> {
    let params = Params::new(args.n, args.q)?;
    let table = build_scale_table(args.q, args.grid, args.eps)?;
    let x_start = match (args.x, args.init) {
        (Some(x), None) => {
            if !(0.0..=1.0).contains(&x) {
                return Err(CliError::Config(format!("x = {x} not in [0, 1]")));
            }
            x
        }
        (None, Some((d, m))) => {
            let y = ScaledPoint::new(d, m)?;
            project_mstar(y, args.q)?
        }
        (None, None) => {
            return Err(CliError::Config("one of --x or --init is required".into()))
        }
        _ => unreachable!("clap enforces the conflict"),
    };
    let p_m = hit_prob_pm(x_start, &table);
    let tau = expected_tau(x_start.clamp(table.lo(), table.hi()), &table);
    let n2 = f64::from(params.n) * f64::from(params.n);
    let report = serde_json::json!({
        "x_start": x_start,
        "p_m": p_m,
        "expected_tau_gamma_units": tau,
        "expected_tau_chain_units": tau * n2,
        "q": args.q,
        "n": args.n,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    if let Some(out) = &args.out {
        let mut lines = vec!["x,phi,pm,etau".to_string()];
        for (&x, &phi) in table.grid().iter().zip(table.phi()) {
            lines.push(format!(
                "{x},{phi},{},{}",
                hit_prob_pm(x, &table),
                expected_tau(x, &table)
            ));
        }
        write_lines(Some(out), lines)?;
    }
    Ok(())
}

fn report_json(report: &ExperimentReport) -> serde_json::Value {
    serde_json::json!({
        "summaries": report
            .summaries
            .iter()
            .map(|(name, s)| {
                serde_json::json!({
                    "group": name,
                    "n": s.n,
                    "mean": s.mean,
                    "sd": s.sd,
                    "se": s.se,
                    "min": s.min,
                    "max": s.max,
                    "proportion": s.proportion,
                })
            })
            .collect::<Vec<_>>(),
        "comparison": report.comparison,
        "ks": report.ks,
        "files": report
            .files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    })
}

fn experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad config: {e}")))?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    let report = run_experiment(&cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report_json(&report)).expect("json")
    );
    Ok(())
}

fn figures(args: FiguresArgs) -> Result<(), CliError> {
    let figure = match args.which {
        FigureArg::Fig3 => Figure::Fig3,
        FigureArg::Fig4 => Figure::Fig4,
        FigureArg::Fig5 => Figure::Fig5,
        FigureArg::Fig6 => Figure::Fig6,
    };
    let n = if args.n.is_empty() { None } else { Some(args.n) };
    let cfg = figure.config(n, args.runs, args.seed, args.q, args.out);
    let report = run_experiment(&cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report_json(&report)).expect("json")
    );
    Ok(())
}
