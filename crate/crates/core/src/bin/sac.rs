use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sac_core::audit;
use sac_core::config::Config;
use sac_core::experiments::{run_convergence_study, Axis};
use sac_core::io::write_atomic;
use sac_core::linear_errors::{heat_error_table, write_reports_csv, SANDWICH_TOL};
use sac_core::scheme::Scheme;
use sac_core::Error;

/// Stochastic Allen–Cahn simulation and exact heat-equation errors.
#[derive(Debug, Parser)]
#[command(name = "sac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact temporal, spatial and full errors with their bounds.
    HeatErrors(Common),
    /// Dump one trajectory of the scheme.
    Simulate(Common),
    /// Monte Carlo (or exact linear) convergence study with rate fits.
    Converge(Common),
    /// Run the inequality and bound audits.
    Check(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "SPDE_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "SPDE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<u32>,
}

enum Failure {
    Config(String),
    Sandwich(String),
    Audit(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Sandwich(_) => 3,
            Failure::Audit(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Sandwich(m) | Failure::Audit(m) | Failure::Runtime(m) => {
                m
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn config_failure(e: Error) -> Failure {
    Failure::Config(match e {
        Error::Config(m) => m,
        other => other.to_string(),
    })
}

struct Context {
    config: Config,
    out: PathBuf,
}

fn load(common: &Common) -> Result<Context, Failure> {
    let mut config = match &common.config {
        Some(path) => Config::load(path).map_err(config_failure)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        config.study.seed = seed;
    }
    if let Some(paths) = common.paths {
        if paths == 0 {
            return Err(Failure::Config("--paths must be at least 1".into()));
        }
        config.study.paths = paths as u64;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context { config, out })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn heat_errors(ctx: &Context) -> Result<(), Failure> {
    let (m_grid, n_grid) = ctx.config.heat_grid().map_err(config_failure)?;
    let model = &ctx.config.model;
    if !(model.horizon > 0.0 && model.nu > 0.0) {
        return Err(Failure::Config("T and nu must be positive".into()));
    }
    let rows = heat_error_table(&m_grid, &n_grid, model.horizon, model.nu)?;
    let mut buf = Vec::new();
    write_reports_csv(&rows, &mut buf)?;
    write(&ctx.out.join("heat_errors.csv"), &buf)?;
    let violations: Vec<String> = rows
        .iter()
        .filter(|r| !r.is_sandwiched(SANDWICH_TOL))
        .map(|r| {
            format!(
                "{} M={} N={}: {} not in [{}, {}]",
                r.kind, r.m, r.n, r.exact, r.lower, r.upper
            )
        })
        .collect();
    if violations.is_empty() {
        eprintln!("{} rows, all within bounds", rows.len());
        Ok(())
    } else {
        Err(Failure::Sandwich(violations.join("\n")))
    }
}

fn simulate(ctx: &Context) -> Result<(), Failure> {
    let model = ctx.config.model().map_err(config_failure)?;
    let d = ctx.config.discretization().map_err(config_failure)?;
    let tape = ctx.config.tape().map_err(config_failure)?;
    let scheme = Scheme::new(model, d)?;
    let traj = scheme.run_path(&tape, ctx.config.study.path_index)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    write(&ctx.out.join("trajectory.csv"), &buf)?;
    let mut header = Vec::new();
    tape.write_header(&mut header)?;
    write(&ctx.out.join("tape_header.bin"), &header)?;
    eprintln!(
        "drift suppressed on {} of {} steps (threshold {})",
        traj.truncated_steps(),
        traj.steps(),
        scheme.threshold()
    );
    Ok(())
}

fn converge(ctx: &Context) -> Result<(), Failure> {
    let cfg = ctx.config.study_config().map_err(config_failure)?;
    let result = run_convergence_study(&cfg)?;
    let mut csv = Vec::new();
    result.table.write_csv(&mut csv)?;
    write(&ctx.out.join("errors.csv"), &csv)?;
    let mut json = result.fits_json()?;
    json.push('\n');
    write(&ctx.out.join("rates.json"), json.as_bytes())?;
    for axis in [Axis::Temporal, Axis::Spatial] {
        if let Some(f) = result.fit(axis) {
            eprintln!("{axis} slope {:.4} (residual {:.3e})", f.slope, f.residual);
        }
    }
    Ok(())
}

fn check(ctx: &Context) -> Result<(), Failure> {
    let model = &ctx.config.model;
    if !(model.horizon > 0.0 && model.nu > 0.0) {
        return Err(Failure::Config("T and nu must be positive".into()));
    }
    let trials = ctx.config.study.trials;
    if trials == 0 {
        return Err(Failure::Config("trials must be at least 1".into()));
    }
    let outcomes = audit::run_all(trials, ctx.config.study.seed, model.horizon, model.nu)?;
    for o in &outcomes {
        println!(
            "{} {:<20} trials={:<6} max_residual={:.3e} tol={:.0e}",
            if o.passed() { "PASS" } else { "FAIL" },
            o.name,
            o.trials,
            o.max_residual,
            o.tolerance
        );
    }
    let mut buf = Vec::new();
    audit::write_outcomes_csv(&outcomes, &mut buf)?;
    write(&ctx.out.join("check.csv"), &buf)?;
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.passed())
        .map(|o| o.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Audit(format!(
            "failed audits: {}",
            failed.join(", ")
        )))
    }
}

type Action = fn(&Context) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, action): (&Common, Action) = match &cli.command {
        Command::HeatErrors(c) => (c, heat_errors),
        Command::Simulate(c) => (c, simulate),
        Command::Converge(c) => (c, converge),
        Command::Check(c) => (c, check),
    };
    let ctx = load(common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t as usize);
    }
    let pool = pool.build().map_err(|e| Failure::Runtime(e.to_string()))?;
    pool.install(|| action(&ctx))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
