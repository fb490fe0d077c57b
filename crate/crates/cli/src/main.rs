//! Command-line driver: run presets or configuration files, compare runs,
//! and run self-convergence studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixbgk::run::{compare_runs, convergence_csv, convergence_orders, convergence_study, run_scenario};
use mixbgk::scenarios::{preset, Scenario, ScenarioConfig, PRESETS};
use mixbgk::stepper::{GuardPolicy, Scheme};
use mixbgk::transport::FluxOrder;
use mixbgk::Error;

#[derive(Parser, Debug)]
#[command(
    name = "mixbgk",
    version,
    about = "Two-species BGK solver with velocity-dependent collision frequencies"
)]
struct Cli {
    /// Worker threads (0: all cores).
    #[arg(long, global = true, env = "BGK_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write CSV output.
    Run(RunArgs),
    /// Write cellwise relative differences of two runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List preset names.
    Presets,
    /// Print the resolved configuration as JSON.
    Config(SourceArgs),
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Named preset.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// JSON configuration file (full config or {"preset": ..., "overrides": {...}}).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frequency model tag, e.g. coulomb, coulomb_vhat, sod_veldep, sod_vhat.
    #[arg(long)]
    frequency: Option<String>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Flux order 1 or 2.
    #[arg(long)]
    flux_order: Option<u32>,
    /// Spatial cells.
    #[arg(long)]
    cells: Option<usize>,
    /// Velocity nodes per axis.
    #[arg(long)]
    vnodes: Option<usize>,
    /// Fixed time step (configuration units).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Moment snapshot cadence in steps.
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Step-shrinking rule after a positivity violation.
    #[arg(long, value_enum)]
    guard: Option<GuardArg>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Run a self-convergence study over this many mesh levels instead.
    #[arg(long)]
    levels: Option<u32>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GuardArg {
    Global,
    Local,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    Splitting1,
    Ars222,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::Json(_) => 2,
        Error::SolverFailure { .. } | Error::TimeStepUnderflow { .. } | Error::RiemannVacuum => 3,
        Error::Io(_) | Error::Csv(_) => 4,
    }
}

fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure {
        code: 4,
        message: format!("{}: {e}", path.display()),
    }
}

fn resolve(src: &SourceArgs) -> Result<ScenarioConfig, Failure> {
    let mut c = match (&src.preset, &src.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            ScenarioConfig::from_json(&text)?
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    if let Some(tag) = &src.frequency {
        c.frequency = c.frequency.with_tag(tag)?;
    }
    if let Some(s) = src.scheme {
        c.scheme = match s {
            SchemeArg::Splitting1 => Scheme::Splitting1,
            SchemeArg::Ars222 => Scheme::Ars222,
        };
    }
    if let Some(o) = src.flux_order {
        c.flux_order = FluxOrder::from_number(o)?;
    }
    if let Some(k) = src.cells {
        c.mesh.cells = k;
    }
    if let Some(n) = src.vnodes {
        c.velocity_nodes = n;
    }
    if src.dt.is_some() {
        c.dt = src.dt;
    }
    if let Some(t) = src.t_end {
        c.t_end = t;
    }
    if let Some(s) = src.snapshot_every {
        c.output.snapshot_every = s;
    }
    if let Some(g) = src.guard {
        c.guard = match g {
            GuardArg::Global => GuardPolicy::Global,
            GuardArg::Local => GuardPolicy::Local,
        };
    }
    c.validate()?;
    Ok(c)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
        }
        Command::Config(src) => {
            println!("{}", resolve(&src)?.to_json()?);
        }
        Command::Compare { run_a, run_b, out } => {
            let s = compare_runs(&run_a, &run_b, &out)?;
            let names = ["n_1", "u1_1", "t_1", "n_2", "u1_2", "t_2"];
            println!("compared {} snapshots", s.snapshots);
            for (n, v) in names.iter().zip(s.max_abs) {
                println!("max |r({n})| = {v:.6e}");
            }
        }
        Command::Run(args) => {
            let config = resolve(&args.source)?;
            match args.levels {
                Some(levels) => {
                    std::fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
                    let results = convergence_study(&config, levels)?;
                    let path = args.out.join("convergence.csv");
                    std::fs::write(&path, convergence_csv(&results)?).map_err(|e| io_failure(&path, e))?;
                    let orders = convergence_orders(&results);
                    for r in &results {
                        if let Some(e) = r.error {
                            println!(
                                "level {} ({} cells): L1 error {:.6e} {:.6e}",
                                r.level, r.cells, e[0], e[1]
                            );
                        }
                    }
                    println!("observed orders: {:?} {:?}", orders[0], orders[1]);
                }
                None => {
                    let summary = run_scenario(Scenario::build(config)?, &args.out)?;
                    println!(
                        "{} steps to t = {:e}; max conserved drift {:.3e}; positivity guard triggers {}",
                        summary.steps, summary.final_time, summary.max_drift, summary.guard_triggers
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
