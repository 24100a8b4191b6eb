//! `pcbf` command-line front end.
//!
//! Exit codes: 0 when every run completes (or every validation check passes),
//! 2 when a run ends in a safety-relevant event or a check fails, 1 for usage
//! and configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::backstepping::{build_chain, gain_lower_bound};
use crate::barrier::{verify_parallel, BarrierField, State, PARALLEL_TOL};
use crate::config::{load_with_overrides, Overrides};
use crate::error::{CbfError, Result};
use crate::oracle::finite_difference_check;
use crate::sim::{run_scenario, EventKind, FilterKind, ScenarioConfig, SimEvent, Trajectory};
use crate::systems::{
    check_gradient_nonzero, corridor_grid, midline_samples, BaselineDriftField, JetLevelField, SingleCbfBaseline,
};
use crate::trajectory::{write_csv, RunSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SAFETY: i32 = 2;

/// Environment variable holding the default sweep worker count.
pub const WORKERS_ENV: &str = "PCBF_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "pcbf", version, about = "Constant-sum barrier pair safety filter: simulate, compare, sweep, validate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario; writes <out>/<name>.csv and <out>/<name>.summary.json.
    Run {
        #[command(flatten)]
        common: RunArgs,
    },
    /// Simulate two scenarios; writes a.csv, b.csv, their summaries and comparison.json.
    Compare {
        /// Exactly two scenario files.
        #[arg(long = "config", num_args = 1, required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Simulate the cartesian product of scenarios, first-level gains and seeds in parallel.
    Sweep {
        #[arg(long = "config", num_args = 1, required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Comma-separated values for the first backstepping gain (also used by the single baseline).
        #[arg(long, value_delimiter = ',')]
        c1: Vec<f64>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Parallel workers (defaults to $PCBF_WORKERS, then the number of CPUs).
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Check gradients, derivatives, the constant sum and the gain bound at x0.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            dt: a.dt,
            horizon: a.horizon,
        }
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Run { common } => {
            let cfg = load_with_overrides(&common.config, &common.overrides.into())?;
            let outcome = simulate(&cfg)?;
            let stem = outcome.summary.scenario.clone();
            outcome.write(&common.out, &stem)?;
            print_summary(&outcome.summary);
            Ok(exit_for(&[outcome.summary.event]))
        }
        Command::Compare { configs, out, overrides } => {
            if configs.len() != 2 {
                return Err(CbfError::Usage(format!("compare takes exactly two --config, got {}", configs.len())));
            }
            let overrides: Overrides = overrides.into();
            let a = load_with_overrides(&configs[0], &overrides)?;
            let b = load_with_overrides(&configs[1], &overrides)?;
            let (ra, rb) = rayon::join(|| simulate(&a), || simulate(&b));
            let (ra, rb) = (ra?, rb?);
            ra.write(&out, "a")?;
            rb.write(&out, "b")?;
            let comparison = Comparison {
                a: ra.summary.clone(),
                b: rb.summary.clone(),
            };
            write_json(&out.join("comparison.json"), &comparison)?;
            print_summary(&ra.summary);
            print_summary(&rb.summary);
            Ok(exit_for(&[ra.summary.event, rb.summary.event]))
        }
        Command::Sweep {
            configs,
            out,
            c1,
            seeds,
            workers,
            dt,
            horizon,
        } => {
            let overrides = Overrides { seed: None, dt, horizon };
            let mut jobs = Vec::new();
            for path in &configs {
                let base = load_with_overrides(path, &overrides)?;
                jobs.extend(expand_sweep(&base, &c1, &seeds));
            }
            let workers = workers.unwrap_or(0);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| CbfError::Usage(format!("cannot start {workers} workers: {e}")))?;
            fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            let results: Vec<Result<RunSummary>> = pool.install(|| {
                jobs.par_iter()
                    .map(|(stem, cfg)| {
                        let outcome = simulate(cfg)?;
                        outcome.write(&out, stem)?;
                        Ok(outcome.summary)
                    })
                    .collect()
            });
            let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
            write_json(&out.join("sweep.json"), &summaries)?;
            for s in &summaries {
                print_summary(s);
            }
            let events: Vec<EventKind> = summaries.iter().map(|s| s.event).collect();
            Ok(exit_for(&events))
        }
        Command::Validate { config, overrides } => {
            let cfg = load_with_overrides(&config, &overrides.into())?;
            let checks = validate_scenario(&cfg)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_SAFETY })
        }
    }
}

fn exit_for(events: &[EventKind]) -> i32 {
    if events.iter().any(EventKind::is_safety_relevant) {
        EXIT_SAFETY
    } else {
        EXIT_OK
    }
}

/// Sweep jobs as `(file stem, config)`.
pub fn expand_sweep(base: &ScenarioConfig, c1: &[f64], seeds: &[u64]) -> Vec<(String, ScenarioConfig)> {
    let gains: Vec<Option<f64>> = if c1.is_empty() { vec![None] } else { c1.iter().copied().map(Some).collect() };
    let seeds: Vec<Option<u64>> = if seeds.is_empty() { vec![None] } else { seeds.iter().copied().map(Some).collect() };
    let mut jobs = Vec::new();
    for g in &gains {
        for s in &seeds {
            let mut cfg = base.clone();
            let mut stem = base.name.clone();
            if let Some(g) = g {
                match cfg.gains.chain.first_mut() {
                    Some(first) => *first = *g,
                    None => cfg.gains.chain.push(*g),
                }
                cfg.gains.baseline_c1 = Some(*g);
                stem.push_str(&format!("_c1-{g}"));
            }
            if let Some(s) = s {
                cfg.seed = *s;
                stem.push_str(&format!("_seed-{s}"));
            }
            cfg.name = stem.clone();
            jobs.push((stem, cfg));
        }
    }
    jobs
}

struct Outcome {
    trajectory: Trajectory,
    summary: RunSummary,
}

impl Outcome {
    fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let file = fs::File::create(&csv_path).map_err(|e| io_error(&csv_path, e))?;
        write_csv(&self.trajectory, std::io::BufWriter::new(file))?;
        write_json(&dir.join(format!("{stem}.summary.json")), &self.summary)
    }
}

fn simulate(cfg: &ScenarioConfig) -> Result<Outcome> {
    let start = Instant::now();
    let (trajectory, event): (Trajectory, SimEvent) = run_scenario(cfg)?;
    let summary = RunSummary::new(cfg, &trajectory, &event, start.elapsed().as_secs_f64());
    log::info!("{}: {} at t = {}", cfg.name, event.kind, event.t_event);
    Ok(Outcome { trajectory, summary })
}

#[derive(Serialize)]
struct Comparison {
    a: RunSummary,
    b: RunSummary,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CbfError::Usage(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> CbfError {
    CbfError::Usage(format!("{}: {e}", path.display()))
}

fn print_summary(s: &RunSummary) {
    println!(
        "{}: {} at t = {:.3} (min h1 {:.3e}, min hbar1 {:.3e}, max |u| {:.3e})",
        s.scenario, s.event, s.t_event, s.min_h1, s.min_hbar1, s.max_abs_u_filtered
    );
}

/// Result of one `validate` check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

/// All `validate` checks for a scenario.
///
/// The gradient check runs on the barrier the configured filter actually uses:
/// `h` for the pair, `h (b - h)` for the single baseline.
pub fn validate_scenario(cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let example = cfg.system.example();
    let mut grid = corridor_grid(cfg.system, cfg.validate.grid_levels);
    let mut checks = Vec::new();

    let baseline = match cfg.filter {
        FilterKind::SingleBaseline => Some(SingleCbfBaseline::new(
            example.pair.clone(),
            Arc::clone(&example.jet),
            cfg.gains.baseline_c1(),
            cfg.gains.c2,
        )?),
        _ => None,
    };

    match &baseline {
        Some(b) => {
            let field = b.barrier_field();
            grid.extend(midline_samples(cfg.system, cfg.validate.midline_samples));
            let ok = check_gradient_nonzero(&field, &grid)?;
            let detail = if ok {
                format!("{} has a nonzero gradient at {} samples", field.label(), grid.len())
            } else {
                format!("{} has a vanishing gradient on the corridor midline", field.label())
            };
            checks.push(check("gradient_nonzero", ok, detail));
        }
        None => {
            let field = example.pair.field();
            let ok = check_gradient_nonzero(field.as_ref(), &grid)?;
            checks.push(check(
                "gradient_nonzero",
                ok,
                format!("{} at {} samples", field.label(), grid.len()),
            ));
        }
    }

    let mut fields: Vec<Box<dyn BarrierField>> = vec![
        Box::new(ArcField(Arc::clone(example.pair.field()))),
        Box::new(example.pair.complement()),
    ];
    for level in 0..=example.jet.depth() {
        fields.push(Box::new(JetLevelField {
            jet: Arc::clone(&example.jet),
            level,
            label: format!("L_f^{level} h"),
        }));
    }
    if let Some(b) = &baseline {
        fields.push(Box::new(b.barrier_field()));
        fields.push(Box::new(BaselineDriftField(b.clone())));
        fields.push(Box::new(b.target_field()));
    }
    let x0 = State::from_slice(&cfg.x0);
    let chain = build_chain(
        &example.pair,
        Arc::clone(&example.jet),
        example.system.as_ref(),
        &x0,
        example.relative_degree(),
        &cfg.gains.policy(),
    );
    if let Ok(chain) = &chain {
        for level in 1..=chain.depth() {
            fields.push(Box::new(chain.level_field(level)));
        }
    }
    for field in &fields {
        let report = finite_difference_check(field.as_ref(), &grid)?;
        checks.push(check(
            format!("finite_difference[{}]", field.label()),
            report.worst() <= cfg.validate.fd_tol,
            format!("worst relative error {:.2e}", report.worst()),
        ));
    }

    let complement = example.pair.complement();
    let parallel = verify_parallel(example.pair.field().as_ref(), &complement, &grid, PARALLEL_TOL)?;
    checks.push(check(
        "constant_sum",
        parallel.parallel,
        format!("h + hbar = {} (spread {:.1e})", parallel.b_estimate, parallel.spread),
    ));

    let h0 = example.pair.h(&x0);
    let lfh0 = example.jet.lie_value(1, &x0);
    let bound = gain_lower_bound(h0, lfh0, example.pair.b());
    let (ok, detail) = match (&bound, &chain) {
        (Ok(_), Ok(chain)) => (
            true,
            format!("bounds {:?}, gains {:?} at x0 = {:?}", chain.gain_bounds(), chain.gains(), cfg.x0),
        ),
        (Ok(_), Err(e)) | (Err(e), _) => (false, format!("x0 = {:?}: {e}", cfg.x0)),
    };
    checks.push(check("gain_bound_at_x0", ok, detail));

    if let Ok(chain) = &chain {
        let worst = chain.relative_degree_report(example.system.as_ref(), &grid)?;
        let ok = worst.iter().all(|w| *w <= crate::backstepping::RELATIVE_DEGREE_WARN);
        checks.push(check("relative_degree", ok, format!("max |L_g h_i| below target level: {worst:?}")));
    }
    Ok(checks)
}

struct ArcField(Arc<dyn BarrierField>);

impl BarrierField for ArcField {
    fn value(&self, x: &State) -> f64 {
        self.0.value(x)
    }
    fn gradient(&self, x: &State) -> nalgebra::DVector<f64> {
        self.0.gradient(x)
    }
    fn hessian(&self, x: &State) -> Option<nalgebra::DMatrix<f64>> {
        self.0.hessian(x)
    }
    fn label(&self) -> &str {
        self.0.label()
    }
}
