mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use shang::harness::{fmt_float, sweep_to_csv};
use shang::verify::{run_suite, Suite};
use shang::{run_monte_carlo, sigma_sweep, Execution, ExperimentSpec, SweepRow, TrajectoryStats};

use config::{csv_name, Precision, RunConfig};

#[derive(Parser)]
#[command(name = "shang", version, about = "Benchmark and verify accelerated stochastic gradient methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a config grid and write one CSV per cell.
    Bench(RunArgs),
    /// Run a named invariant suite.
    Verify {
        /// lemma1, lemma2, schedules, snag-equivalence, deterministic-rates or stochastic-rates
        suite: String,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Measure the degradation of the final suboptimality across noise levels.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed and SHANG_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Usage(anyhow::Error),
    Verification,
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Verification => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Resolved {
    config: RunConfig,
    seed: u64,
    out: PathBuf,
    exec: Execution,
    quiet: bool,
}

fn execution(jobs: Option<usize>) -> Execution {
    Execution::Parallel { jobs }
}

fn resolve(args: &RunArgs) -> anyhow::Result<Resolved> {
    let config = config::load(&args.config)?;
    let env_seed = match std::env::var("SHANG_SEED") {
        Ok(s) => Some(s.trim().parse::<u64>().with_context(|| format!("SHANG_SEED is not a u64: {s:?}"))?),
        Err(_) => None,
    };
    let seed = args.seed.or(config.seed).or(env_seed).unwrap_or(0);
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    if args.jobs == Some(0) || config.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    Ok(Resolved {
        exec: execution(args.jobs.or(config.jobs)),
        quiet: args.quiet || config.quiet,
        seed,
        out,
        config,
    })
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: &Path, contents: &str) -> Outcome {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Runtime)
}

fn monte_carlo(spec: &ExperimentSpec, precision: Precision, exec: Execution) -> shang::Result<TrajectoryStats> {
    match precision {
        Precision::F64 => run_monte_carlo::<f64>(spec, exec),
        Precision::F32 => run_monte_carlo::<f32>(spec, exec),
    }
}

fn summary_line(stats: &TrajectoryStats, file: &str) -> String {
    let last = stats.final_row().expect("at least one recorded row");
    let vs_bound = if last.bound.is_nan() {
        "no proven envelope".to_string()
    } else {
        format!("bound {}, energy/bound {:.4}", fmt_float(last.bound), last.mean_energy / last.bound)
    };
    format!(
        "{:<10} {:<12} sigma={:<6} k={} mean_subopt {} mean_energy {} ({vs_bound}), diverged {}/{} -> {file}",
        stats.method,
        stats.problem,
        stats.sigma,
        last.k,
        fmt_float(last.mean_subopt),
        fmt_float(last.mean_energy),
        stats.diverged_runs,
        stats.n_runs
    )
}

fn bench(args: &RunArgs) -> Outcome {
    let r = resolve(args).map_err(Failure::Usage)?;
    let specs = r.config.specs(r.seed).map_err(Failure::Usage)?;
    prepare_out(&r.out).map_err(Failure::Usage)?;
    for spec in &specs {
        let stats = monte_carlo(spec, r.config.experiment.precision, r.exec).map_err(|e| {
            Failure::Runtime(anyhow!(e).context(format!(
                "experiment failed: method {}, problem {}, sigma {}",
                spec.method.label(),
                spec.problem.label(),
                spec.sigma
            )))
        })?;
        let name = csv_name(spec);
        write(&r.out.join(&name), &stats.to_csv())?;
        if !r.quiet {
            println!("{}", summary_line(&stats, &name));
        }
    }
    Ok(())
}

fn sweep(args: &RunArgs) -> Outcome {
    let r = resolve(args).map_err(Failure::Usage)?;
    let section = r
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Usage(anyhow!("sweep requires a [sweep] section with a sigmas list")))?;
    if r.config.experiment.sigma.is_some() {
        return Err(Failure::Usage(anyhow!(
            "experiment.sigma is not used by sweep; list noise levels in sweep.sigmas and set sweep.tune_sigma"
        )));
    }
    if !section.sigmas.contains(&0.0) {
        return Err(Failure::Usage(anyhow!("sweep.sigmas must contain 0")));
    }
    let mut specs = r.config.specs(r.seed).map_err(Failure::Usage)?;
    for spec in &mut specs {
        spec.sigma = section.tune_sigma;
        spec.validate().map_err(|e| Failure::Usage(anyhow!(e).context("invalid sweep.tune_sigma")))?;
    }
    prepare_out(&r.out).map_err(Failure::Usage)?;
    for spec in &specs {
        let rows: Vec<SweepRow> = match r.config.experiment.precision {
            Precision::F64 => sigma_sweep::<f64>(spec, &section.sigmas, r.exec),
            Precision::F32 => sigma_sweep::<f32>(spec, &section.sigmas, r.exec),
        }
        .map_err(|e| Failure::Runtime(anyhow!(e).context(format!("sweep failed for {}", spec.method.label()))))?;
        let name = format!("sweep_{}", csv_name(spec).replacen(&format!("_sigma{}", spec.sigma), "", 1));
        write(&r.out.join(&name), &sweep_to_csv(&rows))?;
        if !r.quiet {
            println!("{} on {} -> {name}", spec.method.label(), spec.problem.label());
            for row in &rows {
                println!(
                    "  sigma={:<6} final_mean_subopt {} delta {:+.4e} log10 ratio {:+.3}{}",
                    row.sigma,
                    fmt_float(row.final_mean_subopt),
                    row.delta,
                    row.log10_ratio,
                    if row.diverged() {
                        format!("  DIVERGED {}/{}", row.diverged_runs, row.n_runs)
                    } else {
                        String::new()
                    }
                );
            }
        }
    }
    Ok(())
}

fn verify(suite: &str, jobs: Option<usize>, quiet: bool) -> Outcome {
    let suite: Suite = suite.parse::<Suite>().map_err(|e| Failure::Usage(anyhow!(e)))?;
    let report = run_suite(suite, execution(jobs)).map_err(|e| Failure::Runtime(anyhow!(e)))?;
    if !quiet {
        print!("{}", report.render());
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Bench(args) => bench(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify { suite, jobs, quiet } => verify(suite, *jobs, *quiet),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(e) | Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Verification => eprintln!("verification failed"),
            }
            ExitCode::from(failure.code())
        }
    }
}
