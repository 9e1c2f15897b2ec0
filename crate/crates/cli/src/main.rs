//! `nfvsim` command-line front end.
//!
//! Exit codes: 0 success, 1 run failed (e.g. a VM fits no host), 2 usage or
//! configuration error, 3 invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use nfvsim_core::compare::{compare, comparison_csv};
use nfvsim_core::config::{self, ConfigFile};
use nfvsim_core::engine::{run, SimConfig};
use nfvsim_core::policies::PolicyKind;
use nfvsim_core::workload::{
    diurnal_profile, generate_nfvlets_seeded, parse_trace, render_traces, write_values, AppType,
    DiurnalKind, GeneratorSpec, LengthDistribution, Resource, TraceSet,
};
use nfvsim_core::Error;

#[derive(Parser)]
#[command(
    name = "nfvsim",
    version,
    about = "Energy-aware NFV data-center simulator"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write summary.txt and timeseries.csv.
    Run(RunArgs),
    /// Run several policies on every case and write comparison.csv.
    Compare(CompareArgs),
    /// Write the four workload trace files.
    GenWorkload(GenArgs),
    /// Check a config file and print the effective configuration.
    ValidateConfig(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct Common {
    /// Config file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, env = "NFVSIM_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides the config policy.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated policy names.
    #[arg(long, default_value = "drs,ecocloud,nfv")]
    policy: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Distribution {
    Uniform,
    Normal,
    Poisson,
}

#[derive(Clone, Copy, ValueEnum)]
enum App {
    CpuIntensive,
    IoIntensive,
    Hybrid,
}

#[derive(Args)]
struct GenArgs {
    /// Base name of the files.
    #[arg(long)]
    name: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Emit the built-in one-day profile instead of generating NFVlets.
    #[arg(long)]
    diurnal: bool,
    /// Number of NFVlets.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, env = "NFVSIM_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    distribution: Distribution,
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long)]
    std_dev: Option<f64>,
    #[arg(long, value_enum, default_value = "cpu-intensive")]
    app_type: App,
    /// MIPS of the reference VM the NFVlets run on.
    #[arg(long, default_value_t = 1000.0)]
    ref_mips: f64,
    /// Seconds per trace value.
    #[arg(long, default_value_t = 1.0)]
    interval: f64,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvariantViolation { .. } => 3,
            Error::PlacementFailed { .. }
            | Error::NoHosts
            | Error::NoVm(_)
            | Error::ZeroCapacity(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GenWorkload(a) => cmd_gen_workload(a),
        Command::ValidateConfig(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: Option<&Path>) -> Result<(ConfigFile, SimConfig), Failure> {
    match path {
        Some(p) => Ok(config::load(p)?),
        None => {
            let file = ConfigFile::default();
            let cfg = file.to_sim_config(Path::new("."))?;
            Ok((file, cfg))
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(|error| Failure { code: 1, error })
}

fn make_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(|error| Failure { code: 2, error })
}

fn parse_policy(name: &str) -> Result<PolicyKind, Failure> {
    PolicyKind::parse(name).ok_or_else(|| {
        let valid: Vec<&str> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
        anyhow!("unknown policy {name:?}; valid names: {}", valid.join(", ")).into()
    })
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let (_, mut cfg) = load(a.common.config.as_deref())?;
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &a.policy {
        cfg.policy = parse_policy(p)?;
    }
    make_dir(&a.common.out)?;
    let report = run(&cfg)?;
    write(&a.common.out.join("summary.txt"), &report.to_summary_text())?;
    write(
        &a.common.out.join("timeseries.csv"),
        &report.timeseries_csv(),
    )?;
    println!(
        "{}: {:.4} kWh, {} migrations, {} hosts used",
        report.policy, report.total_energy_kwh, report.migration_count, report.pms_used
    );
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> CmdResult {
    let (file, mut cfg) = load(a.common.config.as_deref())?;
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    let mut policies = Vec::new();
    for name in a.policy.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind = parse_policy(name)?;
        if policies.contains(&kind) {
            warn!("policy {kind} listed more than once; running it once");
        } else {
            policies.push(kind);
        }
    }
    if policies.len() < 2 {
        return Err(anyhow!(
            "compare needs at least 2 distinct policies, got {}",
            policies.len()
        )
        .into());
    }
    let cases = if file.cases.is_empty() {
        vec![("default".to_string(), cfg.clone())]
    } else {
        file.case_configs(&cfg)?
    };
    make_dir(&a.common.out)?;
    let rows = compare(&cases, &policies);
    write(&a.common.out.join("comparison.csv"), &comparison_csv(&rows))?;

    let total = rows.len();
    let mut failed = 0;
    let mut code = 0;
    for row in rows {
        match row.outcome {
            Ok(r) => println!(
                "{:<12} {:<9} {:>12.4} kWh {:>6} migrations",
                row.case,
                row.policy.name(),
                r.total_energy_kwh,
                r.migration_count
            ),
            Err(e) => {
                eprintln!("{:<12} {:<9} failed: {e}", row.case, row.policy.name());
                failed += 1;
                code = code.max(Failure::from(e).code);
            }
        }
    }
    if failed > 0 {
        return Err(Failure {
            code,
            error: anyhow!("{failed} of {total} runs failed; see comparison.csv"),
        });
    }
    Ok(())
}

fn cmd_gen_workload(a: GenArgs) -> CmdResult {
    make_dir(&a.out)?;
    let base = a.out.join(&a.name);
    let (interval, traces) = if a.diurnal {
        let set = diurnal_profile(DiurnalKind::ComputationalIntensive);
        (
            set.cpu.interval_len,
            Resource::ALL.map(|r| (r, set.get(r).values.clone())),
        )
    } else {
        let length_distribution = match a.distribution {
            Distribution::Uniform => {
                let LengthDistribution::Uniform { min, max } = LengthDistribution::default() else {
                    unreachable!()
                };
                LengthDistribution::Uniform {
                    min: a.min.unwrap_or(min),
                    max: a.max.unwrap_or(max),
                }
            }
            Distribution::Normal => {
                let LengthDistribution::Normal { mean, std_dev } =
                    LengthDistribution::default_normal()
                else {
                    unreachable!()
                };
                LengthDistribution::Normal {
                    mean: a.mean.unwrap_or(mean),
                    std_dev: a.std_dev.unwrap_or(std_dev),
                }
            }
            Distribution::Poisson => {
                let LengthDistribution::Poisson { mean } = LengthDistribution::default_poisson()
                else {
                    unreachable!()
                };
                LengthDistribution::Poisson {
                    mean: a.mean.unwrap_or(mean),
                }
            }
        };
        let app_type = match a.app_type {
            App::CpuIntensive => AppType::CpuIntensive,
            App::IoIntensive => AppType::IoIntensive,
            App::Hybrid => AppType::Hybrid,
        };
        let spec = GeneratorSpec {
            length_distribution,
            task_count: a.count,
            app_type,
            seed: a.seed,
        };
        spec.validate()?;
        let nfvlets = generate_nfvlets_seeded(&spec)?;
        (a.interval, render_traces(&nfvlets, a.ref_mips, a.interval)?)
    };
    for ((r, path), (_, values)) in TraceSet::paths(&base).into_iter().zip(traces) {
        let text = write_values(interval, &values);
        write(&path, &text)?;
        match parse_trace(&text, r) {
            Ok(_) => {}
            Err(Error::EmptyTrace) => warn!(
                "{} has no values and will not load as a workload",
                path.display()
            ),
            Err(e) => return Err(anyhow!("{} does not re-parse: {e}", path.display()).into()),
        }
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_validate(a: ConfigArg) -> CmdResult {
    let (_, cfg) = load(Some(&a.config))?;
    cfg.validate()?;
    print!("{}", ConfigFile::from_sim(&cfg).to_toml());
    Ok(())
}
