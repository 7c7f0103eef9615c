use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use liouville::experiment::{load_config, render_config, run_experiment, ExperimentConfig, ExperimentKind};
use liouville::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECKS_FAILED: u8 = 3;

/// Liouville quantum gravity experiments: fields, chaos, Liouville Brownian
/// motion and heat-kernel transforms.
#[derive(Parser)]
#[command(name = "liouville", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (key = value with [section] headers, or JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Use one fixed field for all bridge replicates.
    #[arg(long, global = true)]
    quenched: bool,

    /// Print the effective config and exit without running.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Chaos normalization over replicate fields.
    FieldCheck,
    /// Boundary spectral dimension from the explicit heat kernel.
    Boundary,
    /// Critical boundary chaos: derivative vs Seneta-Heyde normalization.
    Critical,
    /// Bulk spectral dimension from bridge transforms.
    Bulk,
    /// Table of heat-kernel transforms.
    Transform,
    /// Sup-ball mass exponents of bulk chaos.
    Ballmass,
    /// Coordinate-wise coupling of Brownian motions.
    Coupling,
    /// Bridge weight and occupation kernel identities; exit code 3 on failure.
    Identities,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::FieldCheck => ExperimentKind::FieldCheck,
            Command::Boundary => ExperimentKind::BoundarySpecdim,
            Command::Critical => ExperimentKind::CriticalBoundary,
            Command::Bulk => ExperimentKind::BulkSpecdim,
            Command::Transform => ExperimentKind::TransformTable,
            Command::Ballmass => ExperimentKind::BallMass,
            Command::Coupling => ExperimentKind::CouplingCheck,
            Command::Identities => ExperimentKind::IdentityChecks,
        }
    }
}

fn config_error(lines: &[String]) -> ExitCode {
    eprintln!("config error:");
    for l in lines {
        eprintln!("  {l}");
    }
    ExitCode::from(EXIT_CONFIG)
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let kind = cli.command.kind();
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::defaults(kind),
    };
    if config.experiment != kind {
        return Err(Error::Config(vec![format!("config describes `{}` but the subcommand runs `{}`", config.experiment, kind)]));
    }
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if cli.quenched {
        config.mc.quenched = true;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return config_error(&["`--workers` must be at least 1".into()]);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot start worker pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let config = match effective_config(&cli) {
        Ok(c) => c,
        Err(Error::Config(lines)) => return config_error(&lines),
        Err(e) => return config_error(&[e.to_string()]),
    };
    if cli.print_config {
        print!("{}", render_config(&config));
        return ExitCode::SUCCESS;
    }
    match run_experiment(&config) {
        Ok(manifest) => {
            println!("{}: {} file(s) in {} ({:.1} s)", config.experiment, manifest.files.len(), config.output_dir.display(), manifest.wall_time_s);
            for f in &manifest.files {
                println!("  {}", f.display());
            }
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            match manifest.checks_passed {
                Some(false) => {
                    eprintln!("identity checks failed; see identity_checks.json");
                    ExitCode::from(EXIT_CHECKS_FAILED)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(Error::Config(lines)) => config_error(&lines),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
