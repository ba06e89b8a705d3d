mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{has_errors, parse, worker_count, ExperimentConfig, Kind, Level};
use output::RunDir;

/// Steady states of the driven, dissipative XY lattice.
#[derive(Parser)]
#[command(name = "ddxy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field detuning sweep in one or both directions.
    MfSweep(RunArgs),
    /// Mean-field bistability scan over hopping and drive.
    MfScan(RunArgs),
    /// Quantum trajectories on mean-field product states.
    MfTraj(RunArgs),
    /// Quantum trajectories on matrix-product states.
    MpsTraj(RunArgs),
    /// Matrix-product steady state at one detuning.
    MpoNess(RunArgs),
    /// Warm-started matrix-product steady states over a detuning grid.
    MpoSweep(RunArgs),
    /// Circuit-QED lattice against the XY chain it simulates.
    CqedCompare(RunArgs),
    /// Exact steady state of a small lattice.
    Oracle(RunArgs),
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output` in the config or `runs/<kind>-<hash>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to DDXY_WORKERS, then to all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Validate and print the plan without running.
    #[arg(long)]
    dry_run: bool,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

/// Prints findings; returns false if any is an error.
fn report(cfg: &ExperimentConfig) -> bool {
    let findings = cfg.validate();
    for f in &findings {
        eprintln!("{f}");
    }
    !has_errors(&findings)
}

fn run(kind: Kind, args: RunArgs) -> ExitCode {
    let mut cfg = match load(&args.config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if cfg.kind != kind {
        eprintln!("error: {} holds a {} config, not {kind}", args.config.display(), cfg.kind);
        return ExitCode::from(EXIT_CONFIG);
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if !report(&cfg) {
        return ExitCode::from(EXIT_CONFIG);
    }
    let seed_generated = cfg.resolve_seed();
    let hash = cfg.hash();
    let out = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{kind}-{}", &hash[..12])));
    let workers = worker_count(args.workers);
    if args.dry_run {
        println!("kind: {kind}");
        println!("config_hash: {hash}");
        println!("seed: {}{}", cfg.seed.expect("resolved"), if seed_generated { " (derived)" } else { "" });
        println!("output: {}", out.display());
        println!("workers: {}", workers.map_or_else(|| "all".into(), |n| n.to_string()));
        return ExitCode::SUCCESS;
    }
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: worker pool already set: {e}");
        }
    }

    let started = Instant::now();
    let result = RunDir::create(&out, &hash).and_then(|mut dir| {
        let outcome = experiments::run(&cfg, &mut dir)?;
        let manifest = json!({
            "kind": kind.name(),
            "config_hash": hash,
            "seed": cfg.seed,
            "seed_generated": seed_generated,
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "summary": outcome.summary,
            "warnings": outcome.warnings,
        });
        dir.finish(manifest)?;
        Ok(outcome.warnings)
    });
    match result {
        Ok(warnings) => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let timing = json!({
                "wall_seconds": started.elapsed().as_secs_f64(),
                "workers": rayon::current_num_threads(),
            });
            let path = out.join("timing.json");
            if let Err(e) = std::fs::write(&path, format!("{timing:#}\n")) {
                eprintln!("warning: cannot write {}: {e}", path.display());
            }
            println!("{kind} done: {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let ok = report(&cfg);
            let n = cfg.validate().iter().filter(|f| f.level != Level::Info).count();
            println!("{}: {} ({n} findings)", config.display(), if ok { "ok" } else { "invalid" });
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CONFIG) };
        }
        Command::MfSweep(a) => (Kind::MfSweep, a),
        Command::MfScan(a) => (Kind::MfScan, a),
        Command::MfTraj(a) => (Kind::MfTraj, a),
        Command::MpsTraj(a) => (Kind::MpsTraj, a),
        Command::MpoNess(a) => (Kind::MpoNess, a),
        Command::MpoSweep(a) => (Kind::MpoSweep, a),
        Command::CqedCompare(a) => (Kind::CqedCompare, a),
        Command::Oracle(a) => (Kind::Oracle, a),
    };
    run(kind, args)
}
