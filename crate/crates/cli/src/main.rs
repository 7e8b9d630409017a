use std::path::PathBuf;
use std::process::ExitCode;

use atomcorr::config::{parse_config, scenario, validate, Command, RunConfig, SCENARIOS};
use atomcorr::pipeline::run;
use clap::{Args, Parser, Subcommand};

/// Photon correlations of laser-driven interacting atom chains.
#[derive(Parser)]
#[command(name = "atomcorr", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scan detector angles and write fields and contours.
    Scan(RunArgs),
    /// Write only the requested contour files.
    Contours(RunArgs),
    /// Lattice-spacing rescaling protocol.
    Scaling(RunArgs),
    /// Ratio of G2 maps for two coupling Rabi frequencies.
    RabiRatio(RunArgs),
    /// Solve for the steady state and write rho.txt.
    SteadyState(RunArgs),
    /// Print the available presets.
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Preset name, used when no config file is given.
    #[arg(long, short)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Grid points per angle axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write PNG heatmaps.
    #[arg(long)]
    heatmaps: bool,
    /// Simulate uncoupled atoms.
    #[arg(long)]
    no_interaction: bool,
    /// Write the Liouvillian as liouvillian.txt (large).
    #[arg(long)]
    dump_liouvillian: bool,
    /// Write the steady state as rho.txt.
    #[arg(long)]
    dump_rho: bool,
}

fn load(args: RunArgs, command: Command) -> atomcorr::Result<RunConfig> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(path), None) => parse_config(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => scenario(name)?,
        _ => {
            return Err(atomcorr::Error::ConfigField {
                field: "scenario".into(),
                message: "pass exactly one of --config and --scenario".into(),
            })
        }
    };
    cfg.command = command;
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.emit_heatmaps |= args.heatmaps;
    cfg.interaction_off |= args.no_interaction;
    cfg.debug.dump_liouvillian |= args.dump_liouvillian;
    cfg.debug.dump_rho |= args.dump_rho;
    validate(&cfg)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, command) = match cli.command {
        Cmd::Scan(a) => (a, Command::Scan),
        Cmd::Contours(a) => (a, Command::Contours),
        Cmd::Scaling(a) => (a, Command::Scaling),
        Cmd::RabiRatio(a) => (a, Command::RabiRatio),
        Cmd::SteadyState(a) => (a, Command::SteadyState),
        Cmd::ListScenarios => {
            for s in SCENARIOS {
                println!("{:<16} {}", s.name, s.description);
            }
            return ExitCode::SUCCESS;
        }
    };
    let cfg = match load(args, command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(report) if report.success => {
            for f in &report.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Ok(report) => {
            eprintln!("error: {}", report.error.unwrap_or_default());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
