use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roughroad_cli::{read_scenario, run, CliError, CommandKind};

#[derive(Parser)]
#[command(
    name = "roughroad",
    version,
    about = "Stationary profiles and simulations for nonlocal traffic on a road with a speed-limit jump"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the far-field pair and print the flux level set.
    Classify(Common),
    /// Build one stationary profile.
    Profile(Common),
    /// Build a family of profiles, one per trace.
    Family(Common),
    /// Run the Riemann problem and write snapshots.
    Simulate(Common),
    /// Run all sixteen cases and write a case atlas.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the scenario's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid spacing; overrides the scenario's `dx`.
    #[arg(long)]
    dx: Option<f64>,
    /// Do not print the report.
    #[arg(long)]
    quiet: bool,
    /// Worker threads for concurrent work.
    #[arg(long, env = "ROUGHROAD_WORKERS")]
    workers: Option<usize>,
}

fn execute(kind: CommandKind, args: Common) -> Result<(), CliError> {
    if let Some(n) = args.workers.filter(|&n| n > 0) {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let scenario = read_scenario(&args.config)?;
    let report = run(kind, scenario, args.out, args.dx)?;
    if !args.quiet {
        for line in &report.lines {
            println!("{line}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Classify(a) => (CommandKind::Classify, a),
        Command::Profile(a) => (CommandKind::Profile, a),
        Command::Family(a) => (CommandKind::Family, a),
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Sweep(a) => (CommandKind::Sweep, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
