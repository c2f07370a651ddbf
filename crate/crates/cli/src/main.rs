use atiyah::runner::{self, Kind, Overrides, EXIT_CONFIG};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Verification suites, symplectic-leaf reports and reduced dynamics for
/// principal bundles and their cotangent quotients.
#[derive(Parser)]
#[command(name = "atiyah", version)]
struct Cli {
    /// List the built-in scenarios and exit.
    #[arg(long, global = true)]
    list_builtins: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites; exit 1 if any check fails.
    Verify(RunArgs),
    /// Orbit and leaf report with sampled leaf points.
    Leaves(RunArgs),
    /// Integrate a reduced system and report invariant drift.
    Simulate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file or built-in scenario name.
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiply every tolerance by this factor.
    #[arg(long)]
    tol_scale: Option<f64>,
    /// Output directory (default: the scenario's `out`, else `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn list_builtins() {
    for s in runner::builtins() {
        println!("{}\t{}", s.name, s.kind);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_builtins {
        list_builtins();
        return ExitCode::SUCCESS;
    }
    let (kind, args) = match cli.command {
        Some(Command::Verify(a)) => (Kind::Verify, a),
        Some(Command::Leaves(a)) => (Kind::Leaves, a),
        Some(Command::Simulate(a)) => (Kind::Simulate, a),
        None => {
            eprintln!("error: expected one of verify, leaves, simulate (see --help)");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let Some(scenario) = args.scenario else {
        eprintln!("error: missing scenario file or built-in name");
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    let overrides = Overrides {
        seed: args.seed,
        tol_scale: args.tol_scale,
        out: args.out,
    };
    let outcome = runner::load(&scenario).and_then(|l| runner::run(&l, kind, &overrides));
    match outcome {
        Ok(o) => {
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            for name in &o.failing {
                eprintln!("FAILED {name}");
            }
            if let Some(m) = &o.message {
                eprintln!("{m}");
            }
            println!("{}", if o.exit_code == 0 { "PASS" } else { "FAIL" });
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
