use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sicspin_cli::{execute, schema, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "sicspin", version, about = "EPR, DEER and spin-wave resonance scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key (`key=value`, `output.key=value`); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// CSV output path (overrides output.csvPath).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// SVG plot path (overrides output.plotPath).
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print every scenario with its keys, defaults and units.
    List,
    /// CW resonance positions and spectra over a polar-angle grid.
    Rotpattern(RunArgs),
    /// CW or echo-detected field sweep at one angle.
    Fieldsweep(RunArgs),
    /// Nutation traces of the probed transition.
    Rabi(RunArgs),
    /// Echo amplitude vs 2τ after an optical prelude.
    Echodecay(RunArgs),
    /// Echo-detected population difference through an optical pulse.
    Pumprecovery(RunArgs),
    /// Probe echo vs pump frequency.
    Deer(RunArgs),
    /// Spin-wave resonance modes of a ferromagnetic stripe.
    Swr(RunArgs),
    /// Monoexponential fit of a two-column CSV trace.
    Fit(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::List => {
            print!("{}", schema::catalog());
            return ExitCode::SUCCESS;
        }
        Command::Rotpattern(a) => (Scenario::RotPattern, a),
        Command::Fieldsweep(a) => (Scenario::FieldSweep, a),
        Command::Rabi(a) => (Scenario::Rabi, a),
        Command::Echodecay(a) => (Scenario::EchoDecay, a),
        Command::Pumprecovery(a) => (Scenario::PumpRecovery, a),
        Command::Deer(a) => (Scenario::Deer, a),
        Command::Swr(a) => (Scenario::Swr, a),
        Command::Fit(a) => (Scenario::Fit, a),
    };
    let overrides = Overrides {
        sets: args.sets,
        csv: args.csv,
        plot: args.plot,
    };
    match execute(scenario, args.config.as_deref(), &overrides) {
        Ok(report) => {
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            eprintln!("wrote {} ({} rows)", report.csv_path.display(), report.rows);
            for p in report.extra_paths.iter().chain(report.plot_path.as_ref()) {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sicspin {}: {e}", scenario.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
