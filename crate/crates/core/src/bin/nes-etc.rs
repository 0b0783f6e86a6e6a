use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nes_etc::cli::{self, RunOverrides, SweepParam};
use nes_etc::Mode;

#[derive(Parser)]
#[command(name = "nes-etc", version, about = "Event-triggered Nash equilibrium seeking")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory, event logs and summary.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-final")]
        t_final: Option<f64>,
    },
    /// Re-run a scenario over a list of frequency or threshold scales.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the stability report as JSON.
    Report { scenario: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Run {
            scenario,
            out,
            mode,
            dt,
            t_final,
        } => cli::cmd_run(&scenario, &out, RunOverrides { mode, dt, t_final }).map(|s| {
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
        }),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => cli::parse_values(&values)
            .and_then(|v| cli::cmd_sweep(&scenario, param, &v, &out))
            .map(|rows| print!("{}", cli::sweep_csv(&rows))),
        Command::Report { scenario } => cli::cmd_report(&scenario).map(|r| {
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
