use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conveyor_cli::config::RunMode;
use conveyor_cli::{run, RunOptions};

#[derive(Parser)]
#[command(name = "conveyor", version, about = "Conveyor-belt clock synchronization scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// belt, range, differential, fringe, dip or estimate
        #[arg(long)]
        mode_override: Option<RunMode>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            mode_override,
            seed,
        } => match run(&config, &out, &RunOptions { mode_override, seed }) {
            Ok(summary) => {
                for f in &summary.files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
