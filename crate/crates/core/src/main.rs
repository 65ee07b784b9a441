use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fsc_distill::cli::{evaluate_file, run, Error, Heuristic, Mode, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fsc-distill", version, about = "Learn small finite-state controllers for POMDP strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn, complete and evaluate a controller.
    Run {
        #[arg(long)]
        model: PathBuf,
        /// `maxprob|minprob|maxreward|minreward[:label,...]`
        #[arg(long)]
        objective: Option<String>,
        #[arg(long, default_value = "belief", value_parser = parse_mode)]
        mode: Mode,
        /// Strategy table (CSV) for table mode.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value = "portfolio", value_parser = parse_heuristic)]
        heuristic: Heuristic,
        #[arg(long, default_value_t = 10_000)]
        max_beliefs: usize,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long, default_value_t = 0)]
        cutoff_strategy: usize,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo episodes for a sanity check of the chosen controller.
        #[arg(long, default_value_t = 0)]
        simulate: usize,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long)]
        fsc_out: Option<PathBuf>,
        #[arg(long)]
        dot_out: Option<PathBuf>,
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Include wall-clock timings in the report file.
        #[arg(long)]
        timings: bool,
    },
    /// Evaluate a stored controller.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        fsc: PathBuf,
        #[arg(long)]
        objective: Option<String>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_heuristic(s: &str) -> Result<Heuristic, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("FSC_DISTILL_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            model,
            objective,
            mode,
            table,
            heuristic,
            max_beliefs,
            max_depth,
            cutoff_strategy,
            tolerance,
            seed,
            simulate,
            horizon,
            fsc_out,
            dot_out,
            report_out,
            timings,
        } => {
            let config = RunConfig {
                model,
                objective,
                mode,
                table,
                heuristic,
                max_beliefs,
                max_depth: max_depth.unwrap_or(usize::MAX),
                cutoff_strategy,
                tolerance,
                seed,
                episodes: simulate,
                horizon,
                fsc_out,
                dot_out,
                report_out,
                timings,
            };
            run(&config).map(|outcome| {
                print!("{}", outcome.report.render_table(outcome.wall_time));
            })
        }
        Command::Evaluate {
            model,
            fsc,
            objective,
        } => evaluate_file(&model, &fsc, objective.as_deref()).map(|report| {
            println!("{}", serde_json::to_string(&report).expect("report serialization"));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            if matches!(e, Error::Io { .. }) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
