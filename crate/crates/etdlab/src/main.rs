use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use etdlab::analysis;
use etdlab::config::ExperimentConfig;
use etdlab::experiment::{self, ExperimentError, ExperimentOutput};
use etdlab::spec_file;

#[derive(Parser)]
#[command(name = "etdlab", version, about = "Emphatic TD experiments on finite MDPs")]
struct Cli {
    /// Worker threads for multi-seed runs.
    #[arg(long, global = true, env = "ETDLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print validation checks and all oracle quantities as JSON.
    Analyze { spec: PathBuf },
    /// Run the analytic invariant suite; exit 0 if it passes, 1 if not, 2 if the spec is unreadable.
    Verify { spec: PathBuf },
    /// Run one algorithm over all seeds and write runs.csv and summary.json.
    Run { config: PathBuf },
    /// Run a base config under each of its named variants.
    Sweep { config: PathBuf },
    /// Run several algorithms on shared transition streams.
    Compare { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = etdlab::resolve_threads(cli.threads);
    match cli.command {
        Command::Analyze { spec } => match spec_file::load_spec(&spec) {
            Ok(s) => {
                println!("{}", serde_json::to_string_pretty(&analysis::analyze(&s)).expect("analysis serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Verify { spec } => match spec_file::load_spec(&spec) {
            Ok(s) => {
                let report = analysis::verify_spec(&s);
                print!("{}", report.render());
                if report.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config } => finish(ExperimentConfig::load(&config).map_err(Into::into).and_then(|c| experiment::run_experiment(&c, threads))),
        Command::Compare { config } => {
            finish(ExperimentConfig::load(&config).map_err(Into::into).and_then(|c| experiment::compare_algorithms(&c, threads)))
        }
        Command::Sweep { config } => match experiment::sweep(&config, threads) {
            Ok(entries) => {
                for e in entries {
                    let median = e.final_median.map_or("-".to_string(), |m| format!("{m:.6e}"));
                    println!("{}: {} final median {median}, abort rate {}", e.name, e.algorithm, e.abort_rate);
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}

fn finish(result: Result<ExperimentOutput, ExperimentError>) -> ExitCode {
    match result {
        Ok(out) => {
            for w in &out.summary.warnings {
                eprintln!("warning: {w}");
            }
            for alg in &out.summary.algorithms {
                let metric = alg.metrics.iter().find(|(k, _)| k.starts_with("err_")).map(|(k, v)| (k, v.last()));
                if let Some((name, Some(last))) = metric {
                    let median = last.median.map_or("-".to_string(), |m| format!("{m:.6e}"));
                    println!("{}: t={} median {name} {median}, abort rate {}", alg.algorithm, last.t, alg.abort_rate);
                }
            }
            println!("wrote {}", out.summary.config.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
