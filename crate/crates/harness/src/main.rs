//! `airhockey` — experiment harness CLI.
//!
//! Subcommands: `hit-bench`, `sysid`, `filter-eval`, `selfplay`. Each runs
//! a seeded study on a scenario and writes CSV reports (documented header
//! rows) into the output directory. Result files are byte-identical for a
//! given scenario and seed; wall-clock timings go to separate
//! `*_timing.csv` files. On failure a single machine-readable
//! `error: <message>` line goes to stderr and the exit code is nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use airhockey_harness::report::write_report;
use airhockey_harness::{bench, filter_eval, selfplay, sysid_run};
use airhockey_core::config::Scenario;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "airhockey",
    about = "Air-hockey pipeline experiment harness",
    version
)]
struct Cli {
    /// Scenario file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for report files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed for every randomized component.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a hit from every grid cell for every hit kind and mode.
    HitBench,
    /// Identify hidden simulator parameters; race the optimizer against
    /// random search on paired seeds.
    Sysid,
    /// Stream noisy simulated measurements through the tracker and score
    /// it against finite differencing.
    FilterEval {
        /// Number of evaluation traces.
        #[arg(long, default_value_t = 20)]
        traces: usize,
    },
    /// Play two tactic agents against each other and referee the game.
    Selfplay,
}

fn run(cli: &Cli) -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let scenario = match &cli.config {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    let out = &cli.out;
    let mut lines = Vec::new();
    match cli.command {
        Command::HitBench => {
            let report = bench::run_hit_bench(&scenario, cli.workers)?;
            write_report(out, "hit_bench.csv", &report.results_csv())?;
            write_report(out, "hit_bench_timing.csv", &report.timing_csv())?;
            write_report(out, "hit_bench_summary.csv", &report.summary_csv())?;
            lines.extend(report.summary_lines());
        }
        Command::Sysid => {
            let report = sysid_run::run_sysid(&scenario, cli.seed, cli.workers)?;
            write_report(out, "sysid_curves.csv", &report.curves_csv())?;
            write_report(out, "sysid_theta.csv", &report.theta_csv())?;
            write_report(out, "sysid_summary.csv", &report.summary_csv())?;
            lines.extend(report.summary_lines());
        }
        Command::FilterEval { traces } => {
            let report = filter_eval::run_filter_eval(&scenario, cli.seed, traces)?;
            write_report(out, "filter_eval.csv", &report.traces_csv())?;
            write_report(out, "filter_eval_summary.csv", &report.summary_csv())?;
            lines.extend(report.summary_lines());
        }
        Command::Selfplay => {
            let report = selfplay::run_selfplay(&scenario, cli.seed)?;
            write_report(out, "selfplay_log.csv", &report.log_csv)?;
            write_report(out, "selfplay_events.csv", &report.events_csv)?;
            write_report(out, "selfplay_summary.csv", &report.summary_csv())?;
            write_report(out, "selfplay_tactics.csv", &report.tactics_csv())?;
            lines.push(report.score_line());
            for v in &report.violations {
                lines.push(format!("violation: {v}"));
            }
        }
    }
    Ok(lines)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
