//! Experiment harness around `airhockey-core`.
//!
//! Four runnable studies, each a pure function of a [`Scenario`] and a seed
//! so that reports are byte-identical across runs:
//!
//! * [`bench::run_hit_bench`] — plans a hit from every grid cell for every
//!   hit kind and pipeline mode, and collects speed/feasibility/timing.
//! * [`sysid_run::run_sysid`] — hides a parameter vector, records reference
//!   traces, and races Bayesian optimization against random search.
//! * [`filter_eval::run_filter_eval`] — streams noisy measurements of
//!   simulated traces through the tracker and scores it against
//!   finite differencing.
//! * [`selfplay::run_selfplay`] — two tactic agents drive mallets through
//!   the full perception/planning stack against each other in simulation.
//!
//! Wall-clock timings are reported in separate `*_timing.csv` files: they
//! necessarily differ between runs, while every other artifact must not.

pub mod bench;
pub mod filter_eval;
pub mod report;
pub mod selfplay;
pub mod sysid_run;

use airhockey_core::config::ConfigError;
use airhockey_core::hit_optimizer::HitError;
use airhockey_core::path_planner::PlanError;
use airhockey_core::puck_tracker::TrackerError;
use airhockey_core::sysid::gp::GpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Hit(#[from] HitError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Build a local rayon pool with the requested number of workers. Grid
/// cells and optimizer batch evaluations fan out over this pool; report
/// files are always written by the calling thread.
pub fn worker_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("failed to build worker pool")
}
