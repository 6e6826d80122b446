//! System-identification study: Bayesian optimization vs. random search.
//!
//! A hidden parameter vector is drawn from the seed (strictly inside the
//! admissible box), reference traces are simulated under it, and both
//! identification algorithms get the same evaluation budget on the same
//! reference data over several paired seeds. Reports record best-so-far
//! loss curves, final parameter estimates, and mean position errors.

use airhockey_core::config::Scenario;
use airhockey_core::puck_dynamics::{simulate_trace, PuckState, SimParams, Trace, PARAM_NAMES};
use airhockey_core::sysid::{
    identify, mean_position_error, params_from_unit, random_search, IdentifyReport,
};
use airhockey_core::table::TableGeometry;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{fmt, Csv};
use crate::{worker_pool, HarnessError};

/// Reference traces recorded under the hidden parameters.
pub const N_TRACES: usize = 10;
/// Paired (identify, random-search) runs per study.
pub const N_RUNS: usize = 5;

/// One paired run: identify and random search on the same budget and data.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub seed: u64,
    pub bo: IdentifyReport,
    pub random: IdentifyReport,
    pub bo_position_error: f64,
    pub random_position_error: f64,
}

#[derive(Debug, Clone)]
pub struct SysidReport {
    pub theta_true: SimParams,
    pub runs: Vec<PairedRun>,
    /// Runs where the optimizer's best loss is no worse than random search's.
    pub bo_wins: usize,
}

/// Draw the hidden parameters strictly inside the admissible box so no
/// bound is exactly active.
pub fn hidden_params(rng: &mut ChaCha8Rng) -> SimParams {
    let mut unit = [0.0; 7];
    for u in &mut unit {
        *u = rng.gen_range(0.15..0.85);
    }
    params_from_unit(&unit)
}

/// Record `n` reference traces under `theta` from randomized interior
/// starts.
pub fn reference_traces(
    theta: &SimParams,
    table: &TableGeometry,
    dt: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Trace> {
    (0..n)
        .map(|_| {
            let initial = PuckState::new(
                Vector2::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.35..0.35)),
                Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-6.0..6.0),
            );
            simulate_trace(&initial, theta, table, dt, 2.0)
        })
        .collect()
}

/// Run the full study: one hidden parameter draw, one trace set, and
/// `N_RUNS` paired (identify, random-search) races derived from `seed`.
pub fn run_sysid(scenario: &Scenario, seed: u64, workers: usize) -> Result<SysidReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_true = hidden_params(&mut rng);
    let traces = reference_traces(
        &theta_true,
        &scenario.table,
        scenario.sim_dt,
        N_TRACES,
        &mut rng,
    );
    let run_seeds: Vec<u64> = (0..N_RUNS).map(|_| rng.gen()).collect();

    let pool = worker_pool(workers);
    let mut runs = Vec::with_capacity(N_RUNS);
    for run_seed in run_seeds {
        // identify() fans its batch evaluations out over the ambient rayon
        // pool; scope it so the worker budget applies.
        let bo = pool.install(|| identify(&traces, &scenario.table, &scenario.sysid, run_seed))?;
        let random = random_search(&traces, &scenario.table, &scenario.sysid, run_seed ^ 0x5eed);
        let bo_position_error = mean_position_error(&bo.theta_best, &traces, &scenario.table);
        let random_position_error =
            mean_position_error(&random.theta_best, &traces, &scenario.table);
        runs.push(PairedRun {
            seed: run_seed,
            bo,
            random,
            bo_position_error,
            random_position_error,
        });
    }
    let bo_wins = runs
        .iter()
        .filter(|r| r.bo.best_loss <= r.random.best_loss)
        .count();
    Ok(SysidReport {
        theta_true,
        runs,
        bo_wins,
    })
}

impl SysidReport {
    /// Best-so-far loss after each iteration for both algorithms.
    /// Header: `run,seed,iteration,bo_best,random_best`.
    pub fn curves_csv(&self) -> String {
        let mut csv = Csv::new("run,seed,iteration,bo_best,random_best");
        for (i, r) in self.runs.iter().enumerate() {
            let n = r.bo.curve.len().max(r.random.curve.len());
            for k in 0..n {
                let last = |c: &[f64], k: usize| c[k.min(c.len() - 1)];
                csv.row(&[
                    i.to_string(),
                    r.seed.to_string(),
                    k.to_string(),
                    fmt(last(&r.bo.curve, k)),
                    fmt(last(&r.random.curve, k)),
                ]);
            }
        }
        csv.to_string()
    }

    /// Hidden and estimated parameter vectors with their scores.
    /// Header: `run,seed,algo,<7 parameter names>,loss,mean_position_error`.
    pub fn theta_csv(&self) -> String {
        let header = format!("run,seed,algo,{},loss,mean_position_error", PARAM_NAMES.join(","));
        let mut csv = Csv::new(&header);
        let mut push = |run: String, seed: String, algo: &str, p: &SimParams, loss: f64, err: f64| {
            let mut fields = vec![run, seed, algo.to_string()];
            fields.extend(p.to_array().iter().map(|v| fmt(*v)));
            fields.push(fmt(loss));
            fields.push(fmt(err));
            csv.row(&fields);
        };
        push(
            "-".into(),
            "-".into(),
            "hidden",
            &self.theta_true,
            0.0,
            0.0,
        );
        for (i, r) in self.runs.iter().enumerate() {
            push(
                i.to_string(),
                r.seed.to_string(),
                "bo",
                &r.bo.theta_best,
                r.bo.best_loss,
                r.bo_position_error,
            );
            push(
                i.to_string(),
                r.seed.to_string(),
                "random",
                &r.random.theta_best,
                r.random.best_loss,
                r.random_position_error,
            );
        }
        csv.to_string()
    }

    /// One row per paired run. Header:
    /// `run,seed,bo_best_loss,random_best_loss,bo_position_error,random_position_error,bo_wins`.
    pub fn summary_csv(&self) -> String {
        let mut csv = Csv::new(
            "run,seed,bo_best_loss,random_best_loss,bo_position_error,random_position_error,bo_wins",
        );
        for (i, r) in self.runs.iter().enumerate() {
            csv.row(&[
                i.to_string(),
                r.seed.to_string(),
                fmt(r.bo.best_loss),
                fmt(r.random.best_loss),
                fmt(r.bo_position_error),
                fmt(r.random_position_error),
                ((r.bo.best_loss <= r.random.best_loss) as u8).to_string(),
            ]);
        }
        csv.to_string()
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for (i, r) in self.runs.iter().enumerate() {
            lines.push(format!(
                "sysid run {i}: bo best {:.3e} (pos err {:.4} m) vs random best {:.3e} (pos err {:.4} m)",
                r.bo.best_loss, r.bo_position_error, r.random.best_loss, r.random_position_error,
            ));
        }
        lines.push(format!(
            "sysid: optimizer wins {}/{} paired runs",
            self.bo_wins,
            self.runs.len()
        ));
        lines
    }
}
