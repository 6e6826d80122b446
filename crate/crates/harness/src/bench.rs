//! Grid benchmark of the hit pipeline.
//!
//! For every grid cell, hit kind, and pipeline mode, a hit is planned from
//! the home rest configuration toward the opponent goal center, the mallet
//! returning to its start. Rows record feasibility, the achieved hit speed,
//! and the retry count; planning wall time goes to a separate timing file
//! and into per-mode summary statistics (mean/min/max/median).

use std::time::Instant;

use airhockey_core::config::Scenario;
use airhockey_core::hit_optimizer::{plan_hit_trajectory, HitMode};
use airhockey_core::path_planner::{compute_hit_direction, HitKind};
use nalgebra::Vector2;
use rayon::prelude::*;

use crate::report::{fmt, mean, median, Csv};
use crate::{worker_pool, HarnessError};

/// One benchmark task: a puck position (with its grid indices), a hit kind,
/// and a pipeline mode.
#[derive(Debug, Clone, Copy)]
pub struct BenchCell {
    pub ix: usize,
    pub iy: usize,
    pub puck: Vector2<f64>,
    pub kind: HitKind,
    pub mode: HitMode,
}

/// Outcome of planning one cell.
#[derive(Debug, Clone, Copy)]
pub struct BenchOutcome {
    pub feasible: bool,
    pub hit_speed: f64,
    pub trials: usize,
    pub hit_index: usize,
    pub samples: usize,
    pub wall_ms: f64,
}

/// Per-(mode, kind) aggregate over the grid.
#[derive(Debug, Clone)]
pub struct BenchAggregate {
    pub mode: HitMode,
    /// `None` aggregates over all kinds.
    pub kind: Option<HitKind>,
    pub cells: usize,
    pub feasible: usize,
    pub mean_speed: f64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub median_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
    pub outcomes: Vec<BenchOutcome>,
    pub aggregates: Vec<BenchAggregate>,
}

/// Enumerate the benchmark tasks in deterministic row-major order:
/// grid cell outermost (x-major as produced by the grid), then hit kind,
/// then mode.
pub fn bench_cells(scenario: &Scenario) -> Vec<BenchCell> {
    let ny = scenario.grid.ny;
    let mut cells = Vec::new();
    for (i, puck) in scenario.grid.points().into_iter().enumerate() {
        let (ix, iy) = (i / ny, i % ny);
        for kind in HitKind::ALL {
            for mode in HitMode::ALL {
                cells.push(BenchCell {
                    ix,
                    iy,
                    puck,
                    kind,
                    mode,
                });
            }
        }
    }
    cells
}

fn run_cell(scenario: &Scenario, cell: &BenchCell) -> BenchOutcome {
    let table = &scenario.table;
    let goal = Vector2::new(0.5 * table.length, 0.0);
    let home_xy = {
        let p = scenario.chain.tool_position(&scenario.home_q);
        Vector2::new(p.x, p.y)
    };
    let t0 = Instant::now();
    let outcome = match compute_hit_direction(&cell.puck, &goal, table, cell.kind) {
        Ok(dir) => {
            let traj = plan_hit_trajectory(
                &scenario.chain,
                &scenario.home_q,
                &cell.puck,
                &dir,
                &home_xy,
                table,
                &scenario.pipeline,
                cell.mode,
            );
            BenchOutcome {
                feasible: traj.feasible,
                hit_speed: traj.achieved_hit_speed,
                trials: traj.trials,
                hit_index: traj.hit_index,
                samples: traj.samples.len(),
                wall_ms: 0.0,
            }
        }
        Err(_) => BenchOutcome {
            feasible: false,
            hit_speed: 0.0,
            trials: 0,
            hit_index: 0,
            samples: 0,
            wall_ms: 0.0,
        },
    };
    BenchOutcome {
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        ..outcome
    }
}

/// Run the full grid benchmark on `workers` threads. The returned outcome
/// vector is aligned with [`bench_cells`] regardless of scheduling.
pub fn run_hit_bench(scenario: &Scenario, workers: usize) -> Result<BenchReport, HarnessError> {
    let cells = bench_cells(scenario);
    let pool = worker_pool(workers);
    let outcomes: Vec<BenchOutcome> =
        pool.install(|| cells.par_iter().map(|c| run_cell(scenario, c)).collect());

    let mut aggregates = Vec::new();
    for mode in HitMode::ALL {
        for kind in HitKind::ALL.into_iter().map(Some).chain([None]) {
            let sel: Vec<usize> = (0..cells.len())
                .filter(|&i| cells[i].mode == mode && kind.is_none_or(|k| cells[i].kind == k))
                .collect();
            let times: Vec<f64> = sel.iter().map(|&i| outcomes[i].wall_ms).collect();
            let speeds: Vec<f64> = sel
                .iter()
                .filter(|&&i| outcomes[i].feasible)
                .map(|&i| outcomes[i].hit_speed)
                .collect();
            aggregates.push(BenchAggregate {
                mode,
                kind,
                cells: sel.len(),
                feasible: sel.iter().filter(|&&i| outcomes[i].feasible).count(),
                mean_speed: mean(&speeds),
                mean_ms: mean(&times),
                min_ms: times.iter().copied().fold(f64::INFINITY, f64::min),
                max_ms: times.iter().copied().fold(0.0, f64::max),
                median_ms: median(&times),
            });
        }
    }
    Ok(BenchReport {
        cells,
        outcomes,
        aggregates,
    })
}

impl BenchReport {
    /// Deterministic results table (no timings).
    /// Header: `ix,iy,puck_x,puck_y,kind,mode,feasible,hit_speed,trials,hit_index,samples`.
    pub fn results_csv(&self) -> String {
        let mut csv = Csv::new("ix,iy,puck_x,puck_y,kind,mode,feasible,hit_speed,trials,hit_index,samples");
        for (c, o) in self.cells.iter().zip(&self.outcomes) {
            csv.row(&[
                c.ix.to_string(),
                c.iy.to_string(),
                fmt(c.puck.x),
                fmt(c.puck.y),
                c.kind.name().to_string(),
                c.mode.name().to_string(),
                (o.feasible as u8).to_string(),
                fmt(o.hit_speed),
                o.trials.to_string(),
                o.hit_index.to_string(),
                o.samples.to_string(),
            ]);
        }
        csv.to_string()
    }

    /// Wall-clock planning time per cell; varies between runs by nature.
    /// Header: `ix,iy,kind,mode,wall_ms`.
    pub fn timing_csv(&self) -> String {
        let mut csv = Csv::new("ix,iy,kind,mode,wall_ms");
        for (c, o) in self.cells.iter().zip(&self.outcomes) {
            csv.row(&[
                c.ix.to_string(),
                c.iy.to_string(),
                c.kind.name().to_string(),
                c.mode.name().to_string(),
                fmt(o.wall_ms),
            ]);
        }
        csv.to_string()
    }

    /// Aggregate table, one row per (mode, kind) plus an all-kinds row per
    /// mode. Header:
    /// `mode,kind,cells,feasible,infeasible,mean_speed,mean_ms,min_ms,max_ms,median_ms`.
    pub fn summary_csv(&self) -> String {
        let mut csv =
            Csv::new("mode,kind,cells,feasible,infeasible,mean_speed,mean_ms,min_ms,max_ms,median_ms");
        for a in &self.aggregates {
            csv.row(&[
                a.mode.name().to_string(),
                a.kind.map_or("all", |k| k.name()).to_string(),
                a.cells.to_string(),
                a.feasible.to_string(),
                (a.cells - a.feasible).to_string(),
                fmt(a.mean_speed),
                fmt(a.mean_ms),
                fmt(a.min_ms),
                fmt(a.max_ms),
                fmt(a.median_ms),
            ]);
        }
        csv.to_string()
    }

    /// Console summary: one line per mode over all kinds.
    pub fn summary_lines(&self) -> Vec<String> {
        self.aggregates
            .iter()
            .filter(|a| a.kind.is_none())
            .map(|a| {
                format!(
                    "{:<10} feasible {:>4}/{:<4} mean speed {:>6.3} m/s | time ms mean {:>8.2} min {:>8.2} max {:>8.2} median {:>8.2}",
                    a.mode.name(),
                    a.feasible,
                    a.cells,
                    a.mean_speed,
                    a.mean_ms,
                    a.min_ms,
                    a.max_ms,
                    a.median_ms,
                )
            })
            .collect()
    }

    /// Aggregate over all kinds for one mode.
    pub fn mode_aggregate(&self, mode: HitMode) -> &BenchAggregate {
        self.aggregates
            .iter()
            .find(|a| a.mode == mode && a.kind.is_none())
            .expect("aggregate exists for every mode")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_enumeration_is_grid_by_kind_by_mode() {
        let mut s = Scenario::default();
        s.grid.nx = 2;
        s.grid.ny = 2;
        let cells = bench_cells(&s);
        assert_eq!(cells.len(), 2 * 2 * 3 * 3);
        assert_eq!((cells[0].ix, cells[0].iy), (0, 0));
        assert_eq!(cells[0].kind, HitKind::Direct);
        assert_eq!(cells[0].mode, HitMode::Qp);
        assert_eq!(cells[1].mode, HitMode::NlAqp);
        assert_eq!(cells[3].kind, HitKind::ForwardBounce);
        assert_eq!((cells[9].ix, cells[9].iy), (0, 1));
        assert_eq!((cells[18].ix, cells[18].iy), (1, 0));
    }
}
