//! Black-box identification of the simulator parameters from reference
//! puck traces: a trace-replay loss, a warped-input Gaussian-process
//! surrogate, Monte Carlo acquisitions, and a Pareto evolutionary proposal
//! step, plus an equal-budget random-search baseline.

pub mod acquisition;
pub mod gp;
pub mod nsga;
pub mod warp;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use nalgebra::{DMatrix, DVector};

use crate::puck_dynamics::{step, wrap_angle, SimParams, Trace, PARAM_BOUNDS};
use crate::table::TableGeometry;
use gp::{FitOptions, GpError, GpModel};
use warp::OutputTransform;

/// Budget and acquisition knobs for the identification loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    pub iterations: usize,
    pub batch: usize,
    pub beta: f64,
    pub mc_samples: usize,
    pub population: usize,
    pub generations: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            iterations: 200,
            batch: 5,
            beta: 1.0,
            mc_samples: 256,
            population: 100,
            generations: 50,
        }
    }
}

/// Map a point in the unit cube onto the physical parameter box.
pub fn params_from_unit(unit: &[f64; 7]) -> SimParams {
    let mut a = [0.0; 7];
    for i in 0..7 {
        let (lo, hi) = PARAM_BOUNDS[i];
        a[i] = lo + unit[i].clamp(0.0, 1.0) * (hi - lo);
    }
    SimParams::from_array(&a)
}

/// Inverse of [`params_from_unit`].
pub fn params_to_unit(p: &SimParams) -> [f64; 7] {
    let a = p.to_array();
    let mut u = [0.0; 7];
    for i in 0..7 {
        let (lo, hi) = PARAM_BOUNDS[i];
        u[i] = ((a[i] - lo) / (hi - lo)).clamp(0.0, 1.0);
    }
    u
}

/// Trace-replay loss: re-simulate each reference trace from its initial
/// state under `theta` and accumulate the mean squared position error plus
/// 0.2 × the squared shortest angular distance, averaged over traces.
pub fn loss(theta: &SimParams, reference: &[Trace], table: &TableGeometry) -> f64 {
    assert!(!reference.is_empty(), "reference traces must be nonempty");
    let mut total = 0.0;
    for trace in reference {
        let steps = trace.states.len().saturating_sub(1);
        if steps == 0 {
            continue;
        }
        let mut state = trace.states[0];
        let mut acc = 0.0;
        for t in 1..=steps {
            state = step(&state, theta, table, &[], trace.dt);
            let dr = state.r - trace.states[t].r;
            let dphi = wrap_angle(state.phi - trace.states[t].phi);
            acc += dr.norm_squared() + 0.2 * dphi * dphi;
        }
        total += acc / steps as f64;
    }
    total / reference.len() as f64
}

/// Mean absolute position error (meters) of the re-simulated traces,
/// averaged over time and traces — the end-of-run quality figure.
pub fn mean_position_error(theta: &SimParams, reference: &[Trace], table: &TableGeometry) -> f64 {
    assert!(!reference.is_empty());
    let mut total = 0.0;
    for trace in reference {
        let steps = trace.states.len().saturating_sub(1);
        if steps == 0 {
            continue;
        }
        let mut state = trace.states[0];
        let mut acc = 0.0;
        for t in 1..=steps {
            state = step(&state, theta, table, &[], trace.dt);
            acc += (state.r - trace.states[t].r).norm();
        }
        total += acc / steps as f64;
    }
    total / reference.len() as f64
}

/// Cap on the surrogate's training-set size; beyond it the fit uses the
/// best half and the most recent half of the budget (the posterior stays
/// sharp near the incumbent while refits stay affordable). 256 keeps a
/// full 200×5 identification run within a couple of minutes on one core:
/// every per-iteration cost (Cholesky refit, front search) is cubic or
/// quadratic in this cap.
const TRAINING_CAP: usize = 256;

fn training_subset(ys: &[f64]) -> Vec<usize> {
    let n = ys.len();
    if n <= TRAINING_CAP {
        return (0..n).collect();
    }
    let mut by_value: Vec<usize> = (0..n).collect();
    by_value.sort_by(|&a, &b| ys[a].partial_cmp(&ys[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut chosen = vec![false; n];
    for &i in by_value.iter().take(TRAINING_CAP / 2) {
        chosen[i] = true;
    }
    let mut picked: usize = chosen.iter().filter(|&&c| c).count();
    for i in (0..n).rev() {
        if picked >= TRAINING_CAP {
            break;
        }
        if !chosen[i] {
            chosen[i] = true;
            picked += 1;
        }
    }
    (0..n).filter(|&i| chosen[i]).collect()
}

/// Running state of the Bayesian-optimization loop.
pub struct BoState {
    pub config: BoConfig,
    /// Evaluated inputs, unit-cube coordinates.
    pub xs: Vec<[f64; 7]>,
    /// Raw losses, aligned with `xs`.
    pub ys: Vec<f64>,
    pub model: Option<GpModel>,
    pub output_transform: OutputTransform,
    t_mean: f64,
    t_std: f64,
    pub iteration: usize,
}

impl BoState {
    pub fn new(config: BoConfig) -> BoState {
        assert!(config.batch >= 1, "batch size must be at least 1");
        BoState {
            config,
            xs: Vec::new(),
            ys: Vec::new(),
            model: None,
            output_transform: OutputTransform::default(),
            t_mean: 0.0,
            t_std: 1.0,
            iteration: 0,
        }
    }

    pub fn record(&mut self, x: [f64; 7], y: f64) {
        self.xs.push(x);
        self.ys.push(y);
    }

    /// Index and value of the best (smallest) observed loss.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.ys
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, &y)| (i, y))
    }

    /// The incumbent loss in the surrogate's (transformed, standardized)
    /// output space.
    pub fn incumbent_transformed(&self) -> f64 {
        let (_, y) = self.best().expect("nonempty dataset");
        (self.output_transform.forward(y) - self.t_mean) / self.t_std
    }

    /// Refit the output transform and the GP surrogate on the current
    /// dataset (capped subset for large budgets), warm-starting from the
    /// previous hyperparameters.
    pub fn refit(&mut self, rng: &mut ChaCha8Rng) -> Result<(), GpError> {
        let idx = training_subset(&self.ys);
        self.output_transform = OutputTransform::fit(&self.ys);
        let t: Vec<f64> = idx
            .iter()
            .map(|&i| self.output_transform.forward(self.ys[i]))
            .collect();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64;
        self.t_mean = mean;
        self.t_std = var.sqrt().max(1e-12);
        let x = DMatrix::from_fn(idx.len(), 7, |r, c| self.xs[idx[r]][c]);
        let y = DVector::from_fn(idx.len(), |r, _| (t[r] - self.t_mean) / self.t_std);
        let warm = self.model.as_ref().map(|m| m.hypers().clone());
        // A warm-started refit only nudges already-good hyperparameters, so
        // a single short descent suffices; the full multi-start schedule is
        // reserved for the first fit.
        let opts = if warm.is_some() {
            FitOptions {
                starts: 1,
                iterations: 20,
                fit_warp: true,
                learning_rate: 0.05,
            }
        } else {
            FitOptions::for_size(idx.len())
        };
        self.model = Some(GpModel::fit_with(x, y, rng, warm.as_ref(), opts)?);
        Ok(())
    }
}

/// A proposed parameter point in unit coordinates; `from_front` is false
/// for random padding used when the Pareto front is too small.
#[derive(Debug, Clone, Copy)]
pub struct ProposedCandidate {
    pub x: [f64; 7],
    pub from_front: bool,
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 7] {
    let mut x = [0.0; 7];
    for v in &mut x {
        *v = rng.gen_range(0.0..1.0);
    }
    x
}

/// Propose a batch by maximizing (EI, PI, −UCB) with an evolutionary
/// multi-objective search over the warped domain, then sampling the batch
/// from the Pareto front without replacement (random padding if the front
/// is smaller than the batch).
pub fn propose_batch(state: &BoState, rng: &mut ChaCha8Rng) -> Vec<ProposedCandidate> {
    let model = state.model.as_ref().expect("surrogate must be fitted");
    let f_best = state.incumbent_transformed();
    let cfg = &state.config;
    let mc_seed: u64 = rng.gen();
    let front = nsga::nsga2(
        7,
        cfg.population,
        cfg.generations,
        |genomes| {
            acquisition::pointwise_acquisitions_warped(
                model,
                genomes,
                f_best,
                cfg.beta,
                cfg.mc_samples,
                mc_seed,
            )
            .into_iter()
            .map(|a| vec![a.ei, a.pi, -a.ucb])
            .collect()
        },
        rng,
    );

    let mut order: Vec<usize> = (0..front.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut picks: Vec<ProposedCandidate> = order
        .iter()
        .take(cfg.batch)
        .map(|&i| {
            let raw = model.unwarp_point(&front[i].genome);
            let mut x = [0.0; 7];
            for (k, item) in x.iter_mut().enumerate() {
                *item = raw[k].clamp(0.0, 1.0);
            }
            ProposedCandidate { x, from_front: true }
        })
        .collect();
    while picks.len() < cfg.batch {
        picks.push(ProposedCandidate {
            x: random_unit(rng),
            from_front: false,
        });
    }
    picks
}

/// Outcome of an identification run (either flavor).
#[derive(Debug, Clone)]
pub struct IdentifyReport {
    pub theta_best: SimParams,
    pub best_loss: f64,
    /// Best-so-far loss after each iteration (non-increasing).
    pub curve: Vec<f64>,
    /// Every evaluation in order: unit-cube input and raw loss.
    pub evaluations: Vec<([f64; 7], f64)>,
}

fn evaluate_batch(
    candidates: &[[f64; 7]],
    reference: &[Trace],
    table: &TableGeometry,
) -> Vec<f64> {
    candidates
        .par_iter()
        .map(|x| loss(&params_from_unit(x), reference, table))
        .collect()
}

/// Bayesian-optimization identification: random first batch, then
/// fit-propose-evaluate for the remaining iterations.
pub fn identify(
    reference: &[Trace],
    table: &TableGeometry,
    config: &BoConfig,
    seed: u64,
) -> Result<IdentifyReport, GpError> {
    assert!(config.iterations >= 1, "budget must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = BoState::new(config.clone());
    let mut curve = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let candidates: Vec<[f64; 7]> = if state.xs.len() < 2 {
            (0..config.batch).map(|_| random_unit(&mut rng)).collect()
        } else {
            state.refit(&mut rng)?;
            propose_batch(&state, &mut rng)
                .into_iter()
                .map(|c| c.x)
                .collect()
        };
        let losses = evaluate_batch(&candidates, reference, table);
        for (x, y) in candidates.into_iter().zip(losses) {
            state.record(x, y);
        }
        curve.push(state.best().expect("evaluations recorded").1);
        state.iteration += 1;
    }
    let (best_idx, best_loss) = state.best().expect("nonempty run");
    Ok(IdentifyReport {
        theta_best: params_from_unit(&state.xs[best_idx]),
        best_loss,
        curve,
        evaluations: state.xs.into_iter().zip(state.ys).collect(),
    })
}

/// Uniform random search with the same evaluation budget and report shape
/// as [`identify`].
pub fn random_search(
    reference: &[Trace],
    table: &TableGeometry,
    config: &BoConfig,
    seed: u64,
) -> IdentifyReport {
    assert!(config.iterations >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<[f64; 7]> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut curve = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let candidates: Vec<[f64; 7]> =
            (0..config.batch).map(|_| random_unit(&mut rng)).collect();
        let losses = evaluate_batch(&candidates, reference, table);
        xs.extend(candidates);
        ys.extend(losses);
        let best = ys
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        curve.push(best);
    }
    let (best_idx, best_loss) = ys
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, &y)| (i, y))
        .expect("nonempty run");
    IdentifyReport {
        theta_best: params_from_unit(&xs[best_idx]),
        best_loss,
        curve,
        evaluations: xs.into_iter().zip(ys).collect(),
    }
}
