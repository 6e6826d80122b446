//! Monte Carlo batch acquisitions over the GP posterior, in minimization
//! orientation: improvement means a posterior draw falling below the best
//! observed value.
//!
//! Draws are laid out candidate-major with a fixed per-call seed, and the
//! joint sampler uses the Cholesky factor of the posterior covariance, so
//! appending a candidate to a batch leaves the draws of the existing
//! candidates bit-identical — the expected-improvement and
//! probability-of-improvement estimates are then exactly monotone in the
//! batch.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gp::GpModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionValues {
    /// Expected improvement E[maxⱼ ReLU(f⁺ − fⱼ)].
    pub ei: f64,
    /// Probability of improvement E[maxⱼ 1{f⁺ − fⱼ > 0}].
    pub pi: f64,
    /// Mean/absolute-deviation confidence bound
    /// E[maxⱼ (μⱼ + √(βπ/2)·|fⱼ − μⱼ|)].
    pub ucb: f64,
}

/// Candidate-major standard-normal draws: a `q × s` matrix whose rows are
/// filled one candidate at a time, so a longer batch extends, rather than
/// reshuffles, the draws of a shorter one.
fn candidate_major_normals(q: usize, s: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DMatrix::zeros(q, s);
    for j in 0..q {
        for k in 0..s {
            z[(j, k)] = StandardNormal.sample(&mut rng);
        }
    }
    z
}

/// Cholesky factor of the posterior covariance with escalating jitter; a
/// hopelessly degenerate covariance falls back to its (clamped) diagonal.
fn covariance_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let q = cov.nrows();
    let mut jitter = 0.0;
    loop {
        let mut c = cov.clone();
        for i in 0..q {
            c[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(c) {
            return chol.unpack();
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
        if jitter > 1e-4 {
            return DMatrix::from_fn(q, q, |i, j| {
                if i == j {
                    cov[(i, i)].max(0.0).sqrt()
                } else {
                    0.0
                }
            });
        }
    }
}

fn reduce_draws(
    mu: &DVector<f64>,
    draws: &DMatrix<f64>, // q × s joint posterior samples
    f_best: f64,
    beta: f64,
) -> AcquisitionValues {
    let (q, s) = draws.shape();
    let dev_scale = (beta * std::f64::consts::PI / 2.0).sqrt();
    let (mut ei, mut pi, mut ucb) = (0.0, 0.0, 0.0);
    for k in 0..s {
        let mut best_gain = 0.0_f64;
        let mut any_improved = 0.0;
        let mut best_bound = f64::NEG_INFINITY;
        for j in 0..q {
            let f = draws[(j, k)];
            let gain = f_best - f;
            if gain > best_gain {
                best_gain = gain;
            }
            if gain > 0.0 {
                any_improved = 1.0;
            }
            let bound = mu[j] + dev_scale * (f - mu[j]).abs();
            if bound > best_bound {
                best_bound = bound;
            }
        }
        ei += best_gain;
        pi += any_improved;
        ucb += best_bound;
    }
    let n = s as f64;
    AcquisitionValues {
        ei: ei / n,
        pi: pi / n,
        ucb: ucb / n,
    }
}

/// Joint Monte Carlo acquisition values for a whole candidate batch (rows
/// of `candidates`, raw coordinates in the unit cube).
pub fn batch_acquisitions(
    model: &GpModel,
    candidates: &DMatrix<f64>,
    f_best: f64,
    beta: f64,
    mc_samples: usize,
    seed: u64,
) -> AcquisitionValues {
    let (mu, cov) = model.posterior(candidates);
    let l = covariance_factor(&cov);
    let z = candidate_major_normals(candidates.nrows(), mc_samples, seed);
    let draws = {
        let mut d = &l * z;
        for k in 0..mc_samples {
            for j in 0..candidates.nrows() {
                d[(j, k)] += mu[j];
            }
        }
        d
    };
    reduce_draws(&mu, &draws, f_best, beta)
}

/// Single-candidate acquisition values for many points at once (rows of
/// `points_warped`, already in the model's warped input space). All points
/// share one set of draws, which keeps comparisons between them free of
/// Monte Carlo noise.
pub fn pointwise_acquisitions_warped(
    model: &GpModel,
    points_warped: &DMatrix<f64>,
    f_best: f64,
    beta: f64,
    mc_samples: usize,
    seed: u64,
) -> Vec<AcquisitionValues> {
    let (mu, var) = model.posterior_diag_warped(points_warped);
    let z = candidate_major_normals(1, mc_samples, seed);
    let dev_scale = (beta * std::f64::consts::PI / 2.0).sqrt();
    let mean_abs_z = z.row(0).iter().map(|v| v.abs()).sum::<f64>() / mc_samples as f64;
    (0..points_warped.nrows())
        .map(|i| {
            let sigma = var[i].sqrt();
            let (mut ei, mut pi) = (0.0, 0.0);
            for k in 0..mc_samples {
                let f = mu[i] + sigma * z[(0, k)];
                let gain = f_best - f;
                if gain > 0.0 {
                    ei += gain;
                    pi += 1.0;
                }
            }
            AcquisitionValues {
                ei: ei / mc_samples as f64,
                pi: pi / mc_samples as f64,
                ucb: mu[i] + dev_scale * sigma * mean_abs_z,
            }
        })
        .collect()
}
