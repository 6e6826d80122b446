//! Gaussian-process surrogate: Matérn-5/2 kernel with per-dimension
//! lengthscales, Kumaraswamy input warping fitted jointly with the kernel
//! hyperparameters, and marginal-likelihood fitting by multi-start Adam
//! with analytic gradients in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::warp::{clamp_unit_open, kumaraswamy, kumaraswamy_dlog};

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("kernel matrix is not positive definite at any jitter up to 1e-4")]
    IllConditioned,
    #[error("fitting needs at least two points, got {0}")]
    TooFewPoints(usize),
}

const SQRT5: f64 = 2.236_067_977_499_79;

/// Kernel, noise, and input-warp parameters, all in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHypers {
    pub log_lengthscales: DVector<f64>,
    pub log_signal_variance: f64,
    pub log_noise_variance: f64,
    pub log_warp_a: DVector<f64>,
    pub log_warp_b: DVector<f64>,
}

impl GpHypers {
    /// Reasonable defaults for inputs in the unit cube.
    pub fn default_for(dim: usize, y_variance: f64) -> GpHypers {
        let sf2 = y_variance.max(1e-4);
        GpHypers {
            log_lengthscales: DVector::from_element(dim, 0.3_f64.ln()),
            log_signal_variance: sf2.ln(),
            log_noise_variance: (1e-3 * sf2).ln(),
            log_warp_a: DVector::zeros(dim),
            log_warp_b: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    fn to_vec(&self) -> Vec<f64> {
        let d = self.dim();
        let mut v = Vec::with_capacity(3 * d + 2);
        v.extend(self.log_lengthscales.iter());
        v.push(self.log_signal_variance);
        v.push(self.log_noise_variance);
        v.extend(self.log_warp_a.iter());
        v.extend(self.log_warp_b.iter());
        v
    }

    fn from_vec(dim: usize, v: &[f64]) -> GpHypers {
        GpHypers {
            log_lengthscales: DVector::from_row_slice(&v[..dim]),
            log_signal_variance: v[dim],
            log_noise_variance: v[dim + 1],
            log_warp_a: DVector::from_row_slice(&v[dim + 2..2 * dim + 2]),
            log_warp_b: DVector::from_row_slice(&v[2 * dim + 2..3 * dim + 2]),
        }
    }

    fn clamp(v: &mut [f64], dim: usize) {
        for x in v[..dim].iter_mut() {
            *x = x.clamp((1e-2_f64).ln(), (1e2_f64).ln());
        }
        v[dim] = v[dim].clamp((1e-8_f64).ln(), (1e8_f64).ln());
        v[dim + 1] = v[dim + 1].clamp((1e-12_f64).ln(), (1e4_f64).ln());
        for x in v[dim + 2..3 * dim + 2].iter_mut() {
            *x = x.clamp((0.1_f64).ln(), (10.0_f64).ln());
        }
    }
}

/// Effort knobs for the hyperparameter fit; the defaults taper with the
/// dataset size so repeated refits inside an optimization loop stay cheap.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub starts: usize,
    pub iterations: usize,
    pub fit_warp: bool,
    pub learning_rate: f64,
}

impl FitOptions {
    pub fn for_size(n: usize) -> FitOptions {
        let (starts, iterations) = match n {
            0..=9 => (4, 200),
            10..=59 => (3, 150),
            60..=149 => (2, 100),
            150..=399 => (2, 60),
            400..=699 => (1, 30),
            _ => (1, 15),
        };
        FitOptions {
            starts,
            iterations,
            fit_warp: true,
            learning_rate: 0.05,
        }
    }
}

/// A fitted Gaussian process on inputs in the unit cube.
#[derive(Debug, Clone)]
pub struct GpModel {
    x: DMatrix<f64>,
    u: DMatrix<f64>,
    y: DVector<f64>,
    hypers: GpHypers,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    nll: f64,
}

fn warp_inputs(x: &DMatrix<f64>, hypers: &GpHypers) -> DMatrix<f64> {
    let (n, d) = x.shape();
    DMatrix::from_fn(n, d, |i, j| {
        kumaraswamy(
            x[(i, j)],
            hypers.log_warp_a[j].exp(),
            hypers.log_warp_b[j].exp(),
        )
    })
}

fn scaled_sq_dist(u: &DMatrix<f64>, v: &DMatrix<f64>, ls: &DVector<f64>) -> DMatrix<f64> {
    let (n, d) = u.shape();
    let m = v.nrows();
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut r2 = 0.0;
            for k in 0..d {
                let dx = (u[(i, k)] - v[(j, k)]) / ls[k];
                r2 += dx * dx;
            }
            out[(i, j)] = r2;
        }
    }
    out
}

/// Matérn-5/2 value from the scaled squared distance.
fn matern(r2: f64, sf2: f64) -> f64 {
    let s = SQRT5 * r2.max(0.0).sqrt();
    sf2 * (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn cross_kernel(
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    hypers: &GpHypers,
) -> DMatrix<f64> {
    let ls = hypers.log_lengthscales.map(f64::exp);
    let sf2 = hypers.log_signal_variance.exp();
    scaled_sq_dist(u, v, &ls).map(|r2| matern(r2, sf2))
}

/// Cholesky of K + (σ² + jitter)·I with escalating jitter.
fn factorize(
    u: &DMatrix<f64>,
    hypers: &GpHypers,
) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>, f64), GpError> {
    let n = u.nrows();
    let k = cross_kernel(u, u, hypers);
    let sn2 = hypers.log_noise_variance.exp();
    let mut jitter = 0.0;
    loop {
        let mut kt = k.clone();
        for i in 0..n {
            kt[(i, i)] += sn2 + jitter;
        }
        if let Some(c) = Cholesky::new(kt) {
            return Ok((c, k, jitter));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > 1e-4 {
            return Err(GpError::IllConditioned);
        }
    }
}

fn nll_value(chol: &Cholesky<f64, Dyn>, alpha: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let log_det_half: f64 = (0..y.len()).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    0.5 * y.dot(alpha) + log_det_half + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Negative log marginal likelihood and its gradient with respect to the
/// packed log-space hyperparameter vector.
fn nll_and_grad(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    hypers: &GpHypers,
    fit_warp: bool,
) -> Result<(f64, Vec<f64>), GpError> {
    let (n, d) = x.shape();
    let u = warp_inputs(x, hypers);
    let (chol, k, _jitter) = factorize(&u, hypers)?;
    let alpha = chol.solve(y);
    let value = nll_value(&chol, &alpha, y);

    // M = K̃⁻¹ − ααᵀ ;  ∂NLL/∂h = ½ Σᵢⱼ Mᵢⱼ ∂K̃ᵢⱼ/∂h
    let mut m = chol.inverse();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] -= alpha[i] * alpha[j];
        }
    }

    let ls = hypers.log_lengthscales.map(f64::exp);
    let sf2 = hypers.log_signal_variance.exp();
    let sn2 = hypers.log_noise_variance.exp();

    // Per-point warp derivatives w.r.t. log a and log b.
    let mut pa = DMatrix::zeros(n, d);
    let mut pb = DMatrix::zeros(n, d);
    if fit_warp {
        for i in 0..n {
            for j in 0..d {
                let (da, db) = kumaraswamy_dlog(
                    x[(i, j)],
                    hypers.log_warp_a[j].exp(),
                    hypers.log_warp_b[j].exp(),
                );
                pa[(i, j)] = da;
                pb[(i, j)] = db;
            }
        }
    }

    let mut grad = vec![0.0; 3 * d + 2];
    for i in 0..n {
        for j in i..n {
            let weight = if i == j { 0.5 } else { 1.0 }; // symmetric pair counted once
            let mij = m[(i, j)];
            if mij == 0.0 {
                continue;
            }
            let mut r2 = 0.0;
            for kdim in 0..d {
                let dx = (u[(i, kdim)] - u[(j, kdim)]) / ls[kdim];
                r2 += dx * dx;
            }
            let s = SQRT5 * r2.sqrt();
            let e = (-s).exp();
            // dk/d(r²), finite at r → 0.
            let dk_dr2 = -(5.0 / 6.0) * sf2 * (1.0 + s) * e;
            let c = weight * mij;
            for kdim in 0..d {
                let du = u[(i, kdim)] - u[(j, kdim)];
                let d2 = (du / ls[kdim]) * (du / ls[kdim]);
                // ∂K/∂log ℓ = dk/dr² · (−2 Δ²/ℓ²)
                grad[kdim] += c * dk_dr2 * (-2.0 * d2);
                if fit_warp {
                    let dr2_du = 2.0 * du / (ls[kdim] * ls[kdim]);
                    grad[d + 2 + kdim] +=
                        c * dk_dr2 * dr2_du * (pa[(i, kdim)] - pa[(j, kdim)]);
                    grad[2 * d + 2 + kdim] +=
                        c * dk_dr2 * dr2_du * (pb[(i, kdim)] - pb[(j, kdim)]);
                }
            }
            grad[d] += c * k[(i, j)]; // ∂K/∂log σ_f² = K (noise-free part)
            if i == j {
                grad[d + 1] += c * sn2;
            }
        }
    }
    // Unique pairs with half-weight diagonals reproduce ½ Σ_{i,j} M·∂K̃.
    Ok((value, grad))
}

impl GpModel {
    /// Build a model at fixed hyperparameters (escalating jitter).
    pub fn with_hyperparameters(
        x: DMatrix<f64>,
        y: DVector<f64>,
        hypers: GpHypers,
    ) -> Result<GpModel, GpError> {
        assert_eq!(x.nrows(), y.len(), "inputs and outputs must align");
        assert_eq!(x.ncols(), hypers.dim(), "hyperparameter dimension");
        let u = warp_inputs(&x, &hypers);
        let (chol, _k, jitter) = factorize(&u, &hypers)?;
        let alpha = chol.solve(&y);
        let nll = nll_value(&chol, &alpha, &y);
        Ok(GpModel {
            x,
            u,
            y,
            hypers,
            chol,
            alpha,
            jitter,
            nll,
        })
    }

    /// Fit hyperparameters by multi-start Adam on the negative log
    /// marginal likelihood. The returned model's likelihood is at least as
    /// good as at every start.
    pub fn fit(
        x: DMatrix<f64>,
        y: DVector<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<GpModel, GpError> {
        let opts = FitOptions::for_size(x.nrows());
        GpModel::fit_with(x, y, rng, None, opts)
    }

    pub fn fit_with(
        x: DMatrix<f64>,
        y: DVector<f64>,
        rng: &mut ChaCha8Rng,
        warm: Option<&GpHypers>,
        opts: FitOptions,
    ) -> Result<GpModel, GpError> {
        let n = x.nrows();
        let d = x.ncols();
        if n < 2 {
            return Err(GpError::TooFewPoints(n));
        }
        let y_mean = y.mean();
        let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;

        let mut starts: Vec<GpHypers> = vec![GpHypers::default_for(d, y_var)];
        if let Some(w) = warm {
            if w.dim() == d {
                starts.push(w.clone());
            }
        }
        while starts.len() < opts.starts.max(1) {
            let base = GpHypers::default_for(d, y_var);
            let mut v = base.to_vec();
            for (idx, item) in v.iter_mut().enumerate() {
                if idx < d {
                    *item += rng.gen_range(-1.5..1.5);
                } else if idx == d {
                    *item += rng.gen_range(-1.0..1.0);
                } else if idx == d + 1 {
                    *item += rng.gen_range(-3.0..3.0);
                } else if opts.fit_warp {
                    *item += rng.gen_range(-0.7..0.7);
                }
            }
            GpHypers::clamp(&mut v, d);
            starts.push(GpHypers::from_vec(d, &v));
        }

        let mut best: Option<(f64, GpHypers)> = None;
        let consider = |nll: f64, h: &GpHypers, best: &mut Option<(f64, GpHypers)>| {
            if nll.is_finite() && best.as_ref().map_or(true, |(b, _)| nll < *b) {
                *best = Some((nll, h.clone()));
            }
        };

        for start in &starts {
            let mut p = start.to_vec();
            GpHypers::clamp(&mut p, d);
            let mut m1 = vec![0.0; p.len()];
            let mut m2 = vec![0.0; p.len()];
            for iter in 0..opts.iterations {
                let h = GpHypers::from_vec(d, &p);
                let (value, grad) = match nll_and_grad(&x, &y, &h, opts.fit_warp) {
                    Ok(v) => v,
                    Err(_) => break,
                };
                consider(value, &h, &mut best);
                let t = (iter + 1) as f64;
                for idx in 0..p.len() {
                    let g = if !opts.fit_warp && idx >= d + 2 {
                        0.0
                    } else {
                        grad[idx]
                    };
                    m1[idx] = 0.9 * m1[idx] + 0.1 * g;
                    m2[idx] = 0.999 * m2[idx] + 0.001 * g * g;
                    let mhat = m1[idx] / (1.0 - 0.9_f64.powf(t));
                    let vhat = m2[idx] / (1.0 - 0.999_f64.powf(t));
                    p[idx] -= opts.learning_rate * mhat / (vhat.sqrt() + 1e-8);
                }
                GpHypers::clamp(&mut p, d);
            }
            // Score the final iterate of the run as well.
            let h = GpHypers::from_vec(d, &p);
            if let Ok((chol, _, _)) = {
                let u = warp_inputs(&x, &h);
                factorize(&u, &h)
            } {
                let alpha = chol.solve(&y);
                consider(nll_value(&chol, &alpha, &y), &h, &mut best);
            }
        }

        let (_, hypers) = best.ok_or(GpError::IllConditioned)?;
        GpModel::with_hyperparameters(x, y, hypers)
    }

    pub fn nll(&self) -> f64 {
        self.nll
    }

    pub fn hypers(&self) -> &GpHypers {
        &self.hypers
    }

    pub fn lengthscales(&self) -> DVector<f64> {
        self.hypers.log_lengthscales.map(f64::exp)
    }

    pub fn signal_variance(&self) -> f64 {
        self.hypers.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.hypers.log_noise_variance.exp()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn training_len(&self) -> usize {
        self.x.nrows()
    }

    pub fn training_outputs(&self) -> &DVector<f64> {
        &self.y
    }

    /// Warp a raw point (each coordinate in [0,1]) into the model's input
    /// space.
    pub fn warp_point(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |j, _| {
            kumaraswamy(
                clamp_unit_open(x[j]),
                self.hypers.log_warp_a[j].exp(),
                self.hypers.log_warp_b[j].exp(),
            )
        })
    }

    /// Invert the input warp.
    pub fn unwarp_point(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |j, _| {
            super::warp::kumaraswamy_inv(
                u[j],
                self.hypers.log_warp_a[j].exp(),
                self.hypers.log_warp_b[j].exp(),
            )
        })
    }

    /// Posterior mean and covariance at raw query points (rows of `q`).
    pub fn posterior(&self, q: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let uq = warp_inputs(q, &self.hypers);
        self.posterior_warped(&uq)
    }

    /// Posterior mean and covariance at already-warped query points.
    pub fn posterior_warped(&self, uq: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let k_star = cross_kernel(&self.u, uq, &self.hypers); // n×m
        let mean = k_star.transpose() * &self.alpha;
        let w = self.chol.solve(&k_star); // K̃⁻¹ K*
        let k_qq = cross_kernel(uq, uq, &self.hypers);
        let mut cov = k_qq - k_star.transpose() * w;
        // Symmetrize to wash out round-off asymmetry.
        let covt = cov.transpose();
        cov = (cov + covt) * 0.5;
        (mean, cov)
    }

    /// Posterior mean and (clamped) marginal variance at already-warped
    /// query points — the cheap path for large candidate sets.
    pub fn posterior_diag_warped(&self, uq: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        let k_star = cross_kernel(&self.u, uq, &self.hypers);
        let mean = k_star.transpose() * &self.alpha;
        let w = self.chol.solve(&k_star);
        let sf2 = self.signal_variance();
        let var = DVector::from_fn(uq.nrows(), |j, _| {
            let mut reduction = 0.0;
            for i in 0..self.x.nrows() {
                reduction += k_star[(i, j)] * w[(i, j)];
            }
            (sf2 - reduction).max(0.0)
        });
        (mean, var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn identity_warp_hypers(dim: usize, ls: f64, sf2: f64, sn2: f64) -> GpHypers {
        GpHypers {
            log_lengthscales: DVector::from_element(dim, ls.ln()),
            log_signal_variance: sf2.ln(),
            log_noise_variance: sn2.ln(),
            log_warp_a: DVector::zeros(dim),
            log_warp_b: DVector::zeros(dim),
        }
    }

    #[test]
    fn noiseless_model_interpolates_training_points() {
        let x = DMatrix::from_row_slice(4, 1, &[0.1, 0.35, 0.6, 0.9]);
        let y = DVector::from_row_slice(&[1.0, -0.5, 0.25, 2.0]);
        let model =
            GpModel::with_hyperparameters(x.clone(), y.clone(), identity_warp_hypers(1, 0.3, 1.0, 1e-10))
                .unwrap();
        let (mean, _) = model.posterior(&x);
        for i in 0..4 {
            assert!(
                (mean[i] - y[i]).abs() < 1e-8,
                "interpolation miss at {i}: {} vs {}",
                mean[i],
                y[i]
            );
        }
    }

    #[test]
    fn variance_reverts_to_the_prior_far_from_data() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.01, 0.02]);
        let y = DVector::from_row_slice(&[0.3, 0.1, -0.2]);
        let sf2 = 2.5;
        let model = GpModel::with_hyperparameters(x, y, identity_warp_hypers(1, 0.05, sf2, 1e-8))
            .unwrap();
        let q = DMatrix::from_row_slice(1, 1, &[0.9]); // 17+ lengthscales away
        let (_, cov) = model.posterior(&q);
        assert!(
            (cov[(0, 0)] - sf2).abs() < 0.01 * sf2,
            "far-field variance {} vs prior {}",
            cov[(0, 0)],
            sf2
        );
    }

    #[test]
    fn contradictory_duplicates_force_positive_noise() {
        let x = DMatrix::from_row_slice(4, 1, &[0.5, 0.5, 0.2, 0.8]);
        let y = DVector::from_row_slice(&[1.0, -1.0, 0.0, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = GpModel::fit(x, y, &mut rng).unwrap();
        assert!(
            model.noise_variance() > 1e-6,
            "noise {} should absorb the contradiction",
            model.noise_variance()
        );
    }

    #[test]
    fn two_point_posterior_stays_within_three_sigma() {
        let x = DMatrix::from_row_slice(2, 1, &[0.25, 0.75]);
        let y = DVector::from_row_slice(&[0.6, -0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = GpModel::fit(x.clone(), y.clone(), &mut rng).unwrap();
        let (mean, cov) = model.posterior(&x);
        for i in 0..2 {
            let sigma = (cov[(i, i)].max(0.0) + model.noise_variance()).sqrt();
            assert!(
                (mean[i] - y[i]).abs() <= 3.0 * sigma + 1e-9,
                "point {i}: mean {} target {} sigma {}",
                mean[i],
                y[i],
                sigma
            );
        }
    }

    #[test]
    fn likelihood_gradient_matches_finite_differences() {
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[0.1, 0.2, 0.3, 0.9, 0.55, 0.4, 0.7, 0.75, 0.95, 0.1, 0.4, 0.6],
        );
        let y = DVector::from_row_slice(&[0.3, -0.2, 0.8, -0.5, 0.1, 0.9]);
        let hypers = GpHypers {
            log_lengthscales: DVector::from_row_slice(&[(0.4_f64).ln(), (0.7_f64).ln()]),
            log_signal_variance: (1.3_f64).ln(),
            log_noise_variance: (0.05_f64).ln(),
            log_warp_a: DVector::from_row_slice(&[(1.4_f64).ln(), (0.8_f64).ln()]),
            log_warp_b: DVector::from_row_slice(&[(0.6_f64).ln(), (1.9_f64).ln()]),
        };
        let (_, grad) = nll_and_grad(&x, &y, &hypers, true).unwrap();
        let p0 = hypers.to_vec();
        let h = 1e-5;
        for idx in 0..p0.len() {
            let mut pp = p0.clone();
            let mut pm = p0.clone();
            pp[idx] += h;
            pm[idx] -= h;
            let (fp, _) = nll_and_grad(&x, &y, &GpHypers::from_vec(2, &pp), true).unwrap();
            let (fm, _) = nll_and_grad(&x, &y, &GpHypers::from_vec(2, &pm), true).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let scale = fd.abs().max(grad[idx].abs()).max(1e-6);
            assert!(
                (grad[idx] - fd).abs() / scale < 1e-4,
                "component {idx}: analytic {} fd {}",
                grad[idx],
                fd
            );
        }
    }

    #[test]
    fn fitting_beats_the_default_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 25;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(0.0_f64..1.0));
        let y = DVector::from_fn(n, |i, _| {
            (6.0 * x[(i, 0)]).sin() + 0.5 * (3.0 * x[(i, 1)]).cos()
        });
        let y_mean = y.mean();
        let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let start = GpModel::with_hyperparameters(
            x.clone(),
            y.clone(),
            GpHypers::default_for(2, y_var),
        )
        .unwrap();
        let fitted = GpModel::fit(x, y, &mut rng).unwrap();
        assert!(
            fitted.nll() <= start.nll() + 1e-9,
            "fit {} vs start {}",
            fitted.nll(),
            start.nll()
        );
    }

    #[test]
    fn posterior_covariance_is_symmetric_and_nearly_psd() {
        let x = DMatrix::from_row_slice(3, 1, &[0.2, 0.5, 0.8]);
        let y = DVector::from_row_slice(&[1.0, 0.0, -1.0]);
        let model =
            GpModel::with_hyperparameters(x, y, identity_warp_hypers(1, 0.25, 1.0, 1e-6)).unwrap();
        let q = DMatrix::from_row_slice(4, 1, &[0.1, 0.4, 0.6, 0.95]);
        let (_, cov) = model.posterior(&q);
        assert_eq!(cov, cov.transpose());
        let eigs = cov.symmetric_eigenvalues();
        assert!(
            eigs.iter().all(|&e| e >= -1e-10),
            "min eigenvalue {}",
            eigs.min()
        );
    }

    #[test]
    fn diagonal_posterior_matches_the_full_covariance() {
        let x = DMatrix::from_row_slice(5, 2, &[0.1, 0.9, 0.3, 0.2, 0.6, 0.5, 0.8, 0.85, 0.45, 0.7]);
        let y = DVector::from_row_slice(&[0.2, -0.4, 0.9, 0.05, -0.6]);
        let hypers = GpHypers {
            log_lengthscales: DVector::from_element(2, (0.35_f64).ln()),
            log_signal_variance: 0.0,
            log_noise_variance: (1e-4_f64).ln(),
            log_warp_a: DVector::from_element(2, (1.3_f64).ln()),
            log_warp_b: DVector::from_element(2, (0.7_f64).ln()),
        };
        let model = GpModel::with_hyperparameters(x, y, hypers).unwrap();
        let q_raw = DMatrix::from_row_slice(3, 2, &[0.15, 0.35, 0.5, 0.5, 0.9, 0.1]);
        let uq = warp_inputs(&q_raw, model.hypers());
        let (mean_full, cov) = model.posterior(&q_raw);
        let (mean_diag, var) = model.posterior_diag_warped(&uq);
        for j in 0..3 {
            assert!((mean_full[j] - mean_diag[j]).abs() < 1e-12);
            assert!((cov[(j, j)] - var[j]).abs() < 1e-10);
        }
    }
}
