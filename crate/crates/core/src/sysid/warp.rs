//! Input and output warping for the surrogate model.
//!
//! Inputs in `(0,1)` pass through a two-parameter Kumaraswamy CDF per
//! dimension, `w(x) = 1 − (1 − xᵃ)ᵇ`, whose shape parameters are fitted as
//! kernel hyperparameters. Outputs pass through a one-parameter power
//! transform whose exponent is chosen to minimize the magnitude of the
//! sample skewness (a moment-based Gaussianity proxy).

/// Clamp an input into the open unit interval so the warp and its
/// derivatives stay finite.
pub(crate) fn clamp_unit_open(x: f64) -> f64 {
    x.clamp(1e-9, 1.0 - 1e-9)
}

/// Kumaraswamy CDF `w(x) = 1 − (1 − xᵃ)ᵇ` on [0,1]. Both complements go
/// through `exp_m1` so the value keeps full relative accuracy near the
/// endpoints.
pub fn kumaraswamy(x: f64, a: f64, b: f64) -> f64 {
    let x = clamp_unit_open(x);
    let one_minus_xa = -(a * x.ln()).exp_m1();
    -(b * one_minus_xa.ln()).exp_m1()
}

/// Inverse of [`kumaraswamy`]: `x = (1 − (1 − u)^{1/b})^{1/a}`.
pub fn kumaraswamy_inv(u: f64, a: f64, b: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    if u == 0.0 {
        return 0.0;
    }
    if u == 1.0 {
        return 1.0;
    }
    let inner = -((1.0 - u).ln() / b).exp_m1(); // 1 − (1−u)^{1/b}
    inner.powf(1.0 / a)
}

/// Partial derivatives of the warp with respect to `log a` and `log b`,
/// used by the marginal-likelihood gradient.
pub fn kumaraswamy_dlog(x: f64, a: f64, b: f64) -> (f64, f64) {
    let x = clamp_unit_open(x);
    let xa = (a * x.ln()).exp();
    let base = -(a * x.ln()).exp_m1(); // 1 − xᵃ at full relative accuracy
    // ∂w/∂a = b·(1−xᵃ)^{b−1}·xᵃ·ln x ; ∂w/∂b = −(1−xᵃ)ᵇ·ln(1−xᵃ)
    let dw_da = b * base.powf(b - 1.0) * xa * x.ln();
    let dw_db = -base.powf(b) * base.ln();
    (a * dw_da, b * dw_db)
}

/// Sample skewness `m₃ / m₂^{3/2}` (zero for degenerate samples).
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 3 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 < 1e-300 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// One-parameter power transform of the outputs (a shifted Box–Cox). The
/// exponent is fitted by minimizing |skewness| of the transformed sample;
/// the transform is monotone increasing for every exponent, so argmin of
/// the loss is preserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputTransform {
    pub lambda: f64,
    pub shift: f64,
}

impl Default for OutputTransform {
    fn default() -> Self {
        OutputTransform {
            lambda: 1.0,
            shift: 0.0,
        }
    }
}

impl OutputTransform {
    /// Fit the exponent on a sample by scanning λ ∈ [−2, 2] and refining
    /// the best bracket with a golden-section search on |skewness|.
    pub fn fit(values: &[f64]) -> OutputTransform {
        if values.len() < 3 {
            return OutputTransform::default();
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max - min).is_finite() || max - min < 1e-12 {
            return OutputTransform::default();
        }
        // Shift so the smallest value sits at a small positive fraction of
        // the spread, keeping powers and logs well defined.
        let shift = 1e-3 * (max - min) - min;
        let score = |lambda: f64| {
            let t: Vec<f64> = values
                .iter()
                .map(|&y| OutputTransform { lambda, shift }.forward(y))
                .collect();
            skewness(&t).abs()
        };
        let mut best_l = 1.0;
        let mut best_s = score(1.0);
        let grid = 41;
        for i in 0..grid {
            let l = -2.0 + 4.0 * i as f64 / (grid - 1) as f64;
            let s = score(l);
            if s < best_s {
                best_s = s;
                best_l = l;
            }
        }
        // Golden-section refinement around the grid winner.
        let (mut lo, mut hi) = (best_l - 0.1, best_l + 0.1);
        let phi = 0.5 * (3.0 - 5.0_f64.sqrt());
        for _ in 0..40 {
            let m1 = lo + phi * (hi - lo);
            let m2 = hi - phi * (hi - lo);
            if score(m1) < score(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let refined = 0.5 * (lo + hi);
        if score(refined) < best_s {
            best_l = refined;
        }
        OutputTransform {
            lambda: best_l,
            shift,
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        let z = (y + self.shift).max(1e-300);
        if self.lambda.abs() < 1e-9 {
            z.ln()
        } else {
            (z.powf(self.lambda) - 1.0) / self.lambda
        }
    }

    pub fn inverse(&self, t: f64) -> f64 {
        if self.lambda.abs() < 1e-9 {
            t.exp() - self.shift
        } else {
            let base = (self.lambda * t + 1.0).max(1e-300);
            base.powf(1.0 / self.lambda) - self.shift
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_shape_parameters_give_the_identity_warp() {
        for x in [0.01, 0.2, 0.5, 0.77, 0.99] {
            assert!((kumaraswamy(x, 1.0, 1.0) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn input_warp_round_trips_on_a_thousand_points() {
        // The round trip is limited by the absolute spacing of f64 around
        // u ≈ 1 divided by the warp slope, so extreme shapes with a nearly
        // flat tail cannot beat ~1e-9; over the shape range the fitter
        // actually visits the recovery is far below the tolerance.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(0.01..0.99);
            let a = rng.gen_range(0.3..3.0);
            let b = rng.gen_range(0.3..3.0);
            let u = kumaraswamy(x, a, b);
            let back = kumaraswamy_inv(u, a, b);
            assert!(
                (back - x).abs() < 1e-10,
                "x={x} a={a} b={b} back={back}"
            );
        }
    }

    #[test]
    fn input_warp_is_monotone() {
        let (a, b) = (2.3, 0.6);
        let mut prev = -1.0;
        for i in 0..=200 {
            let u = kumaraswamy(i as f64 / 200.0, a, b);
            assert!(u >= prev);
            prev = u;
        }
    }

    #[test]
    fn warp_derivatives_match_finite_differences() {
        let h: f64 = 1e-6;
        for &(x, a, b) in &[(0.3, 1.7, 0.8), (0.9, 0.5, 2.5), (0.05, 2.0, 2.0)] {
            let (da, db) = kumaraswamy_dlog(x, a, b);
            let fd_a =
                (kumaraswamy(x, a * h.exp(), b) - kumaraswamy(x, a * (-h).exp(), b)) / (2.0 * h);
            let fd_b =
                (kumaraswamy(x, a, b * h.exp()) - kumaraswamy(x, a, b * (-h).exp())) / (2.0 * h);
            assert!((da - fd_a).abs() < 1e-5, "d/dloga {da} vs {fd_a}");
            assert!((db - fd_b).abs() < 1e-5, "d/dlogb {db} vs {fd_b}");
        }
    }

    #[test]
    fn output_transform_round_trips() {
        let values = [0.0, 0.013, 2.5, 17.0, 0.4];
        let t = OutputTransform::fit(&values);
        for &y in &values {
            let back = t.inverse(t.forward(y));
            assert!((back - y).abs() < 1e-10, "y={y} back={back}");
        }
    }

    #[test]
    fn output_transform_reduces_heavy_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw: Vec<f64> = (0..500)
            .map(|_| {
                let u: f64 = rng.gen_range(1e-9_f64..1.0);
                (-u.ln()).powi(3) // heavily right-skewed
            })
            .collect();
        let t = OutputTransform::fit(&raw);
        let transformed: Vec<f64> = raw.iter().map(|&y| t.forward(y)).collect();
        assert!(
            skewness(&transformed).abs() < skewness(&raw).abs(),
            "skew {} -> {}",
            skewness(&raw),
            skewness(&transformed)
        );
    }

    #[test]
    fn output_transform_is_monotone() {
        let values = [0.1, 0.5, 3.0, 9.0];
        let t = OutputTransform::fit(&values);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..100 {
            let y = i as f64 * 0.1;
            let z = t.forward(y);
            assert!(z > prev);
            prev = z;
        }
    }
}
