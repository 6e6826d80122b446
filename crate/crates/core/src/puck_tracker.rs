//! Extended Kalman filter for the puck.
//!
//! State is `(x, y, ẋ, ẏ, φ, φ̇)`. Prediction uses the same drift model as
//! the simulator — linear velocity decay `d` plus a constant-magnitude
//! sliding-friction term `c` — and passes the mean through the rim
//! collision model while leaving the covariance untouched by the collision
//! (collisions are treated as known, deterministic events). Updates measure
//! `(x, y, φ)`, gate innovations at the 90% ellipsoid, and re-initialize
//! the track from the raw measurement when the gate rejects.

use nalgebra::{Matrix3, SMatrix, SVector, Vector2};
use thiserror::Error;

use crate::puck_dynamics::{
    resolve_rim_collision, wrap_angle, PuckState, Rim, SimParams,
};
use crate::table::TableGeometry;

pub type StateVec = SVector<f64, 6>;
pub type StateCov = SMatrix<f64, 6, 6>;

/// 90% chi-square gate for a 3-dimensional innovation.
pub const GATE_90_DF3: f64 = 6.2514;

#[derive(Debug, Error, PartialEq)]
pub enum TrackerError {
    #[error("measurement {index} does not advance time")]
    NonMonotonicTime { index: usize },
    #[error("bad measurement record on line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Noise and drift parameters of the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Linear velocity decay rate (1/s).
    pub damping: f64,
    /// Constant sliding-friction deceleration magnitude (m/s²).
    pub friction: f64,
    /// Process noise levels per step (position, velocity, angle, spin).
    pub q_pos: f64,
    pub q_vel: f64,
    pub q_phi: f64,
    pub q_phidot: f64,
    /// Measurement noise (position in m, angle in rad).
    pub r_pos: f64,
    pub r_phi: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            damping: 0.005,
            friction: 0.03 * crate::puck_dynamics::G,
            // The position process noise must dominate the measurement
            // noise floor: otherwise the modeled innovation covariance
            // matches the true one and the 90% gate throws away its design
            // fraction of perfectly good measurements, resetting the track
            // ~every ten steps. With a slack gate, resets mark genuine
            // track breaks only.
            q_pos: 2e-3,
            // Velocity too changes impulsively at contacts; enough per-step
            // slack keeps the gate from re-rejecting a track that is still
            // converging right after a reset.
            q_vel: 2e-2,
            q_phi: 1e-3,
            // Spin changes impulsively at rim contacts (friction-spin
            // coupling adds several rad/s per bounce), so the per-step spin
            // noise must be large enough that a reset track re-acquires a
            // post-bounce spin through the gate instead of rejecting its
            // own angle innovations forever.
            q_phidot: 2.5,
            r_pos: 1e-3,
            r_phi: 0.01,
        }
    }
}

impl FilterParams {
    fn process_noise(&self) -> StateCov {
        StateCov::from_diagonal(&StateVec::from_column_slice(&[
            self.q_pos * self.q_pos,
            self.q_pos * self.q_pos,
            self.q_vel * self.q_vel,
            self.q_vel * self.q_vel,
            self.q_phi * self.q_phi,
            self.q_phidot * self.q_phidot,
        ]))
    }

    fn measurement_noise(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&nalgebra::Vector3::new(
            self.r_pos * self.r_pos,
            self.r_pos * self.r_pos,
            self.r_phi * self.r_phi,
        ))
    }
}

/// A time-stamped camera measurement of position and orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub r: Vector2<f64>,
    pub phi: f64,
}

/// Filter mean, covariance, and the parameters they evolve under.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub mean: StateVec,
    pub cov: StateCov,
    pub params: FilterParams,
}

impl FilterState {
    /// Initialize from a raw measurement: measured position/orientation,
    /// zero velocities, identity covariance.
    pub fn from_measurement(z: &Measurement, params: FilterParams) -> FilterState {
        let mut mean = StateVec::zeros();
        mean[0] = z.r.x;
        mean[1] = z.r.y;
        mean[4] = wrap_angle(z.phi);
        FilterState {
            mean,
            cov: StateCov::identity(),
            params,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.mean[2], self.mean[3])
    }

    pub fn as_puck_state(&self) -> PuckState {
        PuckState::new(self.position(), self.velocity(), self.mean[4], self.mean[5])
    }
}

fn sign0(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}

/// Drift Jacobian of the transition (Coulomb term treated as constant).
fn drift_jacobian(damping: f64, dt: f64) -> StateCov {
    let mut f = StateCov::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f[(2, 2)] = 1.0 - damping * dt;
    f[(3, 3)] = 1.0 - damping * dt;
    f[(4, 5)] = dt;
    f
}

/// Propagate mean and covariance by `dt`. The mean follows the drift model
/// and is passed through the rim-collision model if the predicted position
/// leaves the rim band; the covariance always follows the collision-free
/// linearization plus process noise.
pub fn predict(
    state: &FilterState,
    dt: f64,
    table: &TableGeometry,
    sim_params: &SimParams,
) -> FilterState {
    let p = &state.params;
    let m = &state.mean;
    let mut mean = StateVec::zeros();
    mean[0] = m[0] + m[2] * dt;
    mean[1] = m[1] + m[3] * dt;
    for axis in 0..2 {
        let v = m[2 + axis];
        let dv = (p.damping * v + p.friction * sign0(v)) * dt;
        mean[2 + axis] = if dv.abs() >= v.abs() { 0.0 } else { v - dv };
    }
    mean[4] = wrap_angle(m[4] + m[5] * dt);
    mean[5] = m[5];

    // Rim handling on the mean only: reflect the overshoot and apply the
    // collision model to the velocity. The covariance is untouched by this.
    let half_w = 0.5 * table.width - table.puck_radius;
    let half_l = 0.5 * table.length - table.puck_radius;
    let mut hits: Vec<Rim> = Vec::new();
    if mean[1].abs() > half_w {
        hits.push(Rim::Long {
            positive: mean[1] > 0.0,
        });
    }
    if mean[0].abs() > half_l && mean[1].abs() > 0.5 * table.goal_width {
        hits.push(Rim::Short {
            positive: mean[0] > 0.0,
        });
    }
    for rim in hits {
        let puck = PuckState::new(
            Vector2::new(mean[0], mean[1]),
            Vector2::new(mean[2], mean[3]),
            mean[4],
            mean[5],
        );
        let out = resolve_rim_collision(&puck, sim_params, rim, table);
        mean[2] = out.rdot.x;
        mean[3] = out.rdot.y;
        mean[5] = out.phidot;
        match rim {
            Rim::Long { positive } => {
                let wall = if positive { half_w } else { -half_w };
                mean[1] = 2.0 * wall - mean[1];
            }
            Rim::Short { positive } => {
                let wall = if positive { half_l } else { -half_l };
                mean[0] = 2.0 * wall - mean[0];
            }
        }
    }

    let f = drift_jacobian(p.damping, dt);
    let cov = f * state.cov * f.transpose() + p.process_noise();
    FilterState {
        mean,
        cov,
        params: *p,
    }
}

/// Measurement update with ellipsoidal gating. Returns the new state and
/// whether the measurement passed the gate; a rejected measurement resets
/// the track from the raw measurement with identity covariance.
pub fn update(state: &FilterState, z: &Measurement) -> (FilterState, bool) {
    let mut h = SMatrix::<f64, 3, 6>::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h[(2, 4)] = 1.0;
    let r = state.params.measurement_noise();
    let nu = nalgebra::Vector3::new(
        z.r.x - state.mean[0],
        z.r.y - state.mean[1],
        wrap_angle(z.phi - state.mean[4]),
    );
    let s = h * state.cov * h.transpose() + r;
    let s_inv = s.try_inverse().expect("innovation covariance invertible");
    let gate = (nu.transpose() * s_inv * nu)[(0, 0)];
    if gate > GATE_90_DF3 {
        return (FilterState::from_measurement(z, state.params), false);
    }
    let k = state.cov * h.transpose() * s_inv;
    let mut mean = state.mean + k * nu;
    mean[4] = wrap_angle(mean[4]);
    // Joseph-form covariance update keeps the result symmetric PSD.
    let ikh = StateCov::identity() - k * h;
    let cov = ikh * state.cov * ikh.transpose() + k * r * k.transpose();
    let cov = 0.5 * (cov + cov.transpose());
    (
        FilterState {
            mean,
            cov,
            params: state.params,
        },
        true,
    )
}

/// Run the filter over a measurement sequence. The first measurement
/// initializes the track; each later one is predicted to and then fused.
/// Emits one state per measurement.
pub fn run_filter(
    measurements: &[Measurement],
    params: FilterParams,
    table: &TableGeometry,
    sim_params: &SimParams,
) -> Result<Vec<FilterState>, TrackerError> {
    let mut out = Vec::with_capacity(measurements.len());
    let Some(first) = measurements.first() else {
        return Ok(out);
    };
    let mut state = FilterState::from_measurement(first, params);
    let mut t_prev = first.t;
    out.push(state.clone());
    for (index, z) in measurements.iter().enumerate().skip(1) {
        let dt = z.t - t_prev;
        if dt <= 0.0 {
            return Err(TrackerError::NonMonotonicTime { index });
        }
        state = predict(&state, dt, table, sim_params);
        let (next, _) = update(&state, z);
        state = next;
        t_prev = z.t;
        out.push(state.clone());
    }
    Ok(out)
}

/// Parse a measurement CSV with header `t,x,y,phi`.
pub fn parse_measurements_csv(text: &str) -> Result<Vec<Measurement>, TrackerError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('t')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(TrackerError::Csv {
                line: i + 1,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|e| TrackerError::Csv {
                line: i + 1,
                msg: format!("{e}"),
            })?;
        }
        out.push(Measurement {
            t: vals[0],
            r: Vector2::new(vals[1], vals[2]),
            phi: vals[3],
        });
    }
    Ok(out)
}

/// Serialize filter states as CSV rows `t,x,y,vx,vy,phi,phidot`.
pub fn states_to_csv(times: &[f64], states: &[FilterState]) -> String {
    let mut out = String::from("t,x,y,vx,vy,phi,phidot\n");
    for (t, s) in times.iter().zip(states) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t, s.mean[0], s.mean[1], s.mean[2], s.mean[3], s.mean[4], s.mean[5]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table() -> TableGeometry {
        TableGeometry::default()
    }

    fn still_state(params: FilterParams) -> FilterState {
        FilterState {
            mean: StateVec::zeros(),
            cov: StateCov::identity(),
            params,
        }
    }

    #[test]
    fn stationary_mean_is_unchanged_by_predict() {
        let s = still_state(FilterParams::default());
        let out = predict(&s, 0.01, &table(), &SimParams::default());
        assert_eq!(out.mean, s.mean);
    }

    #[test]
    fn predict_matches_the_simulator_drift() {
        let params = FilterParams::default();
        let sim = SimParams {
            d_lin: params.damping,
            mu_table: params.friction / crate::puck_dynamics::G,
            d_ang: 0.0,
            ..SimParams::default()
        };
        let mut s = still_state(params);
        s.mean = StateVec::from_column_slice(&[-0.3, 0.1, 1.2, -0.4, 0.5, 3.0]);
        let t = table();
        let out = predict(&s, 0.01, &t, &sim);
        let puck = PuckState::new(
            Vector2::new(-0.3, 0.1),
            Vector2::new(1.2, -0.4),
            0.5,
            3.0,
        );
        let stepped = crate::puck_dynamics::step(&puck, &sim, &t, &[], 0.01);
        assert_relative_eq!(out.mean[0], stepped.r.x, epsilon = 1e-14);
        assert_relative_eq!(out.mean[1], stepped.r.y, epsilon = 1e-14);
        assert_relative_eq!(out.mean[2], stepped.rdot.x, epsilon = 1e-14);
        assert_relative_eq!(out.mean[3], stepped.rdot.y, epsilon = 1e-14);
        assert_relative_eq!(out.mean[4], stepped.phi, epsilon = 1e-14);
        assert_relative_eq!(out.mean[5], stepped.phidot, epsilon = 1e-14);
    }

    #[test]
    fn collision_leaves_covariance_on_the_linear_path() {
        let params = FilterParams::default();
        let t = table();
        let sim = SimParams::default();
        // Heading into the +y rim within one step.
        let mut crossing = still_state(params);
        crossing.mean =
            StateVec::from_column_slice(&[0.0, 0.5 * t.width - t.puck_radius - 1e-4, 0.0, 2.0, 0.0, 0.0]);
        // Safely away from any rim, same covariance.
        let mut free = still_state(params);
        free.mean = StateVec::from_column_slice(&[0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let a = predict(&crossing, 0.01, &t, &sim);
        let b = predict(&free, 0.01, &t, &sim);
        assert_relative_eq!(a.cov, b.cov, epsilon = 1e-15);
        assert!(a.mean[3] < 0.0, "mean velocity should have bounced");
        assert!(a.mean[1] < 0.5 * t.width - t.puck_radius);
    }

    #[test]
    fn exact_measurement_is_accepted_with_zero_gate() {
        let s = still_state(FilterParams::default());
        let z = Measurement {
            t: 0.0,
            r: Vector2::zeros(),
            phi: 0.0,
        };
        let (out, accepted) = update(&s, &z);
        assert!(accepted);
        assert_relative_eq!(out.mean.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn far_outlier_resets_the_track() {
        let params = FilterParams::default();
        let mut s = still_state(params);
        // Tight covariance so 10 cm is far outside the gate.
        s.cov = StateCov::identity() * 1e-6;
        let z = Measurement {
            t: 0.0,
            r: Vector2::new(0.5, 0.0),
            phi: 1.0,
        };
        let (out, accepted) = update(&s, &z);
        assert!(!accepted);
        assert_eq!(out.cov, StateCov::identity());
        assert_relative_eq!(out.mean[0], 0.5);
        assert_relative_eq!(out.mean[4], 1.0);
        assert_eq!(out.mean[2], 0.0);
    }

    #[test]
    fn innovation_wraps_across_the_angle_seam() {
        let params = FilterParams::default();
        let mut s = still_state(params);
        s.mean[4] = std::f64::consts::PI - 0.01;
        let z = Measurement {
            t: 0.0,
            r: Vector2::zeros(),
            phi: -std::f64::consts::PI + 0.01,
        };
        let (out, accepted) = update(&s, &z);
        assert!(accepted, "a 0.02 rad wrapped gap must not trip the gate");
        assert!(out.mean[4].abs() > 3.0, "mean should stay near the seam");
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let params = FilterParams::default();
        let t = table();
        let sim = SimParams::default();
        let mut s = still_state(params);
        for k in 0..200 {
            s = predict(&s, 1.0 / 120.0, &t, &sim);
            let z = Measurement {
                t: k as f64,
                r: Vector2::new(0.001 * (k as f64 % 7.0 - 3.0), 0.0),
                phi: 0.0,
            };
            let (next, _) = update(&s, &z);
            s = next;
            let asym = (s.cov - s.cov.transpose()).norm();
            assert!(asym < 1e-12, "asymmetry {asym}");
            let eig = s.cov.symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "covariance lost definiteness: {eig:?}");
        }
    }

    #[test]
    fn run_filter_requires_increasing_time() {
        let t = table();
        let zs = vec![
            Measurement {
                t: 0.0,
                r: Vector2::zeros(),
                phi: 0.0,
            },
            Measurement {
                t: 0.0,
                r: Vector2::zeros(),
                phi: 0.0,
            },
        ];
        let err = run_filter(&zs, FilterParams::default(), &t, &SimParams::default()).unwrap_err();
        assert_eq!(err, TrackerError::NonMonotonicTime { index: 1 });
    }

    #[test]
    fn empty_measurements_give_empty_history() {
        let t = table();
        let out = run_filter(&[], FilterParams::default(), &t, &SimParams::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn measurement_csv_round_trips() {
        let text = "t,x,y,phi\n0.0,0.1,-0.2,0.5\n0.008333,0.11,-0.19,0.52\n";
        let ms = parse_measurements_csv(text).unwrap();
        assert_eq!(ms.len(), 2);
        assert_relative_eq!(ms[1].r.x, 0.11);
        let bad = parse_measurements_csv("t,x,y,phi\n1,2,3\n");
        assert!(matches!(bad, Err(TrackerError::Csv { line: 2, .. })));
    }
}
