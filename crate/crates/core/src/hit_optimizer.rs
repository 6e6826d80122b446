//! Joint-space realization of Cartesian hit plans.
//!
//! The building blocks are:
//!
//! * [`qp_step`] / [`aqp_step`] — one tracking step: the task-space motion
//!   fixes the particular joint velocity `b = J⁺((x̄ − x)/ΔT + v̄)` and a
//!   box-constrained QP picks the null-space coordinates, either minimizing
//!   the weighted joint speed (QP) or the weighted distance to an anchor
//!   pull `ż = z·(qᵃ − q)/c` (AQP; at `z = 0` the two coincide exactly).
//! * [`optimize_hit_config`] — picks the hitting configuration maximizing
//!   the velocity transmission `‖vᵀJ(q)‖` along the hit direction, subject
//!   to the tool sitting on the hit point.
//! * [`max_velocity_ls`] / [`max_velocity_lp`] — the largest hit speed the
//!   joint velocity box admits along the hit direction, by limit scaling of
//!   the pseudoinverse solution or by a null-space linear program.
//! * [`plan_hit_trajectory`] — the full pipeline with speed-scaling
//!   retries.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Unit, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kinematics::{
    null_space_2x7, null_space_basis, pseudoinverse, JointVec, KinematicChain, KinematicsError,
};
use crate::path_planner::{plan_hit_path, plan_straight_move, tightened_boundary, HitPlan, PlanError};
use crate::solver::{solve_box_qp, SolverError};
use crate::table::TableGeometry;

#[derive(Debug, Error, PartialEq)]
pub enum HitError {
    #[error("hit point is outside the arm's reach")]
    Unreachable,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Pipeline flavor: plain QP tracking at a fixed commanded speed, or the
/// hitting-configuration optimization with anchored tracking, fed by either
/// the limit-scaled or the linear-program maximum velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitMode {
    Qp,
    NlAqp,
    LpNlAqp,
}

impl HitMode {
    pub const ALL: [HitMode; 3] = [HitMode::Qp, HitMode::NlAqp, HitMode::LpNlAqp];

    pub fn name(self) -> &'static str {
        match self {
            HitMode::Qp => "qp",
            HitMode::NlAqp => "nl-aqp",
            HitMode::LpNlAqp => "lp-nl-aqp",
        }
    }
}

/// Weights and scales of the tracking QP.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Diagonal of the positive weight matrix W (shoulder and elbow joints
    /// weighted higher so the wrist does the fast corrections).
    pub weights: JointVec,
    /// Tracking step ΔT (s).
    pub dt: f64,
    /// Anchor time scale c (s).
    pub anchor_scale: f64,
    /// Anchor configuration qᵃ.
    pub anchor: JointVec,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            weights: JointVec::from_row_slice(&[10.0, 10.0, 5.0, 5.0, 1.0, 1.0, 1.0]),
            dt: 0.01,
            anchor_scale: 0.2,
            anchor: JointVec::zeros(),
        }
    }
}

/// Pipeline configuration: tracker, initial speeds, and retry policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tracker: TrackerConfig,
    /// Commanded hit speed in plain-QP mode (m/s).
    pub qp_hit_speed: f64,
    /// Speed multiplier applied on each retry.
    pub retry_scale: f64,
    /// Maximum number of attempts before declaring the hit infeasible.
    pub max_trials: usize,
    /// Safety margin added to the mallet radius for the plan boundary (m).
    pub margin_extra: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tracker: TrackerConfig::default(),
            qp_hit_speed: 2.0,
            retry_scale: 0.9,
            max_trials: 10,
            margin_extra: 0.005,
        }
    }
}

/// Output of one tracking step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Null-space coordinates chosen by the QP.
    pub alpha: SVector<f64, 4>,
    pub q_next: JointVec,
    pub qd_next: JointVec,
}

fn dvec7(v: &JointVec) -> DVector<f64> {
    DVector::from_iterator(7, v.iter().copied())
}

/// Joint velocity box for one step: the velocity limits intersected with
/// the bounds that keep the Euler-integrated position inside its limits.
fn step_bounds(chain: &KinematicChain, q: &JointVec, dt: f64) -> (DVector<f64>, DVector<f64>) {
    let mut lo = DVector::<f64>::zeros(7);
    let mut hi = DVector::<f64>::zeros(7);
    for i in 0..7 {
        lo[i] = (-chain.qd_max()[i]).max((chain.q_min()[i] - q[i]) / dt);
        hi[i] = chain.qd_max()[i].min((chain.q_max()[i] - q[i]) / dt);
    }
    (lo, hi)
}

fn tracking_step(
    chain: &KinematicChain,
    q: &JointVec,
    x_des: &Vector3<f64>,
    v_des: &Vector3<f64>,
    target_qd: &JointVec,
    cfg: &TrackerConfig,
) -> Result<StepResult, HitError> {
    let j = chain.position_jacobian(q);
    let j_pinv = pseudoinverse(&j)?;
    let x = chain.tool_position(q);
    let b = j_pinv * ((x_des - x) / cfg.dt + v_des);
    let e = null_space_basis(&j)?;

    let e_dyn = DMatrix::from_fn(7, 4, |i, k| e[(i, k)]);
    let (lo, hi) = step_bounds(chain, q, cfg.dt);
    let sol = solve_box_qp(
        &e_dyn,
        &dvec7(&b),
        &dvec7(target_qd),
        &dvec7(&cfg.weights),
        &lo,
        &hi,
    )?;
    let qd_next = JointVec::from_fn(|i, _| sol.x[i]);
    let q_next = q + qd_next * cfg.dt;
    Ok(StepResult {
        alpha: SVector::<f64, 4>::from_fn(|i, _| sol.alpha[i]),
        q_next,
        qd_next,
    })
}

/// One tracking step minimizing the weighted joint velocity.
pub fn qp_step(
    chain: &KinematicChain,
    q: &JointVec,
    x_des: &Vector3<f64>,
    v_des: &Vector3<f64>,
    cfg: &TrackerConfig,
) -> Result<StepResult, HitError> {
    tracking_step(chain, q, x_des, v_des, &JointVec::zeros(), cfg)
}

/// One anchored tracking step: minimizes the weighted distance to the
/// anchor pull `z·(qᵃ − q)/c`. At `z = 0` this is [`qp_step`] exactly (the
/// same arithmetic path with a zero target).
pub fn aqp_step(
    chain: &KinematicChain,
    q: &JointVec,
    x_des: &Vector3<f64>,
    v_des: &Vector3<f64>,
    z: f64,
    cfg: &TrackerConfig,
) -> Result<StepResult, HitError> {
    let target = z * (cfg.anchor - q) / cfg.anchor_scale;
    tracking_step(chain, q, x_des, v_des, &target, cfg)
}

/// Velocity transmission along `v`: `‖vᵀ·J(q)‖₂`.
pub fn hit_objective(chain: &KinematicChain, q: &JointVec, v: &Vector3<f64>) -> f64 {
    (chain.position_jacobian(q).transpose() * v).norm()
}

fn objective_gradient(chain: &KinematicChain, q: &JointVec, v: &Vector3<f64>) -> JointVec {
    let h = 1e-6;
    JointVec::from_fn(|i, _| {
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += h;
        qm[i] -= h;
        (hit_objective(chain, &qp, v) - hit_objective(chain, &qm, v)) / (2.0 * h)
    })
}

/// Damped least-squares inverse position kinematics, box-projected.
fn dls_ik(chain: &KinematicChain, p: &Vector3<f64>, q0: &JointVec) -> Option<JointVec> {
    let mut q = chain.clamp_to_limits(q0);
    for _ in 0..300 {
        let err = p - chain.tool_position(&q);
        if err.norm() < 1e-10 {
            return Some(q);
        }
        let j = chain.position_jacobian(&q);
        let jjt = j * j.transpose() + Matrix3::identity() * 1e-6;
        let y = jjt.lu().solve(&err)?;
        let mut dq = j.transpose() * y;
        let n = dq.norm();
        if n > 0.5 {
            dq *= 0.5 / n;
        }
        q = chain.clamp_to_limits(&(q + dq));
    }
    None
}

const IK_SEEDS: usize = 8;
const CONSTRAINT_TOL: f64 = 1e-6;

/// Find the joint configuration on the hit point that maximizes the
/// velocity transmission along the (unit) hit direction `v`, within joint
/// limits. Seeds several inverse-kinematics solutions around `q_init` and
/// refines the best with an augmented-Lagrangian ascent on the constrained
/// objective.
pub fn optimize_hit_config(
    chain: &KinematicChain,
    p: &Vector3<f64>,
    v: &Vector3<f64>,
    q_init: &JointVec,
) -> Result<JointVec, HitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut seeds = Vec::with_capacity(IK_SEEDS);
    for k in 0..IK_SEEDS {
        let q0 = if k == 0 {
            *q_init
        } else {
            JointVec::from_fn(|i, _| q_init[i] + rng.gen_range(-0.7..0.7))
        };
        if let Some(q) = dls_ik(chain, p, &q0) {
            seeds.push(q);
        }
    }
    if seeds.is_empty() {
        return Err(HitError::Unreachable);
    }

    let mut best: Option<(JointVec, f64)> = None;
    for seed in &seeds {
        let candidate = refine_hit_config(chain, p, v, seed);
        let polished = dls_ik(chain, p, &candidate).unwrap_or(*seed);
        let obj = hit_objective(chain, &polished, v);
        // Never return anything worse than the plain IK seed.
        let (fallback, fallback_obj) = (*seed, hit_objective(chain, seed, v));
        let (q_cand, obj_cand) = if obj >= fallback_obj {
            (polished, obj)
        } else {
            (fallback, fallback_obj)
        };
        if best.as_ref().map_or(true, |(_, b)| obj_cand > *b) {
            best = Some((q_cand, obj_cand));
        }
    }
    let (q_star, _) = best.expect("at least one seed");
    if (chain.tool_position(&q_star) - p).norm() > CONSTRAINT_TOL {
        return Err(HitError::Unreachable);
    }
    Ok(q_star)
}

/// Augmented-Lagrangian ascent of the transmission objective under the
/// position equality, with projected adaptive-step inner descent.
fn refine_hit_config(
    chain: &KinematicChain,
    p: &Vector3<f64>,
    v: &Vector3<f64>,
    q0: &JointVec,
) -> JointVec {
    let mut q = *q0;
    let mut lambda = Vector3::<f64>::zeros();
    let mut mu = 1e4;
    let mut c_prev = f64::INFINITY;
    for _outer in 0..12 {
        let al_value = |q: &JointVec, lambda: &Vector3<f64>, mu: f64| -> f64 {
            let c = chain.tool_position(q) - p;
            -hit_objective(chain, q, v) + lambda.dot(&c) + 0.5 * mu * c.norm_squared()
        };
        let mut f_cur = al_value(&q, &lambda, mu);
        let mut step = 1e-3;
        for _inner in 0..120 {
            let c = chain.tool_position(&q) - p;
            let grad =
                -objective_gradient(chain, &q, v) + chain.position_jacobian(&q).transpose() * (lambda + mu * c);
            let q_try = chain.clamp_to_limits(&(q - step * grad));
            let f_try = al_value(&q_try, &lambda, mu);
            if f_try < f_cur - 1e-14 {
                q = q_try;
                f_cur = f_try;
                step = (step * 1.7).min(0.2);
            } else {
                step *= 0.5;
                if step < 1e-11 {
                    break;
                }
            }
        }
        let c = chain.tool_position(&q) - p;
        let cn = c.norm();
        if cn < 1e-9 {
            break;
        }
        lambda += mu * c;
        if cn > 0.25 * c_prev {
            mu = (mu * 4.0).min(1e10);
        }
        c_prev = cn;
    }
    q
}

/// Largest speed along `v` obtained by scaling the pseudoinverse solution
/// until the first joint-velocity limit saturates. Returns the speed and
/// the saturating joint velocity.
pub fn max_velocity_ls(
    chain: &KinematicChain,
    q: &JointVec,
    v: &Vector3<f64>,
) -> Result<(f64, JointVec), HitError> {
    let j = chain.position_jacobian(q);
    let qd_unit = pseudoinverse(&j)? * v;
    let mut eta = f64::INFINITY;
    for i in 0..7 {
        if qd_unit[i].abs() > 1e-12 {
            eta = eta.min(chain.qd_max()[i] / qd_unit[i].abs());
        }
    }
    if !eta.is_finite() {
        return Err(HitError::Kinematics(KinematicsError::SingularConfiguration(0.0)));
    }
    Ok((eta, eta * qd_unit))
}

/// Two unit vectors completing `v` to an orthonormal frame.
fn orthonormal_completion(v: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let pick = if v.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let w1 = (pick - v * pick.dot(v)).normalize();
    let w2 = v.cross(&w1);
    (w1, w2)
}

/// Largest speed along `v` over all joint velocities whose Cartesian image
/// is exactly parallel to `v`, by a linear program on the null space of the
/// two transverse task rows. Dominates [`max_velocity_ls`], whose solution
/// is one feasible point of this program.
pub fn max_velocity_lp(
    chain: &KinematicChain,
    q: &JointVec,
    v: &Vector3<f64>,
) -> Result<(f64, JointVec), HitError> {
    let j = chain.position_jacobian(q);
    // Reject singular configurations up front, matching the LS path.
    let _ = pseudoinverse(&j)?;
    let (w1, w2) = orthonormal_completion(v);
    let mut a_perp = SMatrix::<f64, 2, 7>::zeros();
    a_perp.row_mut(0).copy_from(&(w1.transpose() * j));
    a_perp.row_mut(1).copy_from(&(w2.transpose() * j));
    let e = null_space_2x7(&a_perp)?; // 7×5, orthonormal

    let mut a = DMatrix::<f64>::zeros(14, 5);
    let mut d = DVector::<f64>::zeros(14);
    for i in 0..7 {
        for k in 0..5 {
            a[(i, k)] = e[(i, k)];
            a[(7 + i, k)] = -e[(i, k)];
        }
        d[i] = chain.qd_max()[i];
        d[7 + i] = chain.qd_max()[i];
    }
    let c_vec = e.transpose() * (j.transpose() * v);
    let c_dyn = DVector::from_iterator(5, c_vec.iter().copied());
    let (alpha, speed) = crate::solver::vertex_lp(&a, &d, &c_dyn)?;
    let qd = e * SVector::<f64, 5>::from_fn(|i, _| alpha[i]);
    debug_assert!(
        (w1.transpose() * j * qd)[(0, 0)].abs() < 1e-9
            && (w2.transpose() * j * qd)[(0, 0)].abs() < 1e-9,
        "LP velocity must have no transverse component"
    );
    Ok((speed, qd))
}

/// One sample of a joint trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: JointVec,
    pub qd: JointVec,
}

/// A tracked joint trajectory. `samples` is empty when `feasible` is
/// false; `hit_index` points at the sample that carries the hit velocity.
#[derive(Debug, Clone)]
pub struct JointTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub feasible: bool,
    pub achieved_hit_speed: f64,
    pub hit_index: usize,
    /// Attempts consumed (1 = first try succeeded).
    pub trials: usize,
}

impl JointTrajectory {
    fn infeasible(trials: usize) -> JointTrajectory {
        JointTrajectory {
            samples: Vec::new(),
            feasible: false,
            achieved_hit_speed: 0.0,
            hit_index: 0,
            trials,
        }
    }

    /// Serialize as CSV rows `t,q1..q7,qd1..qd7`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,q1,q2,q3,q4,q5,q6,q7,qd1,qd2,qd3,qd4,qd5,qd6,qd7\n",
        );
        for s in &self.samples {
            out.push_str(&format!("{}", s.t));
            for i in 0..7 {
                out.push_str(&format!(",{}", s.q[i]));
            }
            for i in 0..7 {
                out.push_str(&format!(",{}", s.qd[i]));
            }
            out.push('\n');
        }
        out
    }
}

fn lift(p: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(p.x, p.y, 0.0)
}

/// Track a Cartesian plan with the QP/AQP stepper. At the hit sample the
/// correction term is dropped and the exact hit velocity is fed forward, so
/// the commanded Cartesian velocity there is `v_hit·dir` to machine
/// precision.
fn track_plan(
    chain: &KinematicChain,
    start_q: &JointVec,
    plan: &HitPlan,
    cfg: &TrackerConfig,
    anchored: bool,
) -> Result<(Vec<TrajectorySample>, usize), HitError> {
    let dt = cfg.dt;
    let total = plan.total_time();
    let t_hit = plan.hit_time();
    let n = (total / dt).ceil() as usize;
    let hit_index = ((t_hit / dt).round() as usize).clamp(1, n);
    let hit_v = lift(&(plan.hit_speed * plan.hit_dir.into_inner()));

    let mut samples = Vec::with_capacity(n + 1);
    samples.push(TrajectorySample {
        t: 0.0,
        q: *start_q,
        qd: JointVec::zeros(),
    });
    let mut q = *start_q;
    for k in 1..=n {
        let t_k = (k as f64 * dt).min(total);
        let step = if k == hit_index {
            let x_here = chain.tool_position(&q);
            if anchored {
                aqp_step(chain, &q, &x_here, &hit_v, 0.0, cfg)?
            } else {
                qp_step(chain, &q, &x_here, &hit_v, cfg)?
            }
        } else {
            let t_prev = ((k - 1) as f64 * dt).min(total);
            let (x_prev, _) = plan.state_at(t_prev)?;
            let (_, v_k) = plan.state_at(t_k)?;
            let x_des = lift(&x_prev);
            let v_des = lift(&v_k);
            if anchored {
                let z = if t_k <= t_hit {
                    if t_hit > 0.0 {
                        (t_hit - t_k) / t_hit
                    } else {
                        0.0
                    }
                } else if total > t_hit {
                    (t_k - t_hit) / (total - t_hit)
                } else {
                    0.0
                };
                aqp_step(chain, &q, &x_des, &v_des, z, cfg)?
            } else {
                qp_step(chain, &q, &x_des, &v_des, cfg)?
            }
        };
        q = step.q_next;
        samples.push(TrajectorySample {
            t: k as f64 * dt,
            q,
            qd: step.qd_next,
        });
    }
    Ok((samples, hit_index))
}

/// Plan and track a full hit: contact point behind the puck along the hit
/// direction, Cartesian plan inside the tightened boundary, QP/AQP joint
/// tracking, and speed-scaling retries. Exhausting the retries is reported
/// through the `feasible` flag, not an error.
pub fn plan_hit_trajectory(
    chain: &KinematicChain,
    start_q: &JointVec,
    puck: &Vector2<f64>,
    hit_dir: &Unit<Vector2<f64>>,
    stop: &Vector2<f64>,
    table: &TableGeometry,
    cfg: &PipelineConfig,
    mode: HitMode,
) -> JointTrajectory {
    let Ok(bounds) = tightened_boundary(table, table.mallet_radius + cfg.margin_extra) else {
        return JointTrajectory::infeasible(0);
    };
    let contact_gap = table.puck_radius + table.mallet_radius;
    let hit_point = puck - contact_gap * hit_dir.into_inner();
    let start_xy = {
        let p = chain.tool_position(start_q);
        Vector2::new(p.x, p.y)
    };
    let dir3 = lift(&hit_dir.into_inner());

    // Geometry and speed ceiling are computed once; retries only rescale.
    let mut tracker = cfg.tracker.clone();
    let v0 = match mode {
        HitMode::Qp => cfg.qp_hit_speed,
        HitMode::NlAqp | HitMode::LpNlAqp => {
            let Ok(q_star) = optimize_hit_config(chain, &lift(&hit_point), &dir3, start_q) else {
                return JointTrajectory::infeasible(0);
            };
            tracker.anchor = q_star;
            let speed = match mode {
                HitMode::NlAqp => max_velocity_ls(chain, &q_star, &dir3),
                _ => max_velocity_lp(chain, &q_star, &dir3),
            };
            match speed {
                Ok((s, _)) => s,
                Err(_) => return JointTrajectory::infeasible(0),
            }
        }
    };
    if !(v0 > 0.0) {
        return JointTrajectory::infeasible(0);
    }

    let anchored = mode != HitMode::Qp;
    for trial in 0..cfg.max_trials {
        let v = v0 * cfg.retry_scale.powi(trial as i32);
        let plan = match plan_hit_path(&start_xy, &hit_point, hit_dir, stop, &bounds, v) {
            Ok(p) => p,
            Err(_) => return JointTrajectory::infeasible(trial + 1),
        };
        match track_plan(chain, start_q, &plan, &tracker, anchored) {
            Ok((samples, hit_index)) => {
                return JointTrajectory {
                    samples,
                    feasible: true,
                    achieved_hit_speed: v,
                    hit_index,
                    trials: trial + 1,
                };
            }
            Err(_) => continue,
        }
    }
    JointTrajectory::infeasible(cfg.max_trials)
}

/// Plan and track a point-to-point mallet move: a straight Cartesian path
/// that accelerates to `v_peak` at the midpoint and decelerates to rest,
/// tracked by the plain QP stepper. Used for repositioning motions (homing,
/// defensive placement) that hit nothing.
pub fn plan_move_trajectory(
    chain: &KinematicChain,
    start_q: &JointVec,
    target: &Vector2<f64>,
    v_peak: f64,
    tracker: &TrackerConfig,
) -> Result<JointTrajectory, HitError> {
    let start_xy = {
        let p = chain.tool_position(start_q);
        Vector2::new(p.x, p.y)
    };
    let plan = plan_straight_move(&start_xy, target, v_peak)?;
    let (samples, hit_index) = track_plan(chain, start_q, &plan, tracker, false)?;
    Ok(JointTrajectory {
        samples,
        feasible: true,
        achieved_hit_speed: 0.0,
        hit_index,
        trials: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_chain;
    use approx::assert_relative_eq;

    fn home_q() -> JointVec {
        crate::config::Scenario::default().home_q
    }

    #[test]
    fn qp_alpha_vanishes_when_b_is_feasible_and_weights_are_unit() {
        let chain = default_chain();
        let q = home_q();
        let cfg = TrackerConfig {
            weights: JointVec::from_element(1.0),
            ..TrackerConfig::default()
        };
        let x = chain.tool_position(&q);
        let v = Vector3::new(0.05, 0.02, 0.0);
        let step = qp_step(&chain, &q, &x, &v, &cfg).unwrap();
        // b lies in the row space of J, orthogonal to the null basis, so
        // with W = I the optimal null-space coordinates are zero.
        assert!(step.alpha.norm() < 1e-9, "alpha = {}", step.alpha);
    }

    #[test]
    fn aqp_at_zero_phase_equals_qp_exactly() {
        let chain = default_chain();
        let q = home_q();
        let cfg = TrackerConfig {
            anchor: JointVec::from_element(0.3),
            ..TrackerConfig::default()
        };
        let x = chain.tool_position(&q) + Vector3::new(0.01, -0.02, 0.0);
        let v = Vector3::new(0.4, 0.1, 0.0);
        let a = qp_step(&chain, &q, &x, &v, &cfg).unwrap();
        let b = aqp_step(&chain, &q, &x, &v, 0.0, &cfg).unwrap();
        assert_eq!(a.qd_next, b.qd_next);
        assert_eq!(a.q_next, b.q_next);
    }

    #[test]
    fn anchored_step_pulls_toward_the_anchor() {
        let chain = default_chain();
        let q = home_q();
        let mut anchor = q;
        anchor[2] += 0.5; // joint 3 redundancy
        let cfg = TrackerConfig {
            anchor,
            ..TrackerConfig::default()
        };
        let x = chain.tool_position(&q);
        let v = Vector3::zeros();
        let plain = qp_step(&chain, &q, &x, &v, &cfg).unwrap();
        let pulled = aqp_step(&chain, &q, &x, &v, 1.0, &cfg).unwrap();
        let d_plain = (plain.q_next - anchor).norm();
        let d_pulled = (pulled.q_next - anchor).norm();
        assert!(
            d_pulled < d_plain,
            "anchored step should close on the anchor ({d_pulled} vs {d_plain})"
        );
    }

    #[test]
    fn ls_saturates_at_least_one_joint_and_tracks_direction() {
        let chain = default_chain();
        let q = home_q();
        let v = Vector3::new(1.0, 0.0, 0.0);
        let (eta, qd) = max_velocity_ls(&chain, &q, &v).unwrap();
        assert!(eta > 0.0);
        let mut saturated = 0;
        for i in 0..7 {
            assert!(qd[i].abs() <= chain.qd_max()[i] + 1e-9);
            if (qd[i].abs() - chain.qd_max()[i]).abs() < 1e-9 {
                saturated += 1;
            }
        }
        assert!(saturated >= 1, "no joint at its velocity limit");
        let cart = chain.position_jacobian(&q) * qd;
        assert_relative_eq!(cart, eta * v, epsilon = 1e-9);
    }

    #[test]
    fn lp_speed_dominates_ls_speed() {
        let chain = default_chain();
        let q = home_q();
        for dir in [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.8, 0.6, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ] {
            let (ls, _) = max_velocity_ls(&chain, &q, &dir).unwrap();
            let (lp, qd) = max_velocity_lp(&chain, &q, &dir).unwrap();
            assert!(
                lp >= ls - 1e-9,
                "LP {lp} must dominate LS {ls} along {dir:?}"
            );
            for i in 0..7 {
                assert!(qd[i].abs() <= chain.qd_max()[i] + 1e-9);
            }
            let cart = chain.position_jacobian(&q) * qd;
            let transverse = (cart - dir * cart.dot(&dir)).norm();
            assert!(transverse < 1e-9, "transverse leak {transverse}");
        }
    }

    #[test]
    fn hit_config_beats_its_seed_and_holds_the_point() {
        let chain = default_chain();
        let q0 = home_q();
        let p = Vector3::new(-0.6, 0.1, 0.0);
        let v = Vector3::new(1.0, 0.0, 0.0);
        let seed = dls_ik(&chain, &p, &q0).expect("point must be reachable");
        let q_star = optimize_hit_config(&chain, &p, &v, &q0).unwrap();
        assert!(
            hit_objective(&chain, &q_star, &v) >= hit_objective(&chain, &seed, &v) - 1e-9
        );
        assert!((chain.tool_position(&q_star) - p).norm() < 1e-6);
        assert!(chain.within_position_limits(&q_star, 1e-12));
    }

    #[test]
    fn hit_objective_is_direction_sign_invariant() {
        let chain = default_chain();
        let q = home_q();
        let v = Vector3::new(0.6, -0.8, 0.0);
        assert_relative_eq!(
            hit_objective(&chain, &q, &v),
            hit_objective(&chain, &q, &(-v)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn unreachable_point_is_reported() {
        let chain = default_chain();
        let err = optimize_hit_config(
            &chain,
            &Vector3::new(5.0, 0.0, 0.0),
            &Vector3::new(1.0, 0.0, 0.0),
            &home_q(),
        )
        .unwrap_err();
        assert_eq!(err, HitError::Unreachable);
    }

    #[test]
    fn qp_mode_hits_with_the_commanded_velocity() {
        let chain = default_chain();
        let table = TableGeometry::default();
        let cfg = PipelineConfig::default();
        let q0 = home_q();
        let puck = Vector2::new(-0.55, 0.1);
        let dir = Unit::new_normalize(Vector2::new(1.0, -0.05));
        let start_xy = {
            let p = chain.tool_position(&q0);
            Vector2::new(p.x, p.y)
        };
        let traj =
            plan_hit_trajectory(&chain, &q0, &puck, &dir, &start_xy, &table, &cfg, HitMode::Qp);
        assert!(traj.feasible, "plain QP hit should succeed near mid-table");
        assert!(traj.achieved_hit_speed > 0.0);
        // Commanded Cartesian velocity at the hit sample.
        let hit = &traj.samples[traj.hit_index];
        let before = &traj.samples[traj.hit_index - 1];
        let j = chain.position_jacobian(&before.q);
        let cart = j * hit.qd;
        let want = traj.achieved_hit_speed * Vector3::new(dir.x, dir.y, 0.0);
        assert_relative_eq!(cart, want, epsilon = 1e-6);
        // Euler contract and limits on every sample.
        for w in traj.samples.windows(2) {
            let expected = w[0].q + w[1].qd * cfg.tracker.dt;
            assert_eq!(expected, w[1].q);
        }
        for s in &traj.samples {
            assert!(chain.within_position_limits(&s.q, 1e-9));
            assert!(chain.within_velocity_limits(&s.qd, 1e-9));
        }
    }
}
