//! Deterministic 2D puck simulator.
//!
//! The puck is a spinning disc on a low-friction table. Between contacts it
//! drifts with linear velocity decay plus a constant-magnitude sliding
//! friction term, and its spin decays separately. Contacts (table rims and
//! kinematic mallet discs) are resolved with an impulse model: the normal
//! component reflects with a restitution coefficient, and a Coulomb-capped
//! tangential impulse couples slip and spin.
//!
//! The tangential impulse opposes the contact slip `u = v_t − R·φ̇` and its
//! magnitude is the smallest of three caps: the Coulomb cap `μ·|j_n|`, the
//! slip-arrest cap `m·|u|/(1 + 2k)`, and the energy cap `m·|u_k|/(1 + 2k²)`
//! where `u_k = v_t − k·R·φ̇`. The last two guarantee that a collision never
//! increases the slip magnitude or the kinetic energy; when `u` and `u_k`
//! disagree in sign no tangential impulse is applied.

use nalgebra::Vector2;
use std::f64::consts::PI;

use crate::table::{Side, TableGeometry};

/// Gravitational acceleration used by the sliding-friction term.
pub const G: f64 = 9.81;
/// Default puck mass in kg. The impulse model's velocity updates are
/// mass-independent (the mass cancels); it only scales energy audits.
pub const PUCK_MASS: f64 = 0.015;

/// Wrap an angle to the interval `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        PI
    } else {
        w
    }
}

/// The seven identifiable simulation parameters, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Restitution of the long-side rims.
    pub e_long: f64,
    /// Restitution of the short-side rims.
    pub e_short: f64,
    /// Coulomb friction coefficient of the rims.
    pub mu_rim: f64,
    /// Coulomb friction coefficient of the table surface.
    pub mu_table: f64,
    /// Spin–slip coupling ratio at contacts.
    pub k_spin: f64,
    /// Linear velocity decay rate (1/s).
    pub d_lin: f64,
    /// Angular velocity decay rate (1/s).
    pub d_ang: f64,
}

/// Inclusive bounds of each parameter, in the canonical field order
/// `(e_long, e_short, mu_rim, mu_table, k_spin, d_lin, d_ang)`.
pub const PARAM_BOUNDS: [(f64, f64); 7] = [
    (0.5, 1.0),
    (0.5, 1.0),
    (0.0, 0.5),
    (0.0, 0.5),
    (0.0, 0.5),
    (0.0, 0.01),
    (0.0, 0.01),
];

pub const PARAM_NAMES: [&str; 7] = [
    "e_long", "e_short", "mu_rim", "mu_table", "k_spin", "d_lin", "d_ang",
];

impl SimParams {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.e_long,
            self.e_short,
            self.mu_rim,
            self.mu_table,
            self.k_spin,
            self.d_lin,
            self.d_ang,
        ]
    }

    pub fn from_array(v: &[f64; 7]) -> SimParams {
        SimParams {
            e_long: v[0],
            e_short: v[1],
            mu_rim: v[2],
            mu_table: v[3],
            k_spin: v[4],
            d_lin: v[5],
            d_ang: v[6],
        }
    }

    /// Clamp every field into its identifiable range.
    pub fn clamped(&self) -> SimParams {
        let mut v = self.to_array();
        for (x, (lo, hi)) in v.iter_mut().zip(PARAM_BOUNDS) {
            *x = x.clamp(lo, hi);
        }
        SimParams::from_array(&v)
    }

    pub fn within_bounds(&self) -> bool {
        self.to_array()
            .iter()
            .zip(PARAM_BOUNDS)
            .all(|(x, (lo, hi))| (lo..=hi).contains(x))
    }
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            e_long: 0.8,
            e_short: 0.8,
            mu_rim: 0.1,
            mu_table: 0.03,
            k_spin: 0.2,
            d_lin: 0.005,
            d_ang: 0.005,
        }
    }
}

/// Puck rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuckState {
    pub r: Vector2<f64>,
    pub rdot: Vector2<f64>,
    /// Orientation, wrapped to `(−π, π]`.
    pub phi: f64,
    pub phidot: f64,
}

impl PuckState {
    pub fn new(r: Vector2<f64>, rdot: Vector2<f64>, phi: f64, phidot: f64) -> PuckState {
        PuckState {
            r,
            rdot,
            phi: wrap_angle(phi),
            phidot,
        }
    }

    pub fn at_rest(r: Vector2<f64>) -> PuckState {
        PuckState::new(r, Vector2::zeros(), 0.0, 0.0)
    }
}

/// A kinematic (infinite-mass) mallet disc.
#[derive(Debug, Clone, Copy)]
pub struct Mallet {
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
}

/// Kinetic energy of the puck disc (translation plus rotation with the
/// uniform-disc inertia `½·m·R²`).
pub fn kinetic_energy(state: &PuckState, mass: f64, radius: f64) -> f64 {
    let inertia = 0.5 * mass * radius * radius;
    0.5 * mass * state.rdot.norm_squared() + 0.5 * inertia * state.phidot * state.phidot
}

/// A rim of the table: long sides run along x at `y = sign·width/2`, short
/// sides run along y at `x = sign·length/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rim {
    Long { positive: bool },
    Short { positive: bool },
}

impl Rim {
    /// Unit normal pointing from the rim into the playing field.
    fn inward_normal(&self) -> Vector2<f64> {
        match *self {
            Rim::Long { positive } => Vector2::new(0.0, if positive { -1.0 } else { 1.0 }),
            Rim::Short { positive } => Vector2::new(if positive { -1.0 } else { 1.0 }, 0.0),
        }
    }

    fn restitution(&self, params: &SimParams) -> f64 {
        match self {
            Rim::Long { .. } => params.e_long,
            Rim::Short { .. } => params.e_short,
        }
    }
}

/// Apply the tangential impulse model shared by rim and mallet contacts.
///
/// `v_t` is the tangential component of the puck velocity relative to the
/// contacting body, `j_n_over_m` the normal impulse magnitude divided by
/// the puck mass. Returns the changes `(Δv_t, Δφ̇)`.
fn tangential_impulse(
    v_t: f64,
    phidot: f64,
    radius: f64,
    j_n_over_m: f64,
    mu: f64,
    k: f64,
) -> (f64, f64) {
    let slip = v_t - radius * phidot;
    let energy_slip = v_t - k * radius * phidot;
    if slip * energy_slip <= 0.0 || slip == 0.0 {
        return (0.0, 0.0);
    }
    let cap_coulomb = mu * j_n_over_m;
    let cap_arrest = slip.abs() / (1.0 + 2.0 * k);
    let cap_energy = energy_slip.abs() / (1.0 + 2.0 * k * k);
    let magnitude = cap_coulomb.min(cap_arrest).min(cap_energy);
    let j_over_m = -slip.signum() * magnitude;
    // Torque from a tangential impulse at the contact point −R·n, with the
    // disc inertia ½·m·R², scaled by the coupling ratio k.
    let dphidot = -2.0 * k * j_over_m / radius;
    (j_over_m, dphidot)
}

/// Resolve a rim contact. The puck must be touching the rim; if the normal
/// velocity is separating the state is returned unchanged.
pub fn resolve_rim_collision(
    state: &PuckState,
    params: &SimParams,
    rim: Rim,
    table: &TableGeometry,
) -> PuckState {
    let n = rim.inward_normal();
    let v_n = state.rdot.dot(&n);
    if v_n >= 0.0 {
        return *state;
    }
    let e = rim.restitution(params);
    let t = Vector2::new(-n.y, n.x);
    let v_t = state.rdot.dot(&t);
    let j_n_over_m = (1.0 + e) * (-v_n);
    let (dv_t, dphidot) = tangential_impulse(
        v_t,
        state.phidot,
        table.puck_radius,
        j_n_over_m,
        params.mu_rim,
        params.k_spin,
    );
    let rdot = (-e * v_n) * n + (v_t + dv_t) * t;
    PuckState {
        r: state.r,
        rdot,
        phi: state.phi,
        phidot: state.phidot + dphidot,
    }
}

/// Resolve a mallet contact. The mallet is kinematic (infinite mass); the
/// collision happens in the mallet's frame and reuses the rim restitution
/// of the long sides. A separating contact leaves the state unchanged.
pub fn resolve_mallet_collision(
    state: &PuckState,
    mallet_pos: &Vector2<f64>,
    mallet_vel: &Vector2<f64>,
    params: &SimParams,
    table: &TableGeometry,
) -> PuckState {
    let d = state.r - mallet_pos;
    let dist = d.norm();
    if dist < 1e-12 {
        return *state;
    }
    let n = d / dist;
    let v_rel = state.rdot - mallet_vel;
    let v_n = v_rel.dot(&n);
    if v_n >= 0.0 {
        return *state;
    }
    let e = params.e_long;
    let t = Vector2::new(-n.y, n.x);
    let v_t = v_rel.dot(&t);
    let j_n_over_m = (1.0 + e) * (-v_n);
    let (dv_t, dphidot) = tangential_impulse(
        v_t,
        state.phidot,
        table.puck_radius,
        j_n_over_m,
        params.mu_rim,
        params.k_spin,
    );
    let v_rel_after = (-e * v_n) * n + (v_t + dv_t) * t;
    PuckState {
        r: state.r,
        rdot: mallet_vel + v_rel_after,
        phi: state.phi,
        phidot: state.phidot + dphidot,
    }
}

#[derive(Debug, Clone, Copy)]
enum Contact {
    Rim(Rim),
    Mallet(usize),
}

/// Deepest violated contact at puck position `p` with mallets advanced to
/// time fraction `tau` of the step.
fn find_contact(
    p: &Vector2<f64>,
    table: &TableGeometry,
    mallets: &[Mallet],
    tau: f64,
    dt: f64,
) -> Option<(Contact, f64)> {
    let mut best: Option<(Contact, f64)> = None;
    let mut push = |c: Contact, depth: f64| {
        if depth > 0.0 && best.map_or(true, |(_, d)| depth > d) {
            best = Some((c, depth));
        }
    };
    let half_w = 0.5 * table.width - table.puck_radius;
    push(Contact::Rim(Rim::Long { positive: true }), p.y - half_w);
    push(Contact::Rim(Rim::Long { positive: false }), -p.y - half_w);
    // Short rims have a pass-through mouth in front of each goal.
    if p.y.abs() > 0.5 * table.goal_width {
        let half_l = 0.5 * table.length - table.puck_radius;
        push(Contact::Rim(Rim::Short { positive: true }), p.x - half_l);
        push(Contact::Rim(Rim::Short { positive: false }), -p.x - half_l);
    }
    let touch = table.puck_radius + table.mallet_radius;
    for (i, m) in mallets.iter().enumerate() {
        let mp = m.pos + tau * dt * m.vel;
        push(Contact::Mallet(i), touch - (p - mp).norm());
    }
    best
}

/// Advance the puck by `dt`. Position integrates the incoming velocity;
/// contacts inside the step are located by time-of-impact bisection and
/// resolved impulsively; drift (velocity decay and table friction) applies
/// once over the step.
pub fn step(
    state: &PuckState,
    params: &SimParams,
    table: &TableGeometry,
    mallets: &[Mallet],
    dt: f64,
) -> PuckState {
    let mut pos = state.r;
    let mut vel = state.rdot;
    let mut phidot = state.phidot;
    let mut tau = 0.0; // consumed fraction of the step
    for _ in 0..16 {
        if tau >= 1.0 {
            break;
        }
        let remaining = 1.0 - tau;
        let target = pos + vel * (remaining * dt);
        if find_contact(&target, table, mallets, 1.0, dt).is_none() {
            pos = target;
            break;
        }
        // Locate the first contact inside [tau, 1] by bisection, unless the
        // puck is already touching at the start of the sub-step.
        let (advance, contact) = match find_contact(&pos, table, mallets, tau, dt) {
            Some((c, _)) => (0.0, c),
            None => {
                let mut lo = 0.0;
                let mut hi = remaining;
                for _ in 0..8 {
                    let mid = 0.5 * (lo + hi);
                    let p_mid = pos + vel * (mid * dt);
                    if find_contact(&p_mid, table, mallets, tau + mid, dt).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let probe = pos + vel * (hi * dt);
                match find_contact(&probe, table, mallets, tau + hi, dt) {
                    Some((c, _)) => (lo, c),
                    None => {
                        pos = target;
                        break;
                    }
                }
            }
        };
        pos += vel * (advance * dt);
        tau += advance;
        let pre = PuckState {
            r: pos,
            rdot: vel,
            phi: state.phi,
            phidot,
        };
        let post = match contact {
            Contact::Rim(rim) => resolve_rim_collision(&pre, params, rim, table),
            Contact::Mallet(i) => {
                let m = &mallets[i];
                let mp = m.pos + tau * dt * m.vel;
                resolve_mallet_collision(&pre, &mp, &m.vel, params, table)
            }
        };
        if (post.rdot - vel).norm() < 1e-15 {
            // Separating or grazing contact: nothing to resolve; finish the
            // step ballistically to avoid re-detecting the same contact.
            pos += vel * ((1.0 - tau) * dt);
            break;
        }
        vel = post.rdot;
        phidot = post.phidot;
    }
    // Drift: per-axis linear decay plus constant-magnitude table friction
    // with a clamp at zero crossing, and separate spin decay.
    let mut new_vel = vel;
    for axis in 0..2 {
        let v = new_vel[axis];
        if v != 0.0 {
            let dv = (params.d_lin * v + params.mu_table * G * v.signum()) * dt;
            new_vel[axis] = if dv.abs() >= v.abs() { 0.0 } else { v - dv };
        }
    }
    let new_phidot = phidot * (1.0 - params.d_ang * dt);
    PuckState {
        r: pos,
        rdot: new_vel,
        phi: wrap_angle(state.phi + state.phidot * dt),
        phidot: new_phidot,
    }
}

/// A simulated rollout with an optional goal event. `goal` names the side
/// whose goal the puck entered; states after the goal are not recorded.
#[derive(Debug, Clone)]
pub struct Trace {
    pub states: Vec<PuckState>,
    pub dt: f64,
    pub goal: Option<Side>,
}

impl Trace {
    /// Serialize as CSV rows `t,x,y,vx,vy,phi,phidot`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,vx,vy,phi,phidot\n");
        for (k, s) in self.states.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                k as f64 * self.dt,
                s.r.x,
                s.r.y,
                s.rdot.x,
                s.rdot.y,
                s.phi,
                s.phidot
            ));
        }
        out
    }
}

/// Roll the puck forward for `duration` seconds with no mallets on the
/// table, recording every step. Stops early when the puck enters a goal.
pub fn simulate_trace(
    initial: &PuckState,
    params: &SimParams,
    table: &TableGeometry,
    dt: f64,
    duration: f64,
) -> Trace {
    let n = (duration / dt).round() as usize;
    let mut states = Vec::with_capacity(n + 1);
    let mut s = *initial;
    states.push(s);
    let mut goal = None;
    for _ in 0..n {
        s = step(&s, params, table, &[], dt);
        states.push(s);
        for side in [Side::Home, Side::Away] {
            if table.in_goal(&s.r, side) {
                goal = Some(side);
            }
        }
        if goal.is_some() {
            break;
        }
    }
    Trace { states, dt, goal }
}
