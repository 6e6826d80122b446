//! Simulator oracles: exact restitution on resolved contacts, an energy
//! audit over the impulse model, agreement of the impulsive mallet contact
//! with an independently integrated spring–damper contact, time-step
//! refinement stability, goal-mouth pass-through, and rest clamping.

use airhockey_core::puck_dynamics::{
    kinetic_energy, resolve_mallet_collision, resolve_rim_collision, simulate_trace, step,
    PuckState, Rim, SimParams, G, PUCK_MASS,
};
use airhockey_core::table::{Side, TableGeometry};
use nalgebra::Vector2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lossless() -> SimParams {
    SimParams {
        e_long: 1.0,
        e_short: 1.0,
        mu_rim: 0.0,
        mu_table: 0.0,
        k_spin: 0.0,
        d_lin: 0.0,
        d_ang: 0.0,
    }
}

fn rim_normal(rim: Rim) -> Vector2<f64> {
    match rim {
        Rim::Long { positive } => Vector2::new(0.0, if positive { -1.0 } else { 1.0 }),
        Rim::Short { positive } => Vector2::new(if positive { -1.0 } else { 1.0 }, 0.0),
    }
}

#[test]
fn rim_restitution_is_exact_and_energy_never_increases_on_10k_collisions() {
    let table = TableGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rims = [
        Rim::Long { positive: true },
        Rim::Long { positive: false },
        Rim::Short { positive: true },
        Rim::Short { positive: false },
    ];
    for case in 0..10_000 {
        let rim = rims[case % 4];
        let n = rim_normal(rim);
        let t = Vector2::new(-n.y, n.x);
        let params = SimParams {
            e_long: rng.gen_range(0.5..1.0),
            e_short: rng.gen_range(0.5..1.0),
            mu_rim: rng.gen_range(0.0..0.5),
            k_spin: rng.gen_range(0.0..0.5),
            ..lossless()
        };
        let e = match rim {
            Rim::Long { .. } => params.e_long,
            Rim::Short { .. } => params.e_short,
        };
        let v_n = -rng.gen_range(0.05..4.0); // approaching
        let v_t = rng.gen_range(-3.0..3.0);
        let pre = PuckState::new(
            Vector2::zeros(),
            v_n * n + v_t * t,
            0.0,
            rng.gen_range(-40.0..40.0),
        );
        let post = resolve_rim_collision(&pre, &params, rim, &table);

        // Normal restitution is exact.
        let v_n_post = post.rdot.dot(&n);
        assert!(
            (v_n_post + e * v_n).abs() <= 1e-12 * v_n.abs().max(1.0),
            "case {case}: normal velocity {v_n_post} != {}",
            -e * v_n
        );

        // The impulse model never creates kinetic energy.
        let ke_pre = kinetic_energy(&pre, PUCK_MASS, table.puck_radius);
        let ke_post = kinetic_energy(&post, PUCK_MASS, table.puck_radius);
        assert!(
            ke_post <= ke_pre * (1.0 + 1e-12) + 1e-15,
            "case {case}: energy grew {ke_pre} -> {ke_post}"
        );

        // Without rim friction the tangential state passes through intact.
        let dry = SimParams {
            mu_rim: 0.0,
            ..params
        };
        let post_dry = resolve_rim_collision(&pre, &dry, rim, &table);
        assert_eq!(post_dry.rdot.dot(&t), v_t);
        assert_eq!(post_dry.phidot, pre.phidot);

        // A separating contact is left untouched.
        let leaving = PuckState::new(Vector2::zeros(), -pre.rdot.dot(&n) * n + v_t * t, 0.3, 5.0);
        let post_leaving = resolve_rim_collision(&leaving, &params, rim, &table);
        assert_eq!(post_leaving.rdot, leaving.rdot);
        assert_eq!(post_leaving.phidot, leaving.phidot);
    }
}

/// Integrate a linear spring–damper contact `m·ẍ = -k·x - c·ẋ` from first
/// touch until the penetration returns to zero and report the rebound
/// speed. The damping ratio is chosen so the closed-form restitution of
/// this model equals `e`; the impulsive contact must agree.
fn spring_damper_rebound(v_in: f64, e: f64) -> f64 {
    let m = PUCK_MASS;
    let omega_n = 3000.0; // rad/s, stiff enough for a millisecond contact
    let zeta = -e.ln() / (std::f64::consts::PI.powi(2) + e.ln().powi(2)).sqrt();
    let k = m * omega_n * omega_n;
    let c = 2.0 * zeta * (k * m).sqrt();
    let dt = 1e-7;
    let mut x = 0.0_f64;
    let mut v = -v_in;
    for _ in 0..10_000_000 {
        // Semi-implicit Euler keeps the oscillator stable at this step size.
        let a = (-k * x - c * v) / m;
        v += a * dt;
        let x_next = x + v * dt;
        if x < 0.0 && x_next >= 0.0 {
            return v;
        }
        x = x_next;
    }
    panic!("spring-damper contact never separated");
}

#[test]
fn mallet_impacts_match_a_continuous_spring_damper_contact() {
    let table = TableGeometry::default();
    let touch = table.puck_radius + table.mallet_radius;
    for &e in &[0.6, 0.75, 0.9] {
        for &v_in in &[0.5, 1.5, 3.0] {
            let params = SimParams {
                e_long: e,
                ..lossless()
            };
            // Head-on impact on a stationary mallet at the origin.
            let pre = PuckState::new(Vector2::new(touch, 0.0), Vector2::new(-v_in, 0.0), 0.0, 0.0);
            let post = resolve_mallet_collision(
                &pre,
                &Vector2::zeros(),
                &Vector2::zeros(),
                &params,
                &table,
            );
            let impulsive_ratio = post.rdot.x / v_in;
            let oracle_ratio = spring_damper_rebound(v_in, e) / v_in;
            assert!(
                (impulsive_ratio - oracle_ratio).abs() / oracle_ratio < 0.05,
                "e={e} v={v_in}: impulsive {impulsive_ratio} vs spring-damper {oracle_ratio}"
            );
            // And the impulsive ratio is the coefficient itself.
            assert!((impulsive_ratio - e).abs() < 1e-12);
        }
    }
}

#[test]
fn moving_mallet_impacts_respect_the_relative_frame() {
    let table = TableGeometry::default();
    let touch = table.puck_radius + table.mallet_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..500 {
        let e = rng.gen_range(0.5..1.0);
        let params = SimParams {
            e_long: e,
            ..lossless()
        };
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let n = Vector2::new(angle.cos(), angle.sin());
        let mallet_pos = Vector2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3));
        let mallet_vel = rng.gen_range(-2.0..2.0) * n;
        // Puck touching along n, approaching head-on in the mallet frame.
        let v_rel_n = -rng.gen_range(0.1..3.0);
        let pre = PuckState::new(mallet_pos + touch * n, mallet_vel + v_rel_n * n, 0.0, 0.0);
        let post = resolve_mallet_collision(&pre, &mallet_pos, &mallet_vel, &params, &table);
        // The relative normal velocity reverses scaled by e.
        let rel_post = (post.rdot - mallet_vel).dot(&n);
        assert!(
            (rel_post + e * v_rel_n).abs() < 1e-12 * v_rel_n.abs().max(1.0),
            "relative rebound {rel_post} != {}",
            -e * v_rel_n
        );
    }
}

#[test]
fn trajectories_converge_under_time_step_refinement() {
    let table = TableGeometry::default();
    let params = SimParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tested = 0;
    while tested < 20 {
        let r = Vector2::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.45..0.45));
        let speed = rng.gen_range(0.5..2.5);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let v = speed * Vector2::new(angle.cos(), angle.sin());
        let initial = PuckState::new(r, v, 0.0, rng.gen_range(-20.0..20.0));
        let coarse = simulate_trace(&initial, &params, &table, 0.01, 1.0);
        let fine = simulate_trace(&initial, &params, &table, 0.0025, 1.0);
        if coarse.goal.is_some() || fine.goal.is_some() {
            continue; // goals truncate the trace at different times
        }
        tested += 1;
        let pc = coarse.states.last().unwrap().r;
        let pf = fine.states.last().unwrap().r;
        assert!(
            (pc - pf).norm() < 0.01,
            "dt refinement moved the endpoint by {} (start {r:?}, v {v:?})",
            (pc - pf).norm()
        );
    }
}

#[test]
fn goal_mouth_passes_and_off_mouth_shots_reflect() {
    let table = TableGeometry::default();
    let params = lossless();

    // Straight into the mouth: a goal is scored on the away side.
    let scored = simulate_trace(
        &PuckState::new(Vector2::new(0.5, 0.0), Vector2::new(2.0, 0.0), 0.0, 0.0),
        &params,
        &table,
        0.01,
        2.0,
    );
    assert_eq!(scored.goal, Some(Side::Away));
    let last = scored.states.last().unwrap();
    assert!(last.r.x >= 0.5 * table.length);

    // Same shot outside the mouth: the short rim reflects it, no goal.
    let blocked = simulate_trace(
        &PuckState::new(Vector2::new(0.5, 0.4), Vector2::new(2.0, 0.0), 0.0, 0.0),
        &params,
        &table,
        0.01,
        2.0,
    );
    assert_eq!(blocked.goal, None);
    assert!(blocked.states.iter().any(|s| s.rdot.x < 0.0));
    let half_l = 0.5 * table.length - table.puck_radius;
    for s in &blocked.states {
        assert!(s.r.x <= half_l + 1e-9, "tunneled through the short rim");
    }
}

#[test]
fn fast_corner_shots_never_tunnel() {
    let table = TableGeometry::default();
    let params = lossless();
    let half_l = 0.5 * table.length - table.puck_radius;
    let half_w = 0.5 * table.width - table.puck_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        // Aim a fast puck at a corner neighborhood.
        let cx = half_l * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let cy = half_w * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let from = Vector2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.2..0.2));
        let aim = Vector2::new(cx, cy) - from;
        let v = 4.0 * aim.normalize();
        let dt = 0.01;
        let trace = simulate_trace(&PuckState::new(from, v, 0.0, 0.0), &params, &table, dt, 1.5);
        // A puck sliding past a goal post may sit beyond the rim line for
        // one step while its y crosses the mouth boundary; allow one step
        // of travel there. Everywhere else the rim line is strict.
        let post_margin = v.norm() * dt;
        for s in &trace.states {
            assert!(s.r.y.abs() <= half_w + 1e-9, "tunneled through a long rim");
            let near_mouth = s.r.y.abs() <= 0.5 * table.goal_width + post_margin;
            assert!(
                s.r.x.abs() <= half_l + 1e-9 || near_mouth,
                "tunneled through a short rim at {:?}",
                s.r
            );
        }
        if trace.goal.is_some() {
            continue;
        }
    }
}

#[test]
fn table_friction_clamps_the_puck_to_rest() {
    let table = TableGeometry::default();
    let params = SimParams::default();
    // Sliding slowly: constant-magnitude friction must reach exactly zero.
    let mut s = PuckState::new(Vector2::new(0.1, -0.05), Vector2::new(0.05, 0.02), 0.0, 0.0);
    let dt = 0.01;
    let mut rest_at = None;
    for k in 0..300 {
        s = step(&s, &params, &table, &[], dt);
        if s.rdot == Vector2::zeros() {
            rest_at = Some(k);
            break;
        }
    }
    let stopped = rest_at.expect("puck never came to rest");
    // Expected stop time ~ v / (mu*G) = 0.05 / 0.294 ≈ 0.17 s.
    assert!(stopped < 40, "rest took {stopped} steps");
    let resting = s.r;
    for _ in 0..50 {
        s = step(&s, &params, &table, &[], dt);
        assert_eq!(s.rdot, Vector2::zeros());
        assert_eq!(s.r, resting);
    }
    // Sanity: the deceleration scale comes from mu*G.
    assert!(params.mu_table * G > 0.1);
}

#[test]
fn integration_order_is_position_first_then_drift() {
    let table = TableGeometry::default();
    let params = SimParams {
        d_ang: 0.01,
        ..lossless()
    };
    // Free flight: position integrates the incoming velocity, spin decays
    // geometrically by (1 - d_ang·dt) each step.
    let v = Vector2::new(0.3, -0.2);
    let mut s = PuckState::new(Vector2::new(-0.2, 0.1), v, 0.1, 12.0);
    let dt = 0.01;
    let r0 = s.r;
    let n = 50;
    for _ in 0..n {
        s = step(&s, &params, &table, &[], dt);
    }
    assert!((s.r - (r0 + v * (n as f64 * dt))).norm() < 1e-12);
    assert!((s.phidot - 12.0 * (1.0 - params.d_ang * dt).powi(n as i32)).abs() < 1e-12);
}
