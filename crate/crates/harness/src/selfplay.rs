//! Self-play: two tactic agents against each other in simulation.
//!
//! Each agent runs the full stack in its own frame — noisy measurements
//! through the tracker, guard events into the tactic state machine, and
//! hit/move planning into joint trajectories whose forward kinematics
//! drive a kinematic mallet. The away agent's frame is the world rotated
//! by half a turn about the table center, so one set of home-side guards
//! and planners serves both. A referee watches the ground-truth puck,
//! counts goals, and re-serves; a shot clock re-serves dead positions.

use std::f64::consts::PI;

use airhockey_core::config::Scenario;
use airhockey_core::hit_optimizer::{
    plan_hit_trajectory, plan_move_trajectory, HitMode, PipelineConfig, TrajectorySample,
};
use airhockey_core::kinematics::JointVec;
use airhockey_core::path_planner::{compute_hit_direction, tightened_boundary, HitKind};
use airhockey_core::puck_dynamics::{step, wrap_angle, Mallet, PuckState};
use airhockey_core::puck_tracker::{predict, update, FilterState, Measurement};
use airhockey_core::table::{Rect, Side};
use airhockey_core::tactics::{advance, cut_target, derive_events, predict_crossing, Tactic};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::report::{fmt, Csv};
use crate::HarnessError;

/// Agent-frame x of the defensive (cut) station.
const DEFENSE_X: f64 = -0.93;
/// Agent-frame x of the repel interception line.
const REPEL_X: f64 = -0.88;
/// Agent-frame region where hits are attempted; pucks outside are left to
/// the opponent or the shot clock.
const ENVELOPE_X: (f64, f64) = (-0.93, -0.38);
const ENVELOPE_Y: f64 = 0.44;
/// Wait between planning attempts after a failure.
const PLAN_COOLDOWN: f64 = 0.25;
/// Re-evaluation interval while holding a defensive station.
const HOLD_INTERVAL: f64 = 0.1;
/// Continuous dead time before the referee re-serves.
const STAGNATION_LIMIT: f64 = 5.0;
/// Agent-frame serve x before jitter.
const SERVE_X: f64 = -0.55;

fn agent_index(side: Side) -> usize {
    match side {
        Side::Home => 0,
        Side::Away => 1,
    }
}

fn tactic_index(t: Tactic) -> usize {
    Tactic::ALL.iter().position(|&u| u == t).expect("known tactic")
}

/// Map a world-frame point/vector into the agent frame (identity for the
/// home side, half-turn rotation for the away side).
fn to_agent_vec(side: Side, v: &Vector2<f64>) -> Vector2<f64> {
    match side {
        Side::Home => *v,
        Side::Away => -*v,
    }
}

fn to_world_vec(side: Side, v: &Vector2<f64>) -> Vector2<f64> {
    to_agent_vec(side, v)
}

fn to_agent_state(side: Side, s: &PuckState) -> PuckState {
    match side {
        Side::Home => *s,
        Side::Away => PuckState::new(-s.r, -s.rdot, wrap_angle(s.phi + PI), s.phidot),
    }
}

fn in_envelope(p: &Vector2<f64>) -> bool {
    p.x >= ENVELOPE_X.0 && p.x <= ENVELOPE_X.1 && p.y.abs() <= ENVELOPE_Y
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Shared planning context (agent-frame constants).
struct Ctx<'a> {
    scenario: &'a Scenario,
    bounds: Rect,
    home_xy: Vector2<f64>,
    goal: Vector2<f64>,
    guard_line: f64,
    mode: HitMode,
    prep_cfg: PipelineConfig,
}

struct Exec {
    samples: Vec<TrajectorySample>,
    cursor: usize,
}

struct Agent {
    side: Side,
    q: JointVec,
    filter: Option<FilterState>,
    tactic: Tactic,
    exec: Option<Exec>,
    cooldown_until: f64,
    done_pending: bool,
    smash_entries: u32,
    failed_plans: u32,
    /// Puck position of an abandoned attack; suppresses re-arming the
    /// attack guards until the puck moves away from it.
    no_attack_near: Option<Vector2<f64>>,
    /// Consecutive gate-accepted updates; a freshly reset track reports
    /// near-zero velocity, so attacks wait for convergence.
    track_age: u32,
}

impl Agent {
    fn new(side: Side, q: JointVec) -> Agent {
        Agent {
            side,
            q,
            filter: None,
            tactic: Tactic::Init,
            exec: None,
            cooldown_until: 0.0,
            done_pending: false,
            smash_entries: 0,
            failed_plans: 0,
            no_attack_near: None,
        }
    }

    fn mallet_agent_xy(&self, scenario: &Scenario) -> Vector2<f64> {
        let p = scenario.chain.tool_position(&self.q);
        Vector2::new(p.x, p.y)
    }

    /// Fuse one noisy observation of the agent-frame puck.
    fn observe(&mut self, truth: &PuckState, t: f64, scenario: &Scenario, rng: &mut ChaCha8Rng) {
        let p = scenario.filter;
        let z = Measurement {
            t,
            r: truth.r + p.r_pos * Vector2::new(gauss(rng), gauss(rng)),
            phi: truth.phi + p.r_phi * gauss(rng),
        };
        self.filter = Some(match self.filter.take() {
            None => FilterState::from_measurement(&z, p),
            Some(f) => {
                let pred = predict(&f, scenario.sim_dt, &scenario.table, &scenario.sim);
                update(&pred, &z).0
            }
        });
    }

    /// Advance the state machine on this tick's events and plan if the
    /// active tactic needs a trajectory.
    fn think(&mut self, t: f64, first_tick: bool, ctx: &Ctx) {
        let est = self
            .filter
            .as_ref()
            .expect("observe runs before think")
            .as_puck_state();
        let mut events = derive_events(
            &est,
            &ctx.scenario.table,
            &ctx.scenario.thresholds,
            &ctx.scenario.sim,
        );
        events.start = first_tick;
        events.on_table = true;
        events.done = std::mem::take(&mut self.done_pending);
        if let Some(p) = self.no_attack_near {
            if (est.r - p).norm() < 0.03 {
                events.can_smash = false;
                events.stuck = false;
            } else {
                self.no_attack_near = None;
            }
        }
        let next = advance(self.tactic, &events);
        if next != self.tactic {
            self.tactic = next;
            self.exec = None;
            self.cooldown_until = 0.0;
            self.failed_plans = 0;
            if next == Tactic::Smash {
                self.smash_entries += 1;
            }
        }
        if self.tactic.executes_trajectory() && self.exec.is_none() && t >= self.cooldown_until {
            self.plan(&est, t, ctx);
        }
    }

    fn start_exec(&mut self, samples: Vec<TrajectorySample>) {
        self.failed_plans = 0;
        self.exec = Some(Exec { samples, cursor: 0 });
    }

    /// Give up on the current attempt: report completion so the state
    /// machine can move on, and back off before planning again.
    fn abort(&mut self, t: f64) {
        self.done_pending = true;
        self.failed_plans = 0;
        self.cooldown_until = t + PLAN_COOLDOWN;
    }

    /// Give up on an attack (smash/prepare) and keep its guards disarmed
    /// until the puck leaves the position that defeated the planner.
    fn abort_attack(&mut self, est: &PuckState, t: f64) {
        self.abort(t);
        self.no_attack_near = Some(est.r);
    }

    fn plan(&mut self, est: &PuckState, t: f64, ctx: &Ctx) {
        let s = ctx.scenario;
        match self.tactic {
            Tactic::Home => {
                if (ctx.home_xy - self.mallet_agent_xy(s)).norm() < 1e-6 {
                    self.done_pending = true;
                    return;
                }
                match plan_move_trajectory(&s.chain, &self.q, &ctx.home_xy, 0.8, &s.pipeline.tracker)
                {
                    Ok(traj) => self.start_exec(traj.samples),
                    Err(_) => self.abort(t),
                }
            }
            Tactic::Smash => {
                if !in_envelope(&est.r) {
                    self.abort_attack(est, t);
                    return;
                }
                for kind in HitKind::ALL {
                    let Ok(dir) = compute_hit_direction(&est.r, &ctx.goal, &s.table, kind) else {
                        continue;
                    };
                    let traj = plan_hit_trajectory(
                        &s.chain,
                        &self.q,
                        &est.r,
                        &dir,
                        &ctx.home_xy,
                        &s.table,
                        &s.pipeline,
                        ctx.mode,
                    );
                    if traj.feasible {
                        self.start_exec(traj.samples);
                        return;
                    }
                }
                self.failed_plans += 1;
                self.cooldown_until = t + PLAN_COOLDOWN;
                if self.failed_plans >= 2 {
                    self.abort_attack(est, t);
                }
            }
            Tactic::Cut => {
                let crossing = predict_crossing(
                    est,
                    ctx.guard_line,
                    &s.table,
                    &s.sim,
                    s.thresholds.horizon.max(3.0),
                );
                let mut target = cut_target(crossing.map_or(est.r.y, |c| c.y), &ctx.bounds);
                target.x = target.x.max(DEFENSE_X);
                if (target - self.mallet_agent_xy(s)).norm() < 5e-3 {
                    self.cooldown_until = t + HOLD_INTERVAL;
                    return;
                }
                match plan_move_trajectory(&s.chain, &self.q, &target, 1.2, &s.pipeline.tracker) {
                    Ok(traj) => self.start_exec(traj.samples),
                    Err(_) => self.cooldown_until = t + HOLD_INTERVAL,
                }
            }
            Tactic::Repel => {
                let Some(c) = predict_crossing(
                    est,
                    REPEL_X,
                    &s.table,
                    &s.sim,
                    s.thresholds.horizon.max(3.0),
                ) else {
                    self.abort(t);
                    return;
                };
                let target =
                    Vector2::new(REPEL_X, c.y.clamp(ctx.bounds.min.y, ctx.bounds.max.y));
                let dist = (target - self.mallet_agent_xy(s)).norm();
                if dist < 5e-3 {
                    self.cooldown_until = t + HOLD_INTERVAL;
                    return;
                }
                let v_peak = (2.0 * dist / c.t.max(0.1)).clamp(0.4, 2.0);
                match plan_move_trajectory(&s.chain, &self.q, &target, v_peak, &s.pipeline.tracker)
                {
                    Ok(traj) => self.start_exec(traj.samples),
                    Err(_) => self.abort(t),
                }
            }
            Tactic::Prepare => {
                if !in_envelope(&est.r) || !s.table.in_half(&est.r, Side::Home) {
                    self.abort_attack(est, t);
                    return;
                }
                let Ok(dir) =
                    compute_hit_direction(&est.r, &Vector2::zeros(), &s.table, HitKind::Direct)
                else {
                    self.abort_attack(est, t);
                    return;
                };
                let traj = plan_hit_trajectory(
                    &s.chain,
                    &self.q,
                    &est.r,
                    &dir,
                    &ctx.home_xy,
                    &s.table,
                    &ctx.prep_cfg,
                    HitMode::Qp,
                );
                if traj.feasible {
                    self.start_exec(traj.samples);
                } else {
                    self.failed_plans += 1;
                    self.cooldown_until = t + PLAN_COOLDOWN;
                    if self.failed_plans >= 2 {
                        self.abort_attack(est, t);
                    }
                }
            }
            Tactic::Init | Tactic::Ready => {}
        }
    }

    /// Step the active trajectory by one tick.
    fn execute(&mut self) {
        if let Some(exec) = &mut self.exec {
            exec.cursor += 1;
            let k = exec.cursor.min(exec.samples.len() - 1);
            self.q = exec.samples[k].q;
            if exec.cursor + 1 >= exec.samples.len() {
                self.exec = None;
                self.done_pending = true;
            }
        }
    }
}

/// A goal as the referee saw it.
#[derive(Debug, Clone, Copy)]
pub struct GoalEvent {
    pub tick: usize,
    pub t: f64,
    pub scorer: Side,
    /// Ground-truth puck position on the detection tick.
    pub puck: Vector2<f64>,
}

#[derive(Debug, Clone)]
pub struct SelfplayReport {
    pub ticks: usize,
    pub duration: f64,
    /// Goals scored by [home, away].
    pub score: [u32; 2],
    pub goals: Vec<GoalEvent>,
    pub serves: usize,
    /// Times each agent's state machine entered Smash.
    pub smash_entries: [u32; 2],
    /// Ticks spent in each tactic per agent, indexed like `Tactic::ALL`.
    pub tactic_ticks: [[u64; 7]; 2],
    /// Invariant violations observed during the run (empty on a clean run).
    pub violations: Vec<String>,
    pub log_csv: String,
    pub events_csv: String,
}

fn serve_state(
    serve_index: usize,
    mallets: &[Mallet; 2],
    table_gap: f64,
    rng: &mut ChaCha8Rng,
) -> (Side, PuckState) {
    let side = if serve_index % 2 == 0 { Side::Home } else { Side::Away };
    let mut world = Vector2::zeros();
    for _ in 0..10 {
        let jx = rng.gen_range(-0.05..0.05);
        let mut jy: f64 = rng.gen_range(-0.25..0.25);
        // Keep the serve clearly off the mallet rest line: a strike whose
        // approach and recovery both lie on the hit line has no
        // line-arc-line realization.
        if jy.abs() < 0.02 {
            jy = 0.02_f64.copysign(if jy == 0.0 { 1.0 } else { jy });
        }
        world = to_world_vec(side, &Vector2::new(SERVE_X + jx, jy));
        if mallets.iter().all(|m| (world - m.pos).norm() > table_gap) {
            break;
        }
    }
    (side, PuckState::new(world, Vector2::zeros(), 0.0, 0.0))
}

/// Run one seeded self-play game of `scenario.selfplay_duration` seconds.
pub fn run_selfplay(scenario: &Scenario, seed: u64) -> Result<SelfplayReport, HarnessError> {
    let table = &scenario.table;
    let dt = scenario.sim_dt;
    let bounds = tightened_boundary(table, scenario.plan_margin())?;
    let home_xy = {
        let p = scenario.chain.tool_position(&scenario.home_q);
        Vector2::new(p.x, p.y)
    };
    let ctx = Ctx {
        scenario,
        bounds,
        home_xy,
        goal: Vector2::new(0.5 * table.length, 0.0),
        guard_line: -(0.5 * table.length - table.puck_radius) + table.puck_radius,
        mode: scenario.selfplay_mode,
        prep_cfg: PipelineConfig {
            qp_hit_speed: 0.75,
            ..scenario.pipeline.clone()
        },
    };
    let contact_gap = table.puck_radius + table.mallet_radius + 0.02;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = [
        Agent::new(Side::Home, scenario.home_q),
        Agent::new(Side::Away, scenario.home_q),
    ];
    let mut prev_pos: [Vector2<f64>; 2] = [
        to_world_vec(Side::Home, &home_xy),
        to_world_vec(Side::Away, &home_xy),
    ];
    let rest_mallets = [
        Mallet { pos: prev_pos[0], vel: Vector2::zeros() },
        Mallet { pos: prev_pos[1], vel: Vector2::zeros() },
    ];

    let ticks = (scenario.selfplay_duration / dt).round() as usize;
    let mut log = Csv::new(
        "tick,t,puck_x,puck_y,puck_vx,puck_vy,home_mallet_x,home_mallet_y,away_mallet_x,away_mallet_y,home_tactic,away_tactic,score_home,score_away",
    );
    let mut events = Csv::new("tick,t,event,x,y,score_home,score_away");
    let mut score = [0u32; 2];
    let mut goals = Vec::new();
    let mut violations: Vec<String> = Vec::new();
    let mut tactic_ticks = [[0u64; 7]; 2];
    let mut stagnation = 0.0;
    let mut serve_index = 0usize;

    let violation = |violations: &mut Vec<String>, msg: String| {
        if violations.len() < 20 {
            violations.push(msg);
        }
    };
    let push_event =
        |events: &mut Csv, tick: usize, name: &str, p: &Vector2<f64>, score: &[u32; 2]| {
            events.row(&[
                tick.to_string(),
                fmt(tick as f64 * dt),
                name.to_string(),
                fmt(p.x),
                fmt(p.y),
                score[0].to_string(),
                score[1].to_string(),
            ]);
        };

    let (first_server, mut puck) = serve_state(serve_index, &rest_mallets, contact_gap, &mut rng);
    serve_index += 1;
    push_event(
        &mut events,
        0,
        if first_server == Side::Home { "serve_home" } else { "serve_away" },
        &puck.r,
        &score,
    );

    for tick in 0..ticks {
        let t = tick as f64 * dt;
        let smash_before = [agents[0].smash_entries, agents[1].smash_entries];

        let mut mallets = rest_mallets;
        for i in 0..2 {
            let truth = to_agent_state(agents[i].side, &puck);
            agents[i].observe(&truth, t, scenario, &mut rng);
            agents[i].think(t, tick == 0, &ctx);
            agents[i].execute();
            tactic_ticks[i][tactic_index(agents[i].tactic)] += 1;

            let p3 = scenario.chain.tool_position(&agents[i].q);
            if p3.z.abs() > 2e-3 {
                violation(
                    &mut violations,
                    format!("tick {tick}: agent {i} mallet left the table plane (z = {})", p3.z),
                );
            }
            let new_pos = to_world_vec(agents[i].side, &Vector2::new(p3.x, p3.y));
            mallets[i] = Mallet {
                pos: prev_pos[i],
                vel: (new_pos - prev_pos[i]) / dt,
            };
            prev_pos[i] = new_pos;
        }
        for i in 0..2 {
            if agents[i].smash_entries > smash_before[i] {
                let name = if i == 0 { "smash_home" } else { "smash_away" };
                push_event(&mut events, tick, name, &puck.r, &score);
            }
        }

        puck = step(&puck, &scenario.sim, table, &mallets, dt);

        if puck.r.y.abs() > 0.5 * table.width - table.puck_radius + 1e-9 {
            violation(
                &mut violations,
                format!("tick {tick}: puck outside the side rims (y = {})", puck.r.y),
            );
        }

        let scorer = [Side::Home, Side::Away]
            .into_iter()
            .find(|&side| table.in_goal(&puck.r, side))
            .map(Side::opponent);
        if let Some(who) = scorer {
            score[agent_index(who)] += 1;
            goals.push(GoalEvent {
                tick,
                t,
                scorer: who,
                puck: puck.r,
            });
            push_event(
                &mut events,
                tick,
                if who == Side::Home { "goal_home" } else { "goal_away" },
                &puck.r,
                &score,
            );
            let (server, next) = serve_state(serve_index, &mallets, contact_gap, &mut rng);
            serve_index += 1;
            puck = next;
            push_event(
                &mut events,
                tick,
                if server == Side::Home { "serve_home" } else { "serve_away" },
                &puck.r,
                &score,
            );
            for a in &mut agents {
                a.exec = None;
                a.done_pending = true;
            }
            stagnation = 0.0;
        } else if puck.rdot.norm() < scenario.thresholds.v_still
            && agents.iter().all(|a| a.exec.is_none())
        {
            stagnation += dt;
            if stagnation >= STAGNATION_LIMIT {
                push_event(&mut events, tick, "stagnation_reserve", &puck.r, &score);
                let (server, next) = serve_state(serve_index, &mallets, contact_gap, &mut rng);
                serve_index += 1;
                puck = next;
                push_event(
                    &mut events,
                    tick,
                    if server == Side::Home { "serve_home" } else { "serve_away" },
                    &puck.r,
                    &score,
                );
                for a in &mut agents {
                    a.exec = None;
                    a.done_pending = true;
                }
                stagnation = 0.0;
            }
        } else {
            stagnation = 0.0;
        }

        log.row(&[
            tick.to_string(),
            fmt(t),
            fmt(puck.r.x),
            fmt(puck.r.y),
            fmt(puck.rdot.x),
            fmt(puck.rdot.y),
            fmt(prev_pos[0].x),
            fmt(prev_pos[0].y),
            fmt(prev_pos[1].x),
            fmt(prev_pos[1].y),
            agents[0].tactic.name().to_string(),
            agents[1].tactic.name().to_string(),
            score[0].to_string(),
            score[1].to_string(),
        ]);
    }

    Ok(SelfplayReport {
        ticks,
        duration: scenario.selfplay_duration,
        score,
        goals,
        serves: serve_index,
        smash_entries: [agents[0].smash_entries, agents[1].smash_entries],
        tactic_ticks,
        violations,
        log_csv: log.to_string(),
        events_csv: events.to_string(),
    })
}

impl SelfplayReport {
    /// One-row game summary. Header:
    /// `ticks,duration_s,score_home,score_away,goals,serves,smash_home,smash_away,violations`.
    pub fn summary_csv(&self) -> String {
        let mut csv = Csv::new(
            "ticks,duration_s,score_home,score_away,goals,serves,smash_home,smash_away,violations",
        );
        csv.row(&[
            self.ticks.to_string(),
            fmt(self.duration),
            self.score[0].to_string(),
            self.score[1].to_string(),
            self.goals.len().to_string(),
            self.serves.to_string(),
            self.smash_entries[0].to_string(),
            self.smash_entries[1].to_string(),
            self.violations.len().to_string(),
        ]);
        csv.to_string()
    }

    /// Tactic occupancy per agent. Header: `agent,tactic,ticks`.
    pub fn tactics_csv(&self) -> String {
        let mut csv = Csv::new("agent,tactic,ticks");
        for (i, name) in ["home", "away"].iter().enumerate() {
            for (k, tactic) in Tactic::ALL.iter().enumerate() {
                csv.row(&[
                    name.to_string(),
                    tactic.name().to_string(),
                    self.tactic_ticks[i][k].to_string(),
                ]);
            }
        }
        csv.to_string()
    }

    pub fn score_line(&self) -> String {
        format!(
            "final score: home {} - {} away ({} serves, smashes home {} / away {}, {} violations)",
            self.score[0],
            self.score[1],
            self.serves,
            self.smash_entries[0],
            self.smash_entries[1],
            self.violations.len(),
        )
    }
}
