//! High-level play selection: a finite state machine over seven tactics,
//! driven by game events and guard predicates computed from the tracked
//! puck state.
//!
//! The FSM is written from the home agent's perspective (home defends the
//! goal at negative x). In two-agent play the away agent mirrors the world
//! into its own frame and uses the same predicates.

use nalgebra::Vector2;

use crate::puck_dynamics::{step, PuckState, SimParams};
use crate::table::{Rect, Side, TableGeometry};

/// The seven tactics. `Init` is the safe idle state; `Home`/`Ready` are
/// staging states; the rest execute a skill trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tactic {
    Init,
    Home,
    Ready,
    Smash,
    Cut,
    Repel,
    Prepare,
}

impl Tactic {
    pub const ALL: [Tactic; 7] = [
        Tactic::Init,
        Tactic::Home,
        Tactic::Ready,
        Tactic::Smash,
        Tactic::Cut,
        Tactic::Repel,
        Tactic::Prepare,
    ];

    /// Whether the tactic executes a planned trajectory while active.
    pub fn executes_trajectory(self) -> bool {
        !matches!(self, Tactic::Init | Tactic::Ready)
    }

    pub fn name(self) -> &'static str {
        match self {
            Tactic::Init => "init",
            Tactic::Home => "home",
            Tactic::Ready => "ready",
            Tactic::Smash => "smash",
            Tactic::Cut => "cut",
            Tactic::Repel => "repel",
            Tactic::Prepare => "prepare",
        }
    }
}

/// Instantaneous inputs to the FSM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameEvent {
    Start,
    Stop,
    Pause,
    OnTable,
    Defense,
    CanSmash,
    CanRepel,
    Stuck,
    Done,
}

impl GameEvent {
    pub const ALL: [GameEvent; 9] = [
        GameEvent::Start,
        GameEvent::Stop,
        GameEvent::Pause,
        GameEvent::OnTable,
        GameEvent::Defense,
        GameEvent::CanSmash,
        GameEvent::CanRepel,
        GameEvent::Stuck,
        GameEvent::Done,
    ];
}

/// Single-event transition. Total: unlisted pairs return the state itself.
pub fn transition(state: Tactic, event: GameEvent) -> Tactic {
    use GameEvent::*;
    use Tactic::*;
    match (state, event) {
        (_, Stop) => Init,
        (s, Pause) if s != Init => Ready,
        (Init, Start) => Home,
        (Home, OnTable) => Ready,
        (Ready, CanSmash) => Smash,
        (Ready, CanRepel) => Repel,
        (Ready, Defense) => Cut,
        (Ready, Stuck) => Prepare,
        (Smash | Repel | Prepare, Done) => Ready,
        (s, _) => s,
    }
}

/// The events observed on one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventSet {
    pub start: bool,
    pub stop: bool,
    pub pause: bool,
    pub on_table: bool,
    pub defense: bool,
    pub can_smash: bool,
    pub can_repel: bool,
    pub stuck: bool,
    pub done: bool,
}

impl EventSet {
    pub fn contains(&self, e: GameEvent) -> bool {
        match e {
            GameEvent::Start => self.start,
            GameEvent::Stop => self.stop,
            GameEvent::Pause => self.pause,
            GameEvent::OnTable => self.on_table,
            GameEvent::Defense => self.defense,
            GameEvent::CanSmash => self.can_smash,
            GameEvent::CanRepel => self.can_repel,
            GameEvent::Stuck => self.stuck,
            GameEvent::Done => self.done,
        }
    }
}

/// Advance the FSM by one tick. `Stop` and `Pause` preempt everything;
/// `Cut` falls back to `Ready` when the defense condition has lapsed; the
/// remaining events apply in fixed priority order (structural events, then
/// Defense > CanRepel > CanSmash > Stuck) and the first one that moves the
/// state wins.
pub fn advance(state: Tactic, events: &EventSet) -> Tactic {
    use GameEvent::*;
    if events.stop {
        return transition(state, Stop);
    }
    if events.pause {
        return transition(state, Pause);
    }
    let mut s = state;
    if s == Tactic::Cut && !events.defense {
        s = Tactic::Ready;
    }
    for ev in [Start, OnTable, Done, Defense, CanRepel, CanSmash, Stuck] {
        if events.contains(ev) {
            let next = transition(s, ev);
            if next != s {
                return next;
            }
        }
    }
    s
}

/// Guard thresholds for deriving events from the puck estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Smash only pucks slower than this (m/s).
    pub v_smash_max: f64,
    /// Repel only pucks incoming faster than this (m/s).
    pub v_repel_min: f64,
    /// Below this speed the puck counts as stationary (m/s).
    pub v_still: f64,
    /// A stationary puck closer than this to a rim is stuck (m).
    pub d_border: f64,
    /// Look-ahead for the defense guard (s).
    pub horizon: f64,
    /// Extra half-width added to the goal mouth for the risk corridor (m).
    pub corridor_margin: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            v_smash_max: 0.5,
            v_repel_min: 1.0,
            v_still: 0.05,
            d_border: 0.1,
            horizon: 1.5,
            corridor_margin: 0.05,
        }
    }
}

/// A predicted crossing of a vertical line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub y: f64,
    pub t: f64,
}

/// Propagate the puck with the drift/collision model until its center
/// crosses the vertical line `x = x_line`, it slows to a near stop, or
/// `max_time` elapses. Returns the crossing point and time, interpolated
/// within the step that crosses.
pub fn predict_crossing(
    puck: &PuckState,
    x_line: f64,
    table: &TableGeometry,
    params: &SimParams,
    max_time: f64,
) -> Option<Crossing> {
    const DT: f64 = 0.01;
    const V_STOP: f64 = 0.01;
    let start_side = (puck.r.x - x_line).signum();
    if start_side == 0.0 {
        return Some(Crossing { y: puck.r.y, t: 0.0 });
    }
    let mut s = *puck;
    let mut t = 0.0;
    while t < max_time {
        let next = step(&s, params, table, &[], DT);
        let before = s.r.x - x_line;
        let after = next.r.x - x_line;
        // A rim reflection beyond the line can hide the crossing entirely
        // within one step: the x-velocity flips back toward the start side
        // while the sampled endpoints never change sign. Treat a flip
        // within sweeping reach of the line as having reached it.
        let crossed = before.signum() != after.signum() || after == 0.0;
        let reflected = !crossed
            && s.rdot.x.signum() * before < 0.0
            && next.rdot.x.signum() == before.signum()
            && before.abs() <= s.rdot.x.abs() * DT;
        if crossed || reflected {
            let frac = if reflected {
                (before.abs() / (s.rdot.x.abs() * DT)).clamp(0.0, 1.0)
            } else if (before - after).abs() > 1e-15 {
                before / (before - after)
            } else {
                0.0
            };
            let y = s.r.y + frac * (next.r.y - s.r.y);
            return Some(Crossing {
                y,
                t: t + frac * DT,
            });
        }
        if next.rdot.norm() < V_STOP {
            return None;
        }
        s = next;
        t += DT;
    }
    None
}

/// Distance from the puck's edge to the nearest rim wall.
fn rim_gap(p: &Vector2<f64>, table: &TableGeometry) -> f64 {
    let gy = 0.5 * table.width - table.puck_radius - p.y.abs();
    let gx = 0.5 * table.length - table.puck_radius - p.x.abs();
    gy.min(gx)
}

/// Derive the guard events for the home agent from the estimated puck
/// state. At most one of Defense / CanRepel / CanSmash / Stuck is set, in
/// that priority order.
pub fn derive_events(
    puck: &PuckState,
    table: &TableGeometry,
    thresholds: &Thresholds,
    params: &SimParams,
) -> EventSet {
    let mut events = EventSet::default();
    let speed = puck.rdot.norm();
    // The rim reflects the puck center exactly at the goal line, so
    // predict one puck radius in front of it: a line the center strictly
    // crosses before any home-rim contact.
    let goal_line = -(0.5 * table.length - table.puck_radius);
    let guard_line = goal_line + table.puck_radius;
    let corridor = 0.5 * table.goal_width + thresholds.corridor_margin;
    let incoming = puck.rdot.x < 0.0 && puck.r.x > guard_line;
    let crossing = if incoming {
        predict_crossing(puck, guard_line, table, params, thresholds.horizon.max(3.0))
    } else {
        None
    };

    let defense = crossing
        .as_ref()
        .is_some_and(|c| c.t <= thresholds.horizon && c.y.abs() <= corridor);
    let can_repel = speed > thresholds.v_repel_min
        && incoming
        && crossing.as_ref().is_some_and(|c| c.y.abs() > corridor);
    let can_smash = table.in_half(&puck.r, Side::Home) && speed < thresholds.v_smash_max;
    let stuck = speed < thresholds.v_still && rim_gap(&puck.r, table) < thresholds.d_border;

    if defense {
        events.defense = true;
    } else if can_repel {
        events.can_repel = true;
    } else if can_smash {
        events.can_smash = true;
    } else if stuck {
        events.stuck = true;
    }
    events
}

/// Mallet target for the Cut tactic: sit on the defense line at the
/// predicted crossing height, clamped into the planning boundary.
pub fn cut_target(crossing_y: f64, bounds: &Rect) -> Vector2<f64> {
    Vector2::new(
        bounds.min.x,
        crossing_y.clamp(bounds.min.y, bounds.max.y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn figure_edges() {
        assert_eq!(transition(Tactic::Ready, GameEvent::CanSmash), Tactic::Smash);
        assert_eq!(transition(Tactic::Cut, GameEvent::Stop), Tactic::Init);
        assert_eq!(transition(Tactic::Init, GameEvent::Done), Tactic::Init);
        assert_eq!(transition(Tactic::Init, GameEvent::Start), Tactic::Home);
        assert_eq!(transition(Tactic::Home, GameEvent::OnTable), Tactic::Ready);
        assert_eq!(transition(Tactic::Ready, GameEvent::Defense), Tactic::Cut);
        assert_eq!(transition(Tactic::Smash, GameEvent::Done), Tactic::Ready);
    }

    #[test]
    fn stop_reaches_init_from_everywhere() {
        for s in Tactic::ALL {
            assert_eq!(transition(s, GameEvent::Stop), Tactic::Init);
        }
    }

    #[test]
    fn pause_parks_every_non_init_state_in_ready() {
        for s in Tactic::ALL {
            let expect = if s == Tactic::Init { Tactic::Init } else { Tactic::Ready };
            assert_eq!(transition(s, GameEvent::Pause), expect);
        }
    }

    #[test]
    fn cut_relaxes_to_ready_when_defense_lapses() {
        let none = EventSet::default();
        assert_eq!(advance(Tactic::Cut, &none), Tactic::Ready);
        let defended = EventSet {
            defense: true,
            ..EventSet::default()
        };
        assert_eq!(advance(Tactic::Cut, &defended), Tactic::Cut);
    }

    #[test]
    fn advance_prefers_defense_over_other_guards() {
        let e = EventSet {
            defense: true,
            can_smash: true,
            stuck: true,
            ..EventSet::default()
        };
        assert_eq!(advance(Tactic::Ready, &e), Tactic::Cut);
    }

    #[test]
    fn stop_preempts_everything() {
        let e = EventSet {
            stop: true,
            defense: true,
            start: true,
            ..EventSet::default()
        };
        for s in Tactic::ALL {
            assert_eq!(advance(s, &e), Tactic::Init);
        }
    }

    #[test]
    fn stationary_center_puck_in_own_half_is_smashable() {
        let table = TableGeometry::default();
        let puck = PuckState::at_rest(Vector2::new(-0.4, 0.0));
        let e = derive_events(&puck, &table, &Thresholds::default(), &SimParams::default());
        assert!(e.can_smash);
        assert!(!e.defense && !e.can_repel && !e.stuck);
    }

    #[test]
    fn fast_puck_at_goal_center_raises_defense() {
        let table = TableGeometry::default();
        let puck = PuckState::new(
            Vector2::new(0.5, 0.0),
            Vector2::new(-3.0, 0.0),
            0.0,
            0.0,
        );
        let e = derive_events(&puck, &table, &Thresholds::default(), &SimParams::default());
        assert!(e.defense);
        assert!(!e.can_repel && !e.can_smash && !e.stuck);
    }

    #[test]
    fn stationary_puck_near_rim_is_stuck() {
        let table = TableGeometry::default();
        let y = 0.5 * table.width - table.puck_radius - 0.02;
        let puck = PuckState::at_rest(Vector2::new(0.3, y));
        let e = derive_events(&puck, &table, &Thresholds::default(), &SimParams::default());
        assert!(e.stuck, "{e:?}");
        assert!(!e.can_smash, "opponent-half puck is not smashable");
    }

    #[test]
    fn fast_offside_puck_triggers_repel() {
        let table = TableGeometry::default();
        // Incoming fast, aimed well away from the goal mouth.
        let puck = PuckState::new(
            Vector2::new(0.6, 0.35),
            Vector2::new(-2.5, 0.35),
            0.0,
            0.0,
        );
        let e = derive_events(&puck, &table, &Thresholds::default(), &SimParams::default());
        assert!(e.can_repel, "{e:?}");
        assert!(!e.defense);
    }

    #[test]
    fn receding_puck_has_no_crossing() {
        let table = TableGeometry::default();
        let puck = PuckState::new(
            Vector2::new(0.2, 0.0),
            Vector2::new(1.0, 0.0),
            0.0,
            0.0,
        );
        let c = predict_crossing(&puck, -0.5, &table, &SimParams::default(), 3.0);
        assert!(c.is_none());
    }

    #[test]
    fn head_on_crossing_matches_distance_over_speed() {
        let table = TableGeometry::default();
        let p = SimParams {
            d_lin: 0.0,
            mu_table: 0.0,
            ..SimParams::default()
        };
        let puck = PuckState::new(
            Vector2::new(0.5, 0.1),
            Vector2::new(-1.0, 0.0),
            0.0,
            0.0,
        );
        let c = predict_crossing(&puck, -0.5, &table, &p, 3.0).unwrap();
        assert_relative_eq!(c.t, 1.0, epsilon = 0.02);
        assert_relative_eq!(c.y, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn cut_target_clamps_into_bounds() {
        let b = Rect {
            min: Vector2::new(-1.0, -0.5),
            max: Vector2::new(-0.2, 0.5),
        };
        let p = cut_target(2.0, &b);
        assert_relative_eq!(p.x, -1.0);
        assert_relative_eq!(p.y, 0.5);
    }
}
