//! Cartesian hit-path planning on the table plane.
//!
//! A hit plan moves the mallet from a rest point through the hit point (at
//! the commanded speed, along the commanded direction) to a rest stop
//! point. Each of the two halves is a polyline corner — rest point, an
//! auxiliary *middle point* where the hit line crosses the tightened
//! boundary, and the hit point — blended with the largest arc that stays
//! tangent to both legs. The arc-length profile on each half is a quartic
//! with zero boundary accelerations, which fixes the half duration to
//! `t_f = 2·s_f / v_hit`.
//!
//! All geometry stays strictly inside the tightened boundary by convexity:
//! every control point is inside, and the blend arcs live in the convex
//! hull of their corners.

use nalgebra::{Unit, Vector2};
use thiserror::Error;

use crate::table::{Rect, TableGeometry};

/// Shrink applied to the blend radius so both tangent points stay strictly
/// inside their legs.
const RADIUS_SHRINK: f64 = 1e-6;
const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("tightened boundary is empty")]
    EmptyRegion,
    #[error("{0} lies outside the planning boundary")]
    OutOfBounds(&'static str),
    #[error("degenerate hit geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("exactly one of the boundary speeds must be zero (got {v_start}, {v_end})")]
    InvalidBoundary { v_start: f64, v_end: f64 },
    #[error("time {t} outside the plan range [0, {total}]")]
    OutOfRange { t: f64, total: f64 },
}

/// How the puck should reach the target: straight, or off one of the long
/// rims.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitKind {
    Direct,
    /// Bounce off the long rim on the puck's side of the center line.
    ForwardBounce,
    /// Bounce off the long rim opposite the puck's side.
    ReverseBounce,
}

impl HitKind {
    pub const ALL: [HitKind; 3] = [HitKind::Direct, HitKind::ForwardBounce, HitKind::ReverseBounce];

    pub fn name(self) -> &'static str {
        match self {
            HitKind::Direct => "direct",
            HitKind::ForwardBounce => "forward_bounce",
            HitKind::ReverseBounce => "reverse_bounce",
        }
    }
}

/// The tightened planning boundary: the table surface shrunk by `margin`
/// on every side.
pub fn tightened_boundary(table: &TableGeometry, margin: f64) -> Result<Rect, PlanError> {
    table.surface().shrunk(margin).map_err(|_| PlanError::EmptyRegion)
}

/// Direction the mallet must push the puck so it reaches `target` with the
/// requested bounce kind. Bounces mirror the target across the effective
/// rim line `|y| = width/2 − puck_radius` (the line traced by the puck
/// center when it touches a long rim).
pub fn compute_hit_direction(
    puck: &Vector2<f64>,
    target: &Vector2<f64>,
    table: &TableGeometry,
    kind: HitKind,
) -> Result<Unit<Vector2<f64>>, PlanError> {
    let aim = match kind {
        HitKind::Direct => *target,
        HitKind::ForwardBounce | HitKind::ReverseBounce => {
            let puck_side = if puck.y >= 0.0 { 1.0 } else { -1.0 };
            let rim_side = match kind {
                HitKind::ForwardBounce => puck_side,
                _ => -puck_side,
            };
            let rim_y = rim_side * (0.5 * table.width - table.puck_radius);
            Vector2::new(target.x, 2.0 * rim_y - target.y)
        }
    };
    let d = aim - puck;
    if d.norm() < GEOM_EPS {
        return Err(PlanError::DegenerateGeometry("hit target coincides with the puck"));
    }
    Ok(Unit::new_normalize(d))
}

/// Quartic arc-length profile `s(t) = a0 + a1·t + a2·t² + a3·t³ + a4·t⁴`
/// over `[0, t_f]` with zero boundary accelerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticProfile {
    pub a: [f64; 5],
    pub t_f: f64,
    pub s_f: f64,
}

impl QuarticProfile {
    pub fn position(&self, t: f64) -> f64 {
        let a = &self.a;
        (((a[4] * t + a[3]) * t + a[2]) * t + a[1]) * t + a[0]
    }

    pub fn speed(&self, t: f64) -> f64 {
        let a = &self.a;
        ((4.0 * a[4] * t + 3.0 * a[3]) * t + 2.0 * a[2]) * t + a[1]
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        let a = &self.a;
        (12.0 * a[4] * t + 6.0 * a[3]) * t + 2.0 * a[2]
    }
}

/// Fit the quartic profile for a half of the plan. Exactly one of
/// `v_start`, `v_end` must be zero; the nonzero one is the hit speed and
/// fixes `t_f = 2·s_f / v_hit`.
pub fn fit_quartic_profile(s_f: f64, v_start: f64, v_end: f64) -> Result<QuarticProfile, PlanError> {
    if !(s_f > 0.0) {
        return Err(PlanError::DegenerateGeometry("profile needs positive path length"));
    }
    if v_start < 0.0 || v_end < 0.0 || (v_start == 0.0) == (v_end == 0.0) {
        return Err(PlanError::InvalidBoundary { v_start, v_end });
    }
    let v = v_start.max(v_end);
    let t_f = 2.0 * s_f / v;
    let a = if v_start == 0.0 {
        // Accelerating half: s = a3·t³ + a4·t⁴.
        [0.0, 0.0, 0.0, 2.0 * s_f / t_f.powi(3), -s_f / t_f.powi(4)]
    } else {
        // Decelerating half: the accelerating profile mirrored in time.
        [0.0, v, 0.0, -2.0 * s_f / t_f.powi(3), s_f / t_f.powi(4)]
    };
    Ok(QuarticProfile { a, t_f, s_f })
}

/// One geometric piece of a path, parameterized by arc length.
#[derive(Debug, Clone, Copy)]
pub enum Piece {
    Line {
        start: Vector2<f64>,
        dir: Unit<Vector2<f64>>,
        len: f64,
    },
    Arc {
        center: Vector2<f64>,
        radius: f64,
        /// Polar angle of the entry point.
        theta0: f64,
        /// +1 counter-clockwise, -1 clockwise.
        turn: f64,
        len: f64,
    },
}

impl Piece {
    pub fn len(&self) -> f64 {
        match self {
            Piece::Line { len, .. } | Piece::Arc { len, .. } => *len,
        }
    }

    /// Point and unit tangent at arc length `s ∈ [0, len]`.
    pub fn eval(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        match *self {
            Piece::Line { start, dir, .. } => (start + s * dir.into_inner(), dir.into_inner()),
            Piece::Arc {
                center,
                radius,
                theta0,
                turn,
                ..
            } => {
                let th = theta0 + turn * s / radius;
                let p = center + radius * Vector2::new(th.cos(), th.sin());
                let tangent = turn * Vector2::new(-th.sin(), th.cos());
                (p, tangent)
            }
        }
    }
}

/// A geometric path (pieces concatenated by arc length) plus its time
/// profile.
#[derive(Debug, Clone)]
pub struct Segment {
    pub pieces: Vec<Piece>,
    pub length: f64,
    pub profile: QuarticProfile,
}

impl Segment {
    fn from_pieces(pieces: Vec<Piece>, v_start: f64, v_end: f64) -> Result<Segment, PlanError> {
        let length: f64 = pieces.iter().map(Piece::len).sum();
        let profile = fit_quartic_profile(length, v_start, v_end)?;
        Ok(Segment {
            pieces,
            length,
            profile,
        })
    }

    /// Point and unit tangent at arc length `s`, clamped into `[0, length]`.
    pub fn point_at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        let mut s = s.clamp(0.0, self.length);
        for p in &self.pieces {
            if s <= p.len() {
                return p.eval(s);
            }
            s -= p.len();
        }
        let last = self.pieces.last().expect("segment has pieces");
        last.eval(last.len())
    }

    /// Position and velocity at segment time `t ∈ [0, t_f]`.
    pub fn state_at(&self, t: f64) -> (Vector2<f64>, Vector2<f64>) {
        let s = self.profile.position(t);
        let sd = self.profile.speed(t);
        let (p, tangent) = self.point_at(s);
        (p, tangent * sd)
    }
}

/// A complete two-segment hit plan.
#[derive(Debug, Clone)]
pub struct HitPlan {
    pub hit_point: Vector2<f64>,
    pub hit_dir: Unit<Vector2<f64>>,
    pub hit_speed: f64,
    /// Approach segment (rest → hit) and recovery segment (hit → rest).
    pub segments: [Segment; 2],
}

impl HitPlan {
    /// Time of the hit (end of the approach segment).
    pub fn hit_time(&self) -> f64 {
        self.segments[0].profile.t_f
    }

    pub fn total_time(&self) -> f64 {
        self.segments[0].profile.t_f + self.segments[1].profile.t_f
    }

    /// Position and velocity at plan time `t`.
    pub fn state_at(&self, t: f64) -> Result<(Vector2<f64>, Vector2<f64>), PlanError> {
        let total = self.total_time();
        if t < -1e-12 || t > total + 1e-12 {
            return Err(PlanError::OutOfRange { t, total });
        }
        let t1 = self.segments[0].profile.t_f;
        if t <= t1 {
            Ok(self.segments[0].state_at(t))
        } else {
            Ok(self.segments[1].state_at((t - t1).min(self.segments[1].profile.t_f)))
        }
    }

    /// Sample the plan as CSV rows `t,x,y,vx,vy`.
    pub fn to_csv(&self, dt: f64) -> String {
        let mut out = String::from("t,x,y,vx,vy\n");
        let total = self.total_time();
        let mut k = 0usize;
        loop {
            let t = (k as f64) * dt;
            let t = if t > total { total } else { t };
            let (p, v) = self.state_at(t).expect("t within range");
            out.push_str(&format!("{},{},{},{},{}\n", t, p.x, p.y, v.x, v.y));
            if t >= total {
                break;
            }
            k += 1;
        }
        out
    }
}

/// Parameters `t` along `point + t·dir` where the line crosses the
/// rectangle boundary, as `(t_enter, t_exit)` with `t_enter < t_exit`.
fn line_rect_span(
    point: &Vector2<f64>,
    dir: &Vector2<f64>,
    rect: &Rect,
) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for axis in 0..2 {
        let (p, d, mn, mx) = (point[axis], dir[axis], rect.min[axis], rect.max[axis]);
        if d.abs() < 1e-15 {
            if p < mn || p > mx {
                return None;
            }
        } else {
            let (t1, t2) = ((mn - p) / d, (mx - p) / d);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    (lo < hi).then_some((lo, hi))
}

/// Blend the corner `a → m → b` with the largest tangent arc whose tangent
/// points stay strictly inside both legs. Collinear pass-through corners
/// become a single line.
fn blend_corner(
    a: &Vector2<f64>,
    m: &Vector2<f64>,
    b: &Vector2<f64>,
) -> Result<Vec<Piece>, PlanError> {
    let la = (a - m).norm();
    let lb = (b - m).norm();
    if la < GEOM_EPS || lb < GEOM_EPS {
        return Err(PlanError::DegenerateGeometry("zero-length corner leg"));
    }
    let ua = (a - m) / la;
    let ub = (b - m) / lb;
    let cosang = ua.dot(&ub).clamp(-1.0, 1.0);
    let cross = ua.x * ub.y - ua.y * ub.x;
    let angle = cosang.acos();
    if angle > std::f64::consts::PI - 1e-9 {
        // Straight pass-through: a, m, b collinear with m in the middle.
        let dir = Unit::new_normalize(b - a);
        return Ok(vec![Piece::Line {
            start: *a,
            dir,
            len: la + lb,
        }]);
    }
    if angle < 1e-9 {
        return Err(PlanError::DegenerateGeometry("path would reverse onto itself"));
    }
    let tangent_len = la.min(lb) - RADIUS_SHRINK;
    if tangent_len <= 0.0 {
        return Err(PlanError::DegenerateGeometry("corner leg shorter than the blend shrink"));
    }
    let radius = tangent_len * (0.5 * angle).tan();
    let pa = m + tangent_len * ua;
    let pb = m + tangent_len * ub;
    let bisector = Unit::new_normalize(ua + ub).into_inner();
    let center = m + (tangent_len / (0.5 * angle).cos()) * bisector;
    // Motion runs a → pa → (arc) → pb → b; the turn sign follows the cross
    // product of the incoming and outgoing directions.
    let turn = if cross >= 0.0 { -1.0 } else { 1.0 };
    // Entry/exit polar angles; sweep magnitude is the exterior angle π − θ.
    let theta0 = {
        let v = pa - center;
        v.y.atan2(v.x)
    };
    let sweep = std::f64::consts::PI - angle;
    let mut pieces = Vec::with_capacity(3);
    pieces.push(Piece::Line {
        start: *a,
        dir: Unit::new_normalize(-ua),
        len: la - tangent_len,
    });
    pieces.push(Piece::Arc {
        center,
        radius,
        theta0,
        turn,
        len: radius * sweep,
    });
    pieces.push(Piece::Line {
        start: pb,
        dir: Unit::new_normalize(b - pb),
        len: lb - tangent_len,
    });
    Ok(pieces)
}

/// Build a corner path for one half of the plan. `entry` is the point the
/// half starts at; the half ends at `exit` moving freely; the line through
/// `hit` along `dir` supplies the middle point on the side `upstream`.
fn half_path(
    entry: &Vector2<f64>,
    exit: &Vector2<f64>,
    hit: &Vector2<f64>,
    dir: &Vector2<f64>,
    bounds: &Rect,
    upstream: bool,
) -> Result<Vec<Piece>, PlanError> {
    let (t_lo, t_hi) =
        line_rect_span(hit, dir, bounds).ok_or(PlanError::OutOfBounds("hit line"))?;
    let middle = if upstream { hit + t_lo * dir } else { hit + t_hi * dir };
    let (a, b) = if upstream { (entry, hit) } else { (hit, exit) };
    // Entry/exit on the hit line collapse the corner to a straight strike.
    let off_line = {
        let rel = if upstream { entry - hit } else { exit - hit };
        (rel.x * dir.y - rel.y * dir.x).abs() > GEOM_EPS
    };
    if !off_line {
        let rel = if upstream { hit - entry } else { exit - hit };
        if rel.dot(dir) <= GEOM_EPS {
            return Err(PlanError::DegenerateGeometry(
                "rest point sits on the wrong side of the hit line",
            ));
        }
        let len = rel.norm();
        return Ok(vec![Piece::Line {
            start: *a,
            dir: Unit::new_normalize(b - a),
            len,
        }]);
    }
    blend_corner(a, &middle, b)
}

/// Plan the full hit: approach from `start` (at rest) through `hit` at
/// `hit_speed` along `hit_dir`, then recover to `stop` (at rest). All three
/// control points must lie inside `bounds`.
pub fn plan_hit_path(
    start: &Vector2<f64>,
    hit: &Vector2<f64>,
    hit_dir: &Unit<Vector2<f64>>,
    stop: &Vector2<f64>,
    bounds: &Rect,
    hit_speed: f64,
) -> Result<HitPlan, PlanError> {
    if !(hit_speed > 0.0) {
        return Err(PlanError::InvalidBoundary {
            v_start: 0.0,
            v_end: hit_speed,
        });
    }
    for (p, name) in [(start, "start point"), (hit, "hit point"), (stop, "stop point")] {
        if !bounds.contains(p, 0.0) {
            return Err(PlanError::OutOfBounds(name));
        }
    }
    let dir = hit_dir.into_inner();
    let approach = half_path(start, stop, hit, &dir, bounds, true)?;
    let recover = half_path(start, stop, hit, &dir, bounds, false)?;
    Ok(HitPlan {
        hit_point: *hit,
        hit_dir: *hit_dir,
        hit_speed,
        segments: [
            Segment::from_pieces(approach, 0.0, hit_speed)?,
            Segment::from_pieces(recover, hit_speed, 0.0)?,
        ],
    })
}

/// Straight point-to-point move at rest on both ends: accelerate to
/// `v_peak` at the midpoint, then decelerate. Used for repositioning
/// motions that do not strike the puck.
pub fn plan_straight_move(
    start: &Vector2<f64>,
    target: &Vector2<f64>,
    v_peak: f64,
) -> Result<HitPlan, PlanError> {
    let d = target - start;
    let len = d.norm();
    if len < GEOM_EPS {
        return Err(PlanError::DegenerateGeometry("move of zero length"));
    }
    let dir = Unit::new_normalize(d);
    let mid = start + 0.5 * len * dir.into_inner();
    let first = vec![Piece::Line {
        start: *start,
        dir,
        len: 0.5 * len,
    }];
    let second = vec![Piece::Line {
        start: mid,
        dir,
        len: 0.5 * len,
    }];
    Ok(HitPlan {
        hit_point: mid,
        hit_dir: dir,
        hit_speed: v_peak,
        segments: [
            Segment::from_pieces(first, 0.0, v_peak)?,
            Segment::from_pieces(second, v_peak, 0.0)?,
        ],
    })
}
