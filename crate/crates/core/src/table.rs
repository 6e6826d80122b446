//! Table geometry shared by the planner, the simulator and the tactics.
//!
//! World frame convention: origin at the table center, `x` along the long
//! side, `y` along the short side, `z` up. The mallet plane is `z = 0`.
//! The *home* agent defends the goal at `x = -length/2`, the *away* agent
//! the goal at `x = +length/2`.

use nalgebra::Vector2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("table dimension must be positive, got {0}")]
    NonPositiveDimension(f64),
    #[error("goal width {goal} must be smaller than the table width {width}")]
    GoalTooWide { goal: f64, width: f64 },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("margin shrinks the playing field to an empty region")]
    EmptyRegion,
}

/// Which short side an agent defends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Defends the goal at `x = -length/2`.
    Home,
    /// Defends the goal at `x = +length/2`.
    Away,
}

impl Side {
    /// Sign of the defended goal's `x` coordinate.
    pub fn sign(self) -> f64 {
        match self {
            Side::Home => -1.0,
            Side::Away => 1.0,
        }
    }

    pub fn opponent(self) -> Side {
        match self {
            Side::Home => Side::Away,
            Side::Away => Side::Home,
        }
    }
}

/// Axis-aligned rectangle, used for table surfaces and tightened boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl Rect {
    pub fn new(min: Vector2<f64>, max: Vector2<f64>) -> Rect {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: &Vector2<f64>, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    /// Clamp a point into the rectangle.
    pub fn clamp(&self, p: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    /// Shrink the rectangle by `margin` on every side.
    pub fn shrunk(&self, margin: f64) -> Result<Rect, TableError> {
        let r = Rect::new(
            Vector2::new(self.min.x + margin, self.min.y + margin),
            Vector2::new(self.max.x - margin, self.max.y - margin),
        );
        if r.min.x >= r.max.x || r.min.y >= r.max.y {
            Err(TableError::EmptyRegion)
        } else {
            Ok(r)
        }
    }
}

/// Dimensions of the playing field and the two disc bodies that live on it.
///
/// All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableGeometry {
    /// Long dimension (along `x`).
    pub length: f64,
    /// Short dimension (along `y`).
    pub width: f64,
    /// Opening of each goal, centered on `y = 0` at the short sides.
    pub goal_width: f64,
    pub puck_radius: f64,
    pub mallet_radius: f64,
}

impl TableGeometry {
    pub fn new(
        length: f64,
        width: f64,
        goal_width: f64,
        puck_radius: f64,
        mallet_radius: f64,
    ) -> Result<TableGeometry, TableError> {
        for d in [length, width] {
            if !(d > 0.0) {
                return Err(TableError::NonPositiveDimension(d));
            }
        }
        if !(goal_width > 0.0) || goal_width >= width {
            return Err(TableError::GoalTooWide {
                goal: goal_width,
                width,
            });
        }
        for r in [puck_radius, mallet_radius] {
            if !(r > 0.0) {
                return Err(TableError::NonPositiveRadius(r));
            }
        }
        Ok(TableGeometry {
            length,
            width,
            goal_width,
            puck_radius,
            mallet_radius,
        })
    }

    /// Full playing surface.
    pub fn surface(&self) -> Rect {
        Rect::new(
            Vector2::new(-0.5 * self.length, -0.5 * self.width),
            Vector2::new(0.5 * self.length, 0.5 * self.width),
        )
    }

    /// Rectangle the *puck center* can occupy while the puck stays on the
    /// table: the surface shrunk by the puck radius.
    pub fn puck_field(&self) -> Rect {
        // Cannot be empty for any valid geometry used here; fall back to the
        // surface for degenerate radii.
        self.surface()
            .shrunk(self.puck_radius)
            .unwrap_or_else(|_| self.surface())
    }

    /// True if a puck centered at `p` is inside the goal mouth of `side`
    /// (beyond the rim line at that short side).
    pub fn in_goal(&self, p: &Vector2<f64>, side: Side) -> bool {
        let past_line = p.x * side.sign() >= 0.5 * self.length;
        past_line && p.y.abs() <= 0.5 * self.goal_width
    }

    /// `x` coordinate of the goal line on `side`.
    pub fn goal_line(&self, side: Side) -> f64 {
        side.sign() * 0.5 * self.length
    }

    /// True if `p` lies in the half of the table owned by `side`.
    pub fn in_half(&self, p: &Vector2<f64>, side: Side) -> bool {
        p.x * side.sign() > 0.0
    }
}

impl Default for TableGeometry {
    /// The default rink: 2.16 m x 1.22 m surface, 0.25 m goals, a 63.3 mm
    /// puck and a 96 mm mallet.
    fn default() -> TableGeometry {
        TableGeometry {
            length: 2.16,
            width: 1.22,
            goal_width: 0.25,
            puck_radius: 0.03165,
            mallet_radius: 0.048,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid() {
        let t = TableGeometry::default();
        TableGeometry::new(
            t.length,
            t.width,
            t.goal_width,
            t.puck_radius,
            t.mallet_radius,
        )
        .expect("default geometry must validate");
    }

    #[test]
    fn shrunk_by_zero_is_identity() {
        let t = TableGeometry::default();
        assert_eq!(t.surface().shrunk(0.0).unwrap(), t.surface());
    }

    #[test]
    fn oversized_margin_is_rejected() {
        let t = TableGeometry::default();
        assert_eq!(t.surface().shrunk(0.7), Err(TableError::EmptyRegion));
    }

    #[test]
    fn goal_membership_respects_mouth_width() {
        let t = TableGeometry::default();
        assert!(t.in_goal(&Vector2::new(-1.09, 0.0), Side::Home));
        assert!(!t.in_goal(&Vector2::new(-1.09, 0.4), Side::Home));
        assert!(!t.in_goal(&Vector2::new(1.09, 0.0), Side::Home));
        assert!(t.in_goal(&Vector2::new(1.09, 0.1), Side::Away));
    }

    #[test]
    fn halves_are_split_at_the_center_line() {
        let t = TableGeometry::default();
        assert!(t.in_half(&Vector2::new(-0.3, 0.0), Side::Home));
        assert!(!t.in_half(&Vector2::new(0.3, 0.0), Side::Home));
        assert!(t.in_half(&Vector2::new(0.3, 0.0), Side::Away));
    }
}
