//! Planar poses, direction vectors, and the trunk-centered offset transform
//! used to place approach waypoints beside a row.
//!
//! Everything here works in the ground plane: positions are world-frame
//! meters, headings are a single yaw angle kept in `(-PI, PI]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Errors from geometric contract violations.
#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// A direction that must be unit length deviated from norm 1.
    #[error("direction ({dx}, {dy}) is not unit length (norm {norm})")]
    NonUnitDirection { dx: f64, dy: f64, norm: f64 },
    /// A lateral offset distance must be strictly positive.
    #[error("offset distance must be > 0, got {0}")]
    InvalidOffset(f64),
    /// Coordinates must be finite.
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Normalize an angle into `(-PI, PI]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// A world-frame position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Displacement from `self` to `other`.
    pub fn to(&self, other: Point2) -> Vec2 {
        Vec2::new(other.x - self.x, other.y - self.y)
    }

    pub fn offset(&self, v: Vec2) -> Point2 {
        Point2::new(self.x + v.dx, self.y + v.dy)
    }
}

/// A displacement or direction in the ground plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub dx: f64,
    pub dy: f64,
}

impl Vec2 {
    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    /// Unit vector at the given angle. Norm is within 1e-12 of 1.
    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Scale to unit length. Returns an error for zero or non-finite input.
    pub fn normalized(&self) -> Result<Vec2, GeometryError> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(GeometryError::NonFinite);
        }
        Ok(Vec2::new(self.dx / n, self.dy / n))
    }

    pub fn dot(&self, other: Vec2) -> f64 {
        self.dx * other.dx + self.dy * other.dy
    }

    /// Z component of the 3D cross product; positive when `other` lies to
    /// the left of `self`.
    pub fn cross(&self, other: Vec2) -> f64 {
        self.dx * other.dy - self.dy * other.dx
    }

    pub fn scaled(&self, s: f64) -> Vec2 {
        Vec2::new(self.dx * s, self.dy * s)
    }

    /// Counterclockwise perpendicular (rotation by +90 degrees).
    pub fn perp(&self) -> Vec2 {
        Vec2::new(-self.dy, self.dx)
    }

    /// Rotate by `theta` radians counterclockwise.
    pub fn rotated(&self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.dx - s * self.dy, s * self.dx + c * self.dy)
    }

    pub fn angle(&self) -> f64 {
        normalize_angle(self.dy.atan2(self.dx))
    }
}

/// Planar pose: world-frame position plus heading.
///
/// The constructor normalizes yaw into `(-PI, PI]`; every operation that
/// produces a pose goes through it, so the invariant holds everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.yaw)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

impl Default for Pose2D {
    fn default() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// Which perpendicular half-plane of a row line a waypoint is placed in.
///
/// `Left` is +90 degrees from the row direction, `Right` is -90.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

const UNIT_NORM_TOL: f64 = 1e-9;

/// Build the trunk-centered frame: origin at the trunk, x axis along the row.
///
/// `row_dir` must be unit length (norm within 1e-9 of 1).
pub fn trunk_frame(trunk: Point2, row_dir: Vec2) -> Result<Pose2D, GeometryError> {
    if !trunk.is_finite() || !row_dir.dx.is_finite() || !row_dir.dy.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let norm = row_dir.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(GeometryError::NonUnitDirection {
            dx: row_dir.dx,
            dy: row_dir.dy,
            norm,
        });
    }
    Ok(Pose2D::new(trunk.x, trunk.y, row_dir.dy.atan2(row_dir.dx)))
}

/// Place a waypoint at perpendicular distance `d` from the frame origin.
///
/// The returned pose keeps the frame's yaw: the robot stands abeam of the
/// trunk, facing along the row. `side` picks the half-plane.
pub fn offset_waypoint(frame: Pose2D, d: f64, side: Side) -> Result<Pose2D, GeometryError> {
    if !d.is_finite() || d <= 0.0 {
        return Err(GeometryError::InvalidOffset(d));
    }
    let lateral = match side {
        Side::Left => Vec2::from_angle(frame.yaw).perp(),
        Side::Right => Vec2::from_angle(frame.yaw).perp().scaled(-1.0),
    };
    let p = frame.position().offset(lateral.scaled(d));
    Ok(Pose2D::new(p.x, p.y, frame.yaw))
}

/// Euclidean distance between two positions.
pub fn distance(a: Point2, b: Point2) -> f64 {
    a.to(b).norm()
}
