//! Planar vector math and the square deployment room.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or displacement in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing along `angle` (radians, counter-clockwise from +x).
    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product; positive when `other` lies to the left.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Direction of the vector, `atan2(y, x)`.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("angle {theta} is not finite")));
    }
    Ok(wrap_angle(theta))
}

/// Infallible variant of [`normalize_angle`] for values already known to be finite.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = (theta + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if a >= PI {
        a -= two_pi;
    }
    if a < -PI {
        a = -PI;
    }
    a
}

/// Position plus heading. The heading is kept in `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Pose2 {
            position,
            heading: wrap_angle(heading),
        }
    }
}

/// One of the four room walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wall {
    West,
    East,
    South,
    North,
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::West, Wall::East, Wall::South, Wall::North];

    /// Unit normal pointing into the room.
    pub fn inward_normal(self) -> Vec2 {
        match self {
            Wall::West => Vec2::new(1.0, 0.0),
            Wall::East => Vec2::new(-1.0, 0.0),
            Wall::South => Vec2::new(0.0, 1.0),
            Wall::North => Vec2::new(0.0, -1.0),
        }
    }
}

impl fmt::Display for Wall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Wall::West => "west",
            Wall::East => "east",
            Wall::South => "south",
            Wall::North => "north",
        };
        f.write_str(s)
    }
}

/// Perpendicular distance from a point to one wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallDistance {
    pub wall: Wall,
    pub distance: f64,
    pub inward_normal: Vec2,
}

/// Axis-aligned square room `[0, side] × [0, side]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    side: f64,
}

impl Default for Room {
    fn default() -> Self {
        Room { side: 7.5 }
    }
}

impl Room {
    pub fn new(side: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::Domain(format!("room side must be positive, got {side}")));
        }
        Ok(Room { side })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn origin(&self) -> Vec2 {
        Vec2::ZERO
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.side / 2.0, self.side / 2.0)
    }

    /// Boundary-inclusive containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.side).contains(&p.x) && (0.0..=self.side).contains(&p.y)
    }

    /// Distances to the west, east, south and north walls, in that order.
    pub fn distance_to_walls(&self, p: Vec2) -> Result<[WallDistance; 4]> {
        if !p.is_finite() {
            return Err(Error::Domain(format!("point {p} is not finite")));
        }
        let d = self.raw_wall_distances(p);
        for (wall, dist) in Wall::ALL.iter().zip(d) {
            if dist <= 0.0 {
                return Err(Error::Domain(format!(
                    "point {p} is outside the {wall} wall of a {} m room",
                    self.side
                )));
            }
        }
        Ok(std::array::from_fn(|i| WallDistance {
            wall: Wall::ALL[i],
            distance: d[i],
            inward_normal: Wall::ALL[i].inward_normal(),
        }))
    }

    /// Signed wall distances without validation; negative means outside.
    pub(crate) fn raw_wall_distances(&self, p: Vec2) -> [f64; 4] {
        [p.x, self.side - p.x, p.y, self.side - p.y]
    }
}
