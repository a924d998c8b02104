//! Points, cells and control-point pairs on the token grid.

use serde::{Deserialize, Serialize};

/// A real-valued location in token-grid units. Cell `(x, y)` has its center
/// at exactly `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist_sq(&self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Rounds each coordinate half away from zero. Returns `None` when the
    /// rounded location is negative or not representable as a cell.
    pub fn round_to_cell(&self) -> Option<Cell> {
        let x = self.x.round();
        let y = self.y.round();
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return None;
        }
        if x > u32::MAX as f64 || y > u32::MAX as f64 {
            return None;
        }
        Some(Cell::new(x as usize, y as usize))
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl From<Cell> for Point2 {
    fn from(c: Cell) -> Self {
        Point2::new(c.x as f64, c.y as f64)
    }
}

/// Integer grid cell, column `x` and row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// One user control pair: handle (source) and target point.
///
/// A pair whose source equals its target is a zero-drag anchor; it pins the
/// surrounding content in place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragPair {
    pub source: Point2,
    pub target: Point2,
}

impl DragPair {
    pub const fn new(source: Point2, target: Point2) -> Self {
        Self { source, target }
    }

    /// `t - s`.
    pub fn drag(&self) -> Point2 {
        self.target - self.source
    }

    pub fn is_anchor(&self) -> bool {
        self.source == self.target
    }
}
