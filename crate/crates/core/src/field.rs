//! Per-cell displacement vectors and destination-to-source correspondences.

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::mask::BinaryMask;
use crate::types::{Cell, Point2};

/// Row-major grid of 2-vectors in token units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    width: usize,
    height: usize,
    vectors: Vec<Point2>,
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, vectors: vec![Point2::ZERO; width * height] }
    }

    pub fn from_vectors(width: usize, height: usize, vectors: Vec<Point2>) -> Result<Self> {
        if vectors.len() != width * height {
            return Err(DragError::shape(format!(
                "{} vectors for a {width}x{height} field",
                vectors.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(DragError::NonFiniteInput("vector field"));
        }
        Ok(Self { width, height, vectors })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, c: Cell) -> Point2 {
        self.vectors[c.y * self.width + c.x]
    }

    pub fn set(&mut self, c: Cell, v: Point2) {
        self.vectors[c.y * self.width + c.x] = v;
    }

    pub fn vectors(&self) -> &[Point2] {
        &self.vectors
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| v.dist_sq(Point2::ZERO).sqrt())
            .fold(0.0, f64::max)
    }
}

/// For each destination cell, the source cell it samples from (if any).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Correspondence {
    width: usize,
    height: usize,
    entries: Vec<Option<Cell>>,
}

impl Correspondence {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, entries: vec![None; width * height] }
    }

    /// Every set cell of `mask` maps onto itself.
    pub fn identity(mask: &BinaryMask) -> Self {
        let (w, h) = mask.dims();
        let mut c = Self::empty(w, h);
        for cell in mask.iter_set() {
            c.set(cell, Some(cell));
        }
        c
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, dst: Cell) -> Option<Cell> {
        self.entries[dst.y * self.width + dst.x]
    }

    /// Panics if either cell lies outside the grid.
    pub fn set(&mut self, dst: Cell, src: Option<Cell>) {
        assert!(dst.x < self.width && dst.y < self.height, "destination outside grid");
        if let Some(s) = src {
            assert!(s.x < self.width && s.y < self.height, "source outside grid");
        }
        self.entries[dst.y * self.width + dst.x] = src;
    }

    pub fn entries(&self) -> &[Option<Cell>] {
        &self.entries
    }

    /// `(destination, source)` pairs in row-major destination order.
    pub fn iter(&self) -> impl Iterator<Item = (Cell, Cell)> + '_ {
        self.entries.iter().enumerate().filter_map(|(i, e)| {
            e.map(|src| (Cell::new(i % self.width, i / self.width), src))
        })
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The set of destination cells that carry an entry.
    pub fn domain(&self) -> BinaryMask {
        let bits = self.entries.iter().map(Option::is_some).collect();
        BinaryMask::from_bits(self.width, self.height, bits)
            .expect("correspondence dimensions are positive")
    }
}
