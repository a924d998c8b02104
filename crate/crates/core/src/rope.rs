//! Two-dimensional axial rotary position embedding.
//!
//! Each head vector of width `d_head` is split into `d_head / 2` adjacent
//! pairs `(x[2i], x[2i+1])`. The first `d_head / 4` pairs rotate with the
//! row (y) coordinate and the remaining `d_head / 4` with the column (x)
//! coordinate. Within each axis, pair `j` uses frequency
//! `θⱼ = base^(−2j / (d_head / 2))`.

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::types::Point2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopeTable {
    base: f64,
    d_head: usize,
    inv_freq: Vec<f64>,
}

/// Per-pair `(cos, sin)` for one position.
#[derive(Debug, Clone, PartialEq)]
pub struct Phases(Vec<(f64, f64)>);

impl Phases {
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.0
    }
}

impl RopeTable {
    pub fn new(d_head: usize, base: f64) -> Result<Self> {
        if d_head == 0 || !d_head.is_multiple_of(4) {
            return Err(DragError::InvalidConfig(format!(
                "d_head must be a positive multiple of 4, got {d_head}"
            )));
        }
        if !(base > 0.0 && base.is_finite()) {
            return Err(DragError::InvalidConfig(format!("rope base must be > 0, got {base}")));
        }
        let half_pairs = d_head / 4;
        let rotary_dim = (d_head / 2) as f64;
        let inv_freq = (0..half_pairs)
            .map(|j| base.powf(-2.0 * j as f64 / rotary_dim))
            .collect();
        Ok(Self { base, d_head, inv_freq })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn d_head(&self) -> usize {
        self.d_head
    }

    /// Frequencies of one axial half.
    pub fn frequencies(&self) -> &[f64] {
        &self.inv_freq
    }

    pub fn phases(&self, pos: Point2) -> Phases {
        let axis = |coord: f64| {
            self.inv_freq.iter().map(move |&f| {
                let a = coord * f;
                (a.cos(), a.sin())
            })
        };
        Phases(axis(pos.y).chain(axis(pos.x)).collect())
    }

    /// Rotates one head vector in place.
    pub fn rotate_head(&self, head: &mut [f64], phases: &Phases) {
        debug_assert_eq!(head.len(), self.d_head);
        for (pair, &(c, s)) in head.chunks_exact_mut(2).zip(&phases.0) {
            let (a, b) = (pair[0], pair[1]);
            pair[0] = a * c - b * s;
            pair[1] = a * s + b * c;
        }
    }

    /// Rotates every head of a `n_heads * d_head` token vector in place.
    pub fn rotate_token(&self, token: &mut [f64], phases: &Phases) {
        for head in token.chunks_exact_mut(self.d_head) {
            self.rotate_head(head, phases);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_head_width() {
        assert!(RopeTable::new(6, 10000.0).is_err());
        assert!(RopeTable::new(0, 10000.0).is_err());
        assert!(RopeTable::new(8, -1.0).is_err());
    }

    #[test]
    fn frequencies_follow_base_power() {
        let t = RopeTable::new(16, 10000.0).unwrap();
        let f = t.frequencies();
        assert_eq!(f.len(), 4);
        assert_eq!(f[0], 1.0);
        assert!((f[1] - 10000f64.powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn origin_is_identity() {
        let t = RopeTable::new(8, 10000.0).unwrap();
        let mut v = [0.3, -1.2, 2.0, 0.5, -0.7, 0.1, 4.0, -3.0];
        let orig = v;
        t.rotate_head(&mut v, &t.phases(Point2::ZERO));
        assert_eq!(v, orig);
    }

    #[test]
    fn closed_form_rotation() {
        // d_head = 4: pair 0 follows y, pair 1 follows x, θ₀ = 1.
        let t = RopeTable::new(4, 10000.0).unwrap();
        let mut v = [1.0, 0.0, 1.0, 0.0];
        t.rotate_head(&mut v, &t.phases(Point2::new(0.0, 1.0)));
        assert!((v[0] - 1f64.cos()).abs() < 1e-15 && (v[1] - 1f64.sin()).abs() < 1e-15);
        assert_eq!((v[2], v[3]), (1.0, 0.0));
        assert!((v[0] - 0.5403).abs() < 1e-4 && (v[1] - 0.8415).abs() < 1e-4);
    }
}
