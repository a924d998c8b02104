//! Inverse-distance-weighted drag displacement.
//!
//! Forward: `D(p) = Σ wᵢ(p)·dᵢ / (Σ wᵢ(p) + ε)`, `wᵢ(p) = ‖p − sᵢ‖⁻²`.
//! Reverse: the same over targets with `−dᵢ`, `wᵢ(q) = ‖q − tᵢ‖⁻²`.
//!
//! At a control point the weight diverges; the control point's own vector is
//! returned instead (first matching pair wins).

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::types::{DragPair, Point2};

/// How the coarse target hull is formed from the displaced source cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullMode {
    /// One hull per 4-connected component of the source mask.
    #[default]
    PerComponent,
    /// A single hull over every displaced cell.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrmConfig {
    pub epsilon: f64,
    pub dilation_radius: usize,
    pub exact_hit_tolerance: f64,
    pub hull_mode: HullMode,
}

impl Default for LrmConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            dilation_radius: 1,
            exact_hit_tolerance: 1e-9,
            hull_mode: HullMode::PerComponent,
        }
    }
}

impl LrmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(DragError::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.exact_hit_tolerance >= 0.0 && self.exact_hit_tolerance.is_finite()) {
            return Err(DragError::InvalidConfig(format!(
                "exact_hit_tolerance must be >= 0, got {}",
                self.exact_hit_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Anchor {
    Source,
    Target,
}

impl Anchor {
    fn point(self, pair: &DragPair) -> Point2 {
        match self {
            Anchor::Source => pair.source,
            Anchor::Target => pair.target,
        }
    }
}

/// Checks pairs for finiteness and for coincident anchors with different drags.
fn validate_pairs(pairs: &[DragPair], cfg: &LrmConfig, anchor: Anchor) -> Result<()> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(DragError::InvalidConfig("at least one control pair is required".into()));
    }
    if pairs.iter().any(|p| !p.source.is_finite() || !p.target.is_finite()) {
        return Err(DragError::NonFiniteInput("control points"));
    }
    let tol_sq = cfg.exact_hit_tolerance * cfg.exact_hit_tolerance;
    for (i, a) in pairs.iter().enumerate() {
        for (j, b) in pairs.iter().enumerate().skip(i + 1) {
            if anchor.point(a).dist_sq(anchor.point(b)) <= tol_sq && a.drag() != b.drag() {
                return Err(DragError::ConflictingControlPoints { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// Validates `pairs` for both forward (sources) and reverse (targets) use.
pub fn validate_drag_pairs(pairs: &[DragPair], cfg: &LrmConfig) -> Result<()> {
    validate_pairs(pairs, cfg, Anchor::Source)?;
    validate_pairs(pairs, cfg, Anchor::Target)
}

fn weighted(p: Point2, pairs: &[DragPair], cfg: &LrmConfig, anchor: Anchor, sign: f64) -> Point2 {
    let tol_sq = cfg.exact_hit_tolerance * cfg.exact_hit_tolerance;
    let mut num = Point2::ZERO;
    let mut den = 0.0;
    for pair in pairs {
        let r2 = p.dist_sq(anchor.point(pair));
        let d = pair.drag();
        if r2 <= tol_sq {
            return normalize_zero(Point2::new(sign * d.x, sign * d.y));
        }
        let w = 1.0 / r2;
        num.x += w * sign * d.x;
        num.y += w * sign * d.y;
        den += w;
    }
    let den = den + cfg.epsilon;
    normalize_zero(Point2::new(num.x / den, num.y / den))
}

// -0.0 → 0.0 so serialized fields never print "-0".
fn normalize_zero(v: Point2) -> Point2 {
    Point2::new(v.x + 0.0, v.y + 0.0)
}

pub(crate) fn forward_unchecked(p: Point2, pairs: &[DragPair], cfg: &LrmConfig) -> Point2 {
    weighted(p, pairs, cfg, Anchor::Source, 1.0)
}

pub(crate) fn reverse_unchecked(q: Point2, pairs: &[DragPair], cfg: &LrmConfig) -> Point2 {
    weighted(q, pairs, cfg, Anchor::Target, -1.0)
}

/// Provisional drag vector `D(p)` interpolated from the source control points.
pub fn forward_displacement(p: Point2, pairs: &[DragPair], cfg: &LrmConfig) -> Result<Point2> {
    if !p.is_finite() {
        return Err(DragError::NonFiniteInput("query point"));
    }
    validate_pairs(pairs, cfg, Anchor::Source)?;
    Ok(forward_unchecked(p, pairs, cfg))
}

/// Inverse displacement `W(q)` interpolated from the target control points.
pub fn reverse_displacement(q: Point2, pairs: &[DragPair], cfg: &LrmConfig) -> Result<Point2> {
    if !q.is_finite() {
        return Err(DragError::NonFiniteInput("query point"));
    }
    validate_pairs(pairs, cfg, Anchor::Target)?;
    Ok(reverse_unchecked(q, pairs, cfg))
}
