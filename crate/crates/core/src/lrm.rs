//! Latent-space reverse mapping: forward coarse target region, reverse IDW
//! lookup and validation against the source mask.

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::field::{Correspondence, VectorField};
use crate::hull::{convex_hull, rasterize_hull};
use crate::idw::{forward_unchecked, reverse_unchecked, validate_drag_pairs, HullMode, LrmConfig};
use crate::mask::BinaryMask;
use crate::types::{Cell, DragPair, Point2};

/// Destination region with its inverse field and correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseMap {
    pub mask_dst: BinaryMask,
    pub field: VectorField,
    pub corr: Correspondence,
}

impl ReverseMap {
    /// Whether each pair's target rounds to a cell inside the destination mask.
    pub fn reachability(&self, pairs: &[DragPair]) -> Vec<bool> {
        pairs
            .iter()
            .map(|p| p.target.round_to_cell().is_some_and(|c| self.mask_dst.get(c)))
            .collect()
    }
}

/// Coarse post-drag region: displace every source cell center by `D(p)`,
/// take the convex hull of the displaced cloud, rasterize at cell centers,
/// then dilate.
///
/// Each displaced point's nearest cell is also kept, so hulls that collapse
/// to a point or a segment between cell centers still cover their points.
pub fn build_coarse_target(
    mask_src: &BinaryMask,
    pairs: &[DragPair],
    cfg: &LrmConfig,
) -> Result<BinaryMask> {
    if mask_src.is_empty() {
        return Err(DragError::EmptySourceRegion);
    }
    validate_drag_pairs(pairs, cfg)?;
    Ok(coarse_target_unchecked(mask_src, pairs, cfg))
}

fn coarse_target_unchecked(mask_src: &BinaryMask, pairs: &[DragPair], cfg: &LrmConfig) -> BinaryMask {
    let (w, h) = mask_src.dims();
    let groups = match cfg.hull_mode {
        HullMode::PerComponent => mask_src.components(),
        HullMode::Global => vec![mask_src.iter_set().collect()],
    };
    let mut coarse = BinaryMask::new(w, h).expect("source mask has positive dims");
    for group in groups {
        let cloud: Vec<Point2> = group
            .iter()
            .map(|&c| {
                let p = Point2::from(c);
                p + forward_unchecked(p, pairs, cfg)
            })
            .collect();
        for cell in rasterize_hull(&convex_hull(&cloud), w, h) {
            coarse.set(cell, true);
        }
        for p in &cloud {
            if let Some(c) = p.round_to_cell().filter(|&c| coarse.contains(c)) {
                coarse.set(c, true);
            }
        }
    }
    coarse.dilate(cfg.dilation_radius)
}

/// Maps every coarse-target cell back through `W(q)` and keeps the ones
/// whose rounded source cell lies inside the grid and inside `mask_src`.
pub fn reverse_map(mask_src: &BinaryMask, pairs: &[DragPair], cfg: &LrmConfig) -> Result<ReverseMap> {
    let coarse = build_coarse_target(mask_src, pairs, cfg)?;
    let (w, h) = mask_src.dims();
    let mut mask_dst = BinaryMask::new(w, h)?;
    let mut field = VectorField::zeros(w, h);
    let mut corr = Correspondence::empty(w, h);
    for q in coarse.iter_set() {
        let qp = Point2::from(q);
        let inv = reverse_unchecked(qp, pairs, cfg);
        let Some(src) = source_cell(qp, inv, mask_src) else {
            continue;
        };
        mask_dst.set(q, true);
        field.set(q, inv);
        corr.set(q, Some(src));
    }
    Ok(ReverseMap { mask_dst, field, corr })
}

/// `round(q + W(q))` when it lands on a set cell of `mask_src`.
pub fn source_cell(q: Point2, inv: Point2, mask_src: &BinaryMask) -> Option<Cell> {
    (q + inv).round_to_cell().filter(|&c| mask_src.get(c))
}
