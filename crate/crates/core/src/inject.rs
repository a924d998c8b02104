//! Reference token injection: direct-indexed warping of reference attention
//! outputs and masked blending into the target outputs under a step schedule.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::field::Correspondence;
use crate::mask::BinaryMask;
use crate::types::Cell;

/// Row-major grid of `dim`-channel feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    width: usize,
    height: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(width: usize, height: usize, dim: usize) -> Self {
        Self { width, height, dim, values: vec![0.0; width * height * dim] }
    }

    pub fn from_values(width: usize, height: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height * dim {
            return Err(DragError::shape(format!(
                "{} values for a {width}x{height}x{dim} feature grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DragError::NonFiniteInput("feature grid"));
        }
        Ok(Self { width, height, dim, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, c: Cell) -> &[f64] {
        let i = (c.y * self.width + c.x) * self.dim;
        &self.values[i..i + self.dim]
    }

    pub fn cell_mut(&mut self, c: Cell) -> &mut [f64] {
        let i = (c.y * self.width + c.x) * self.dim;
        &mut self.values[i..i + self.dim]
    }

    fn same_shape(&self, other: &FeatureGrid) -> bool {
        self.width == other.width && self.height == other.height && self.dim == other.dim
    }
}

/// Blending coefficient per denoising step: held, cosine-decayed, then zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaSchedule {
    pub total_steps: usize,
    pub hold_until: usize,
    pub zero_from: usize,
    pub lambda_init: f64,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self { total_steps: 30, hold_until: 10, zero_from: 20, lambda_init: 0.5 }
    }
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.hold_until <= self.zero_from && self.zero_from <= self.total_steps) {
            return Err(DragError::InvalidConfig(format!(
                "schedule requires hold_until <= zero_from <= total_steps, got {} / {} / {}",
                self.hold_until, self.zero_from, self.total_steps
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda_init) {
            return Err(DragError::InvalidLambda(self.lambda_init));
        }
        Ok(())
    }

    /// λ for every step in order.
    pub fn values(&self) -> Result<Vec<f64>> {
        (0..self.total_steps).map(|t| lambda_at(self, t)).collect()
    }
}

/// `λ(t)`: `lambda_init` before `hold_until`, zero from `zero_from` on, and
/// `lambda_init · ½(1 + cos(π (t − hold_until) / (zero_from − hold_until)))`
/// in between.
pub fn lambda_at(schedule: &LambdaSchedule, step: usize) -> Result<f64> {
    schedule.validate()?;
    if step >= schedule.total_steps {
        return Err(DragError::InvalidStep { step, total: schedule.total_steps });
    }
    let s = schedule;
    if step < s.hold_until {
        Ok(s.lambda_init)
    } else if step >= s.zero_from {
        Ok(0.0)
    } else {
        let span = (s.zero_from - s.hold_until) as f64;
        let phase = (step - s.hold_until) as f64 / span;
        Ok(s.lambda_init * 0.5 * (1.0 + (PI * phase).cos()))
    }
}

/// Schedule plus the set of blocks that receive injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    pub enabled: bool,
    pub schedule: LambdaSchedule,
    pub block_subset: BTreeSet<usize>,
}

impl InjectionConfig {
    /// Injection into the second half of `num_blocks` blocks.
    pub fn later_half(num_blocks: usize) -> Self {
        Self {
            enabled: true,
            schedule: LambdaSchedule::default(),
            block_subset: (num_blocks / 2..num_blocks).collect(),
        }
    }

    pub fn validate(&self, num_blocks: usize) -> Result<()> {
        self.schedule.validate()?;
        if let Some(&b) = self.block_subset.iter().find(|&&b| b >= num_blocks) {
            return Err(DragError::InvalidConfig(format!(
                "injection block {b} outside [0, {num_blocks})"
            )));
        }
        Ok(())
    }

    /// Whether block `b` is injected. Always false when disabled.
    pub fn injects(&self, block: usize) -> bool {
        self.enabled && self.block_subset.contains(&block)
    }
}

/// Samples `o_ref` at each destination cell's source cell. Cells without a
/// correspondence get the zero vector. No interpolation.
pub fn warp_reference(o_ref: &FeatureGrid, corr: &Correspondence) -> Result<FeatureGrid> {
    if (o_ref.width, o_ref.height) != corr.dims() {
        return Err(DragError::shape(format!(
            "reference grid {}x{} vs correspondence {}x{}",
            o_ref.width,
            o_ref.height,
            corr.width(),
            corr.height()
        )));
    }
    let mut out = FeatureGrid::zeros(o_ref.width, o_ref.height, o_ref.dim);
    for (dst, src) in corr.iter() {
        out.cell_mut(dst).copy_from_slice(o_ref.cell(src));
    }
    Ok(out)
}

/// `Ô = O_tgt` outside `mask_dst`, `(1 − λ)·O_ref_warped + λ·O_tgt` inside.
pub fn blend(
    o_tgt: &FeatureGrid,
    o_ref_warped: &FeatureGrid,
    mask_dst: &BinaryMask,
    lambda: f64,
) -> Result<FeatureGrid> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(DragError::InvalidLambda(lambda));
    }
    if !o_tgt.same_shape(o_ref_warped) || (o_tgt.width, o_tgt.height) != mask_dst.dims() {
        return Err(DragError::shape(format!(
            "blend inputs {}x{}x{}, {}x{}x{}, mask {}x{}",
            o_tgt.width,
            o_tgt.height,
            o_tgt.dim,
            o_ref_warped.width,
            o_ref_warped.height,
            o_ref_warped.dim,
            mask_dst.width(),
            mask_dst.height()
        )));
    }
    let mut out = o_tgt.clone();
    for c in mask_dst.iter_set() {
        let r = o_ref_warped.cell(c);
        for (o, &rv) in out.cell_mut(c).iter_mut().zip(r) {
            *o = (1.0 - lambda) * rv + lambda * *o;
        }
    }
    Ok(out)
}
