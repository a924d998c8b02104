//! Joint attention over `[text, target, reference]` token segments, with
//! rotary re-encoding of displaced reference keys and the overlap-aware
//! reference mask.

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::field::VectorField;
use crate::inject::FeatureGrid;
use crate::lrm::source_cell;
use crate::mask::BinaryMask;
use crate::rope::RopeTable;
use crate::types::Point2;

/// Additive bias standing in for −∞ on excluded keys.
pub const MASKED_BIAS: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Text,
    Target,
    Reference,
}

/// A run of tokens of one kind, `dim` features each, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    kind: SegmentKind,
    dim: usize,
    grid: Option<(usize, usize)>,
    data: Vec<f64>,
    positions: Vec<Option<Point2>>,
}

impl Segment {
    /// Text tokens carry no grid position.
    pub fn text(len: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        check_len(data.len(), len * dim, "text segment")?;
        Ok(Self { kind: SegmentKind::Text, dim, grid: None, data, positions: vec![None; len] })
    }

    /// Image tokens laid out row-major on a `width x height` grid; token
    /// `y * width + x` sits at position `(x, y)`.
    pub fn image(kind: SegmentKind, width: usize, height: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if kind == SegmentKind::Text {
            return Err(DragError::InvalidConfig("image segment cannot be text".into()));
        }
        check_len(data.len(), width * height * dim, "image segment")?;
        let positions = (0..height)
            .flat_map(|y| (0..width).map(move |x| Some(Point2::new(x as f64, y as f64))))
            .collect();
        Ok(Self { kind, dim, grid: Some((width, height)), data, positions })
    }

    pub fn from_grid(kind: SegmentKind, grid: FeatureGrid) -> Result<Self> {
        let (w, h, d) = (grid.width(), grid.height(), grid.dim());
        Self::image(kind, w, h, d, grid.into_values())
    }

    /// Overrides token positions, e.g. for relative-position checks.
    pub fn with_positions(mut self, positions: Vec<Option<Point2>>) -> Result<Self> {
        check_len(positions.len(), self.len(), "positions")?;
        self.positions = positions;
        Ok(self)
    }

    pub fn kind(&self) -> SegmentKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn positions(&self) -> &[Option<Point2>] {
        &self.positions
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn token_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_grid(&self) -> Result<FeatureGrid> {
        let (w, h) = self
            .grid
            .ok_or_else(|| DragError::shape("text segment has no grid"))?;
        FeatureGrid::from_values(w, h, self.dim, self.data.clone())
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(DragError::shape(format!("{what}: expected {want} values, got {got}")));
    }
    Ok(())
}

/// Concatenated `[TXT, TGT, REF]` sequence with a multi-head layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTensor {
    n_heads: usize,
    d_head: usize,
    txt: Segment,
    tgt: Segment,
    reference: Segment,
}

impl TokenTensor {
    pub fn new(n_heads: usize, d_head: usize, txt: Segment, tgt: Segment, reference: Segment) -> Result<Self> {
        if d_head == 0 || !d_head.is_multiple_of(4) {
            return Err(DragError::InvalidConfig(format!(
                "d_head must be a positive multiple of 4, got {d_head}"
            )));
        }
        let d = n_heads * d_head;
        for (seg, kind) in [
            (&txt, SegmentKind::Text),
            (&tgt, SegmentKind::Target),
            (&reference, SegmentKind::Reference),
        ] {
            if seg.kind != kind {
                return Err(DragError::shape(format!("expected {kind:?} segment, got {:?}", seg.kind)));
            }
            if seg.dim != d {
                return Err(DragError::shape(format!(
                    "{kind:?} segment has dim {}, layout needs {d}",
                    seg.dim
                )));
            }
        }
        if tgt.grid != reference.grid {
            return Err(DragError::shape("target and reference grids differ"));
        }
        Ok(Self { n_heads, d_head, txt, tgt, reference })
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn d_head(&self) -> usize {
        self.d_head
    }

    pub fn dim(&self) -> usize {
        self.n_heads * self.d_head
    }

    pub fn txt(&self) -> &Segment {
        &self.txt
    }

    pub fn tgt(&self) -> &Segment {
        &self.tgt
    }

    pub fn reference(&self) -> &Segment {
        &self.reference
    }

    pub fn segments(&self) -> [&Segment; 3] {
        [&self.txt, &self.tgt, &self.reference]
    }

    pub fn len(&self) -> usize {
        self.txt.len() + self.tgt.len() + self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Token `i` of the concatenated sequence.
    pub fn token(&self, mut i: usize) -> &[f64] {
        for seg in self.segments() {
            if i < seg.len() {
                return seg.token(i);
            }
            i -= seg.len();
        }
        panic!("token index out of range");
    }

    pub fn with_reference(mut self, reference: Segment) -> Result<Self> {
        if reference.kind != SegmentKind::Reference
            || reference.dim != self.dim()
            || reference.grid != self.reference.grid
        {
            return Err(DragError::shape("replacement reference segment does not match"));
        }
        self.reference = reference;
        Ok(self)
    }

    pub fn with_tgt(mut self, tgt: Segment) -> Result<Self> {
        if tgt.kind != SegmentKind::Target || tgt.dim != self.dim() || tgt.grid != self.tgt.grid {
            return Err(DragError::shape("replacement target segment does not match"));
        }
        self.tgt = tgt;
        Ok(self)
    }

    fn is_finite(&self) -> bool {
        self.segments().iter().all(|s| s.is_finite())
    }
}

/// Rotates every token of an image segment by the phases of its own position.
pub fn apply_rope(segment: &Segment, table: &RopeTable) -> Result<Segment> {
    if !segment.dim.is_multiple_of(table.d_head()) {
        return Err(DragError::shape(format!(
            "segment dim {} not a multiple of d_head {}",
            segment.dim,
            table.d_head()
        )));
    }
    let mut out = segment.clone();
    for i in 0..segment.len() {
        let pos = segment.positions[i].ok_or(DragError::MissingPosition(i))?;
        table.rotate_token(out.token_mut(i), &table.phases(pos));
    }
    Ok(out)
}

/// Like [`apply_rope`], but tokens without a position keep identity phases.
pub fn apply_rope_or_identity(segment: &Segment, table: &RopeTable) -> Result<Segment> {
    if segment.positions.iter().all(Option::is_none) {
        return Ok(segment.clone());
    }
    apply_rope(segment, table)
}

/// Rotary-encodes pre-RoPE reference keys so that content moved by the drag
/// carries its destination position.
///
/// For each destination cell `q` of `mask_dst` (row-major), the key at the
/// source slot `p = round(q + W(q))` is rotated with the phases of `q`.
/// When several `q` share one `p`, the first in row-major order wins. All
/// other keys get standard RoPE at their own positions.
pub fn re_encode_reference_keys(
    k0_ref: &Segment,
    field: &VectorField,
    mask_dst: &BinaryMask,
    table: &RopeTable,
) -> Result<Segment> {
    let (w, h) = k0_ref
        .grid
        .ok_or_else(|| DragError::shape("reference keys need a grid"))?;
    if field.dims() != (w, h) || mask_dst.dims() != (w, h) {
        return Err(DragError::shape(format!(
            "reference grid {w}x{h}, field {}x{}, mask {}x{}",
            field.width(),
            field.height(),
            mask_dst.width(),
            mask_dst.height()
        )));
    }
    let mut out = apply_rope(k0_ref, table)?;
    let mut claimed = vec![false; w * h];
    let full = BinaryMask::filled(w, h)?;
    for q in mask_dst.iter_set() {
        let qp = Point2::from(q);
        let Some(p) = source_cell(qp, field.get(q), &full) else {
            continue;
        };
        let slot = p.y * w + p.x;
        if claimed[slot] {
            continue;
        }
        claimed[slot] = true;
        let key = out.token_mut(slot);
        key.copy_from_slice(k0_ref.token(slot));
        table.rotate_token(key, &table.phases(qp));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    /// Keep reference cell `c` iff `(1 − M_DST(c))·M_SRC(c) = 1`.
    #[default]
    Verbatim,
    /// Exclude only reference cells in `M_DST` but outside `M_SRC`.
    KeepBackground,
}

/// Additive bias over the concatenated key sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMask {
    txt_len: usize,
    tgt_len: usize,
    bias: Vec<f64>,
}

impl AttentionMask {
    /// No exclusions.
    pub fn zeros(txt_len: usize, tgt_len: usize, ref_len: usize) -> Self {
        Self { txt_len, tgt_len, bias: vec![0.0; txt_len + tgt_len + ref_len] }
    }

    pub fn len(&self) -> usize {
        self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bias.is_empty()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn is_excluded(&self, key: usize) -> bool {
        self.bias[key] <= MASKED_BIAS
    }

    /// Keep flags of the reference part, row-major over the grid.
    pub fn reference_keep(&self) -> Vec<bool> {
        self.bias[self.txt_len + self.tgt_len..]
            .iter()
            .map(|&b| b > MASKED_BIAS)
            .collect()
    }

    pub fn excluded_count(&self) -> usize {
        (0..self.len()).filter(|&j| self.is_excluded(j)).count()
    }
}

/// Builds the overlap-aware mask. Text and target entries are always 0.
pub fn build_overlap_mask(
    mask_src: &BinaryMask,
    mask_dst: &BinaryMask,
    txt_len: usize,
    tgt_len: usize,
    policy: MaskPolicy,
) -> Result<AttentionMask> {
    if mask_src.dims() != mask_dst.dims() {
        return Err(DragError::shape("source and destination masks differ in size"));
    }
    if tgt_len != mask_src.len() {
        return Err(DragError::shape(format!(
            "target length {tgt_len} vs {} grid cells",
            mask_src.len()
        )));
    }
    let mut mask = AttentionMask::zeros(txt_len, tgt_len, mask_src.len());
    let offset = txt_len + tgt_len;
    for (i, (&src, &dst)) in mask_src.bits().iter().zip(mask_dst.bits()).enumerate() {
        let keep = match policy {
            MaskPolicy::Verbatim => !dst && src,
            MaskPolicy::KeepBackground => !(dst && !src),
        };
        if !keep {
            mask.bias[offset + i] = MASKED_BIAS;
        }
    }
    Ok(mask)
}

/// Diagnostics from one attention evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttentionStats {
    /// Largest softmax mass any query row placed on excluded keys, measured
    /// before exclusions are forced to zero.
    pub masked_mass: f64,
}

/// Multi-head softmax attention over the concatenated sequence with
/// `1/√d_head` scaling and the additive mask. All query rows are computed.
pub fn joint_attention(q: &TokenTensor, k: &TokenTensor, v: &TokenTensor, mask: &AttentionMask) -> Result<TokenTensor> {
    joint_attention_with_stats(q, k, v, mask).map(|(o, _)| o)
}

pub fn joint_attention_with_stats(
    q: &TokenTensor,
    k: &TokenTensor,
    v: &TokenTensor,
    mask: &AttentionMask,
) -> Result<(TokenTensor, AttentionStats)> {
    let (n_heads, d_head) = (q.n_heads, q.d_head);
    if (k.n_heads, k.d_head) != (n_heads, d_head) || (v.n_heads, v.d_head) != (n_heads, d_head) {
        return Err(DragError::shape("q/k/v head layouts differ"));
    }
    let n_keys = k.len();
    if v.len() != n_keys || mask.len() != n_keys {
        return Err(DragError::shape(format!(
            "{} keys, {} values, mask of {}",
            n_keys,
            v.len(),
            mask.len()
        )));
    }
    if !(q.is_finite() && k.is_finite() && v.is_finite()) {
        return Err(DragError::NonFiniteInput("attention inputs"));
    }

    let keys: Vec<&[f64]> = (0..n_keys).map(|j| k.token(j)).collect();
    let values: Vec<&[f64]> = (0..n_keys).map(|j| v.token(j)).collect();
    let excluded: Vec<bool> = (0..n_keys).map(|j| mask.is_excluded(j)).collect();
    let scale = 1.0 / (d_head as f64).sqrt();
    let d = n_heads * d_head;

    let mut stats = AttentionStats::default();
    let mut logits = vec![0.0; n_keys];
    let mut attend = |seg: &Segment| -> Segment {
        let mut out = seg.clone();
        for i in 0..seg.len() {
            let query = seg.token(i);
            let mut row_out = vec![0.0; d];
            for h in 0..n_heads {
                let hs = h * d_head..(h + 1) * d_head;
                let qh = &query[hs.clone()];
                for (j, key) in keys.iter().enumerate() {
                    let dot: f64 = qh.iter().zip(&key[hs.clone()]).map(|(a, b)| a * b).sum();
                    logits[j] = dot * scale + mask.bias[j];
                }
                let masked = masked_softmax(&mut logits, &excluded);
                stats.masked_mass = stats.masked_mass.max(masked);
                let oh = &mut row_out[hs.clone()];
                for (j, &weight) in logits.iter().enumerate() {
                    if weight == 0.0 {
                        continue;
                    }
                    for (o, &vv) in oh.iter_mut().zip(&values[j][hs.clone()]) {
                        *o += weight * vv;
                    }
                }
            }
            out.token_mut(i).copy_from_slice(&row_out);
        }
        out
    };
    let txt = attend(&q.txt);
    let tgt = attend(&q.tgt);
    let reference = attend(&q.reference);
    let out = TokenTensor { n_heads, d_head, txt, tgt, reference };
    Ok((out, stats))
}

/// Post-softmax weights of one query row and head, excluded keys exactly 0.
pub fn attention_weights(
    q: &TokenTensor,
    k: &TokenTensor,
    mask: &AttentionMask,
    query: usize,
    head: usize,
) -> Result<Vec<f64>> {
    if mask.len() != k.len() || head >= q.n_heads || query >= q.len() {
        return Err(DragError::shape("attention weight request out of range"));
    }
    let hs = head * q.d_head..(head + 1) * q.d_head;
    let scale = 1.0 / (q.d_head as f64).sqrt();
    let qh = &q.token(query)[hs.clone()];
    let logits: Vec<f64> = (0..k.len())
        .map(|j| {
            let dot: f64 = qh.iter().zip(&k.token(j)[hs.clone()]).map(|(a, b)| a * b).sum();
            dot * scale + mask.bias[j]
        })
        .collect();
    let mut w = logits;
    let excluded: Vec<bool> = (0..k.len()).map(|j| mask.is_excluded(j)).collect();
    masked_softmax(&mut w, &excluded);
    Ok(w)
}

/// In-place softmax of biased logits. Weights on excluded entries are then
/// forced to exactly 0 and the kept weights renormalized; a row with no kept
/// entries becomes all zeros. Returns the mass the plain softmax placed on
/// excluded entries.
pub fn masked_softmax(logits: &mut [f64], excluded: &[bool]) -> f64 {
    debug_assert_eq!(logits.len(), excluded.len());
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut masked = 0.0;
    for (l, &ex) in logits.iter_mut().zip(excluded) {
        *l = (*l - max).exp();
        total += *l;
        if ex {
            masked += *l;
        }
    }
    let kept = total - masked;
    for (l, &ex) in logits.iter_mut().zip(excluded) {
        *l = if ex || kept <= 0.0 { 0.0 } else { *l / kept };
    }
    if total > 0.0 {
        masked / total
    } else {
        0.0
    }
}
