//! A deterministic toy joint-attention transformer that exercises the drag
//! mechanism across blocks and steps.
//!
//! Token features and projection weights come from a counter-based
//! SplitMix64 generator. Every step starts from the synthesized text and
//! reference states; the target state carries over from the previous step.
//! Within a step each block computes
//!
//! ```text
//! Q⁰, K⁰, V = H·W_q, H·W_k, H·W_v            (per block weights)
//! Q, K      = RoPE(Q⁰), RoPE(K⁰)             (text tokens unrotated)
//! K_REF     = re-encoded K⁰_REF              (re-encoding blocks)
//! O         = softmax(QKᵀ/√d_head + M_A)·V   (overlap mask in OAM blocks)
//! O_TGT     = blend(O_TGT, warp(O_REF), λ(t)) (injection blocks)
//! H'        = ½·(H + O)
//! ```

use serde::{Deserialize, Serialize};

use crate::attention::{
    apply_rope_or_identity, build_overlap_mask, joint_attention_with_stats, re_encode_reference_keys,
    AttentionMask, MaskPolicy, Segment, SegmentKind, TokenTensor,
};
use crate::error::{DragError, Result};
use crate::inject::{blend, lambda_at, warp_reference, FeatureGrid, InjectionConfig};
use crate::lrm::ReverseMap;
use crate::mask::BinaryMask;
use crate::rope::RopeTable;

/// SplitMix64 increment (golden ratio).
pub const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
/// Stream separation multiplier; stream 0 starts from the seed itself.
pub const STREAM_MULTIPLIER: u64 = 0xD1B5_4A32_D192_ED03;
/// Residual mixing weight: `H' = RESIDUAL_MIX·(H + O)`.
pub const RESIDUAL_MIX: f64 = 0.5;

/// Generator streams. Blocks use `BLOCK_STREAM_BASE + 3·b + {0, 1, 2}` for
/// the query, key and value projections.
pub const STREAM_TEXT: u64 = 0;
pub const STREAM_TARGET: u64 = 1;
pub const STREAM_REFERENCE: u64 = 2;
pub const BLOCK_STREAM_BASE: u64 = 16;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for stream `stream` of `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        Self::new(seed ^ stream.wrapping_mul(STREAM_MULTIPLIER))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(SPLITMIX_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Top 53 bits mapped to the open interval (−1, 1).
    pub fn next_signed(&mut self) -> f64 {
        let u = ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        2.0 * u - 1.0
    }

    pub fn fill(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_signed()).collect()
    }
}

/// Which blocks a mechanism is active in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockScope {
    All,
    InjectionBlocks,
    Off,
}

impl BlockScope {
    fn active(self, block: usize, injection: &InjectionConfig) -> bool {
        match self {
            BlockScope::All => true,
            BlockScope::InjectionBlocks => injection.injects(block),
            BlockScope::Off => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub n_heads: usize,
    pub d_head: usize,
    pub num_blocks: usize,
    pub txt_len: usize,
    pub seed: u64,
    pub injection: InjectionConfig,
    pub rope_base: f64,
    pub mask_policy: MaskPolicy,
    pub oam_scope: BlockScope,
    pub re_rope_scope: BlockScope,
    /// Recorded only; there is no sampler.
    pub guidance_scale: f64,
    /// Recorded only; there is no sampler.
    pub scheduler: String,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            grid_width: 16,
            grid_height: 16,
            n_heads: 2,
            d_head: 8,
            num_blocks: 8,
            txt_len: 4,
            seed: 0,
            injection: InjectionConfig::later_half(8),
            rope_base: 10000.0,
            mask_policy: MaskPolicy::Verbatim,
            oam_scope: BlockScope::All,
            re_rope_scope: BlockScope::InjectionBlocks,
            guidance_scale: 3.0,
            scheduler: "FlowMatchEulerDiscreteScheduler".into(),
        }
    }
}

impl HarnessConfig {
    pub fn d_model(&self) -> usize {
        self.n_heads * self.d_head
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_width == 0 || self.grid_height == 0 {
            return Err(DragError::InvalidConfig("grid must be non-empty".into()));
        }
        if self.n_heads == 0 || self.d_head == 0 || !self.d_head.is_multiple_of(4) {
            return Err(DragError::InvalidConfig(format!(
                "need n_heads > 0 and d_head a positive multiple of 4, got {} x {}",
                self.n_heads, self.d_head
            )));
        }
        if self.num_blocks == 0 {
            return Err(DragError::InvalidConfig("num_blocks must be > 0".into()));
        }
        self.injection.validate(self.num_blocks)
    }
}

struct BlockWeights {
    query: Vec<f64>,
    key: Vec<f64>,
    value: Vec<f64>,
}

/// Synthesized inputs of the first block.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTokens {
    pub hidden: TokenTensor,
    /// RoPE-encoded queries.
    pub q: TokenTensor,
    /// RoPE-encoded keys (standard positions for the reference segment).
    pub k: TokenTensor,
    pub v: TokenTensor,
    /// Reference keys before rotary encoding.
    pub k0_ref: Segment,
}

/// Drag outputs consumed by the harness.
#[derive(Debug, Clone, Copy)]
pub struct DragInputs<'a> {
    pub mask_src: &'a BinaryMask,
    pub map: &'a ReverseMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub step: usize,
    pub block: usize,
    pub lambda: f64,
    pub injected: bool,
    pub oam: bool,
    pub re_rope: bool,
    /// max |Ô − O| over cells inside the destination mask.
    pub blend_delta_inside: f64,
    /// max |Ô − O| over cells outside the destination mask.
    pub blend_delta_outside: f64,
    /// Largest per-row softmax mass on excluded keys.
    pub masked_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub grid_width: usize,
    pub grid_height: usize,
    pub num_blocks: usize,
    pub total_steps: usize,
    pub records: Vec<BlockRecord>,
    pub final_tgt: FeatureGrid,
}

/// Output of one block evaluation.
#[derive(Debug, Clone)]
pub struct BlockOutput {
    /// Attention output before injection.
    pub attention: TokenTensor,
    pub warped_reference: Option<FeatureGrid>,
    pub blended_tgt: FeatureGrid,
    pub record: BlockRecord,
    pub next_hidden: TokenTensor,
}

pub struct ToyModel {
    cfg: HarnessConfig,
    rope: RopeTable,
    weights: Vec<BlockWeights>,
    hidden0: TokenTensor,
}

impl ToyModel {
    pub fn new(cfg: &HarnessConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model();
        let (w, h) = (cfg.grid_width, cfg.grid_height);
        let txt = Segment::text(cfg.txt_len, d, SplitMix64::stream(cfg.seed, STREAM_TEXT).fill(cfg.txt_len * d))?;
        let tgt = Segment::image(
            SegmentKind::Target,
            w,
            h,
            d,
            SplitMix64::stream(cfg.seed, STREAM_TARGET).fill(w * h * d),
        )?;
        let reference = Segment::image(
            SegmentKind::Reference,
            w,
            h,
            d,
            SplitMix64::stream(cfg.seed, STREAM_REFERENCE).fill(w * h * d),
        )?;
        let hidden0 = TokenTensor::new(cfg.n_heads, cfg.d_head, txt, tgt, reference)?;
        let scale = 1.0 / (d as f64).sqrt();
        let matrix = |stream: u64| -> Vec<f64> {
            SplitMix64::stream(cfg.seed, stream)
                .fill(d * d)
                .into_iter()
                .map(|x| x * scale)
                .collect()
        };
        let weights = (0..cfg.num_blocks as u64)
            .map(|b| {
                let base = BLOCK_STREAM_BASE + 3 * b;
                BlockWeights { query: matrix(base), key: matrix(base + 1), value: matrix(base + 2) }
            })
            .collect();
        let rope = RopeTable::new(cfg.d_head, cfg.rope_base)?;
        Ok(Self { cfg: cfg.clone(), rope, weights, hidden0 })
    }

    pub fn config(&self) -> &HarnessConfig {
        &self.cfg
    }

    pub fn rope(&self) -> &RopeTable {
        &self.rope
    }

    pub fn initial_hidden(&self) -> &TokenTensor {
        &self.hidden0
    }

    fn project(&self, hidden: &TokenTensor, matrix: &[f64]) -> Result<TokenTensor> {
        let d = self.cfg.d_model();
        let proj = |seg: &Segment| -> Result<Segment> {
            let mut out = seg.clone();
            for i in 0..seg.len() {
                let x = seg.token(i);
                let y = out.token_mut(i);
                for (c, yc) in y.iter_mut().enumerate() {
                    *yc = (0..d).map(|r| x[r] * matrix[r * d + c]).sum();
                }
            }
            Ok(out)
        };
        TokenTensor::new(
            self.cfg.n_heads,
            self.cfg.d_head,
            proj(hidden.txt())?,
            proj(hidden.tgt())?,
            proj(hidden.reference())?,
        )
    }

    fn encode(&self, t: &TokenTensor) -> Result<TokenTensor> {
        TokenTensor::new(
            t.n_heads(),
            t.d_head(),
            apply_rope_or_identity(t.txt(), &self.rope)?,
            apply_rope_or_identity(t.tgt(), &self.rope)?,
            apply_rope_or_identity(t.reference(), &self.rope)?,
        )
    }

    /// First-block queries, keys and values for the synthesized state.
    pub fn synth_tokens(&self) -> Result<SynthTokens> {
        let weights = &self.weights[0];
        let q0 = self.project(&self.hidden0, &weights.query)?;
        let k0 = self.project(&self.hidden0, &weights.key)?;
        let v = self.project(&self.hidden0, &weights.value)?;
        Ok(SynthTokens {
            hidden: self.hidden0.clone(),
            q: self.encode(&q0)?,
            k0_ref: k0.reference().clone(),
            k: self.encode(&k0)?,
            v,
        })
    }

    fn check_drag(&self, drag: &DragInputs<'_>) -> Result<()> {
        let dims = (self.cfg.grid_width, self.cfg.grid_height);
        let map = drag.map;
        if drag.mask_src.dims() != dims
            || map.mask_dst.dims() != dims
            || map.field.dims() != dims
            || map.corr.dims() != dims
        {
            return Err(DragError::shape(format!(
                "drag outputs do not match the {}x{} harness grid",
                dims.0, dims.1
            )));
        }
        Ok(())
    }

    /// Evaluates block `block` of step `step` on `hidden`.
    pub fn run_block(&self, hidden: &TokenTensor, step: usize, block: usize, drag: &DragInputs<'_>) -> Result<BlockOutput> {
        self.check_drag(drag)?;
        if block >= self.cfg.num_blocks {
            return Err(DragError::InvalidConfig(format!("block {block} out of range")));
        }
        let lambda = lambda_at(&self.cfg.injection.schedule, step)?;
        let injection = &self.cfg.injection;
        let injected = injection.injects(block);
        let oam = self.cfg.oam_scope.active(block, injection);
        let re_rope = self.cfg.re_rope_scope.active(block, injection);
        let weights = &self.weights[block];

        let q = self.encode(&self.project(hidden, &weights.query)?)?;
        let k0 = self.project(hidden, &weights.key)?;
        let v = self.project(hidden, &weights.value)?;
        let mut k = self.encode(&k0)?;
        if re_rope {
            let reference = re_encode_reference_keys(k0.reference(), &drag.map.field, &drag.map.mask_dst, &self.rope)?;
            k = k.with_reference(reference)?;
        }
        let mask = if oam {
            build_overlap_mask(drag.mask_src, &drag.map.mask_dst, hidden.txt().len(), hidden.tgt().len(), self.cfg.mask_policy)?
        } else {
            AttentionMask::zeros(hidden.txt().len(), hidden.tgt().len(), hidden.reference().len())
        };
        let (attention, stats) = joint_attention_with_stats(&q, &k, &v, &mask)?;

        let o_tgt = attention.tgt().to_grid()?;
        let (blended_tgt, warped_reference) = if injected {
            let warped = warp_reference(&attention.reference().to_grid()?, &drag.map.corr)?;
            (blend(&o_tgt, &warped, &drag.map.mask_dst, lambda)?, Some(warped))
        } else {
            (o_tgt.clone(), None)
        };
        let (inside, outside) = blend_deltas(&o_tgt, &blended_tgt, &drag.map.mask_dst);

        let post = attention.clone().with_tgt(Segment::from_grid(SegmentKind::Target, blended_tgt.clone())?)?;
        let next_hidden = residual(hidden, &post)?;
        Ok(BlockOutput {
            attention,
            warped_reference,
            blended_tgt,
            record: BlockRecord {
                step,
                block,
                lambda,
                injected,
                oam,
                re_rope,
                blend_delta_inside: inside,
                blend_delta_outside: outside,
                masked_mass: stats.masked_mass,
            },
            next_hidden,
        })
    }

    /// Runs every step and block, recording one entry per block evaluation.
    pub fn run(&self, drag: &DragInputs<'_>) -> Result<RunTrace> {
        self.check_drag(drag)?;
        let total_steps = self.cfg.injection.schedule.total_steps;
        let mut records = Vec::with_capacity(total_steps * self.cfg.num_blocks);
        let mut tgt_state = self.hidden0.tgt().clone();
        for step in 0..total_steps {
            let mut hidden = self.hidden0.clone().with_tgt(tgt_state)?;
            for block in 0..self.cfg.num_blocks {
                let out = self.run_block(&hidden, step, block, drag)?;
                records.push(out.record);
                hidden = out.next_hidden;
            }
            tgt_state = hidden.tgt().clone();
        }
        Ok(RunTrace {
            seed: self.cfg.seed,
            grid_width: self.cfg.grid_width,
            grid_height: self.cfg.grid_height,
            num_blocks: self.cfg.num_blocks,
            total_steps,
            records,
            final_tgt: tgt_state.to_grid()?,
        })
    }
}

fn blend_deltas(before: &FeatureGrid, after: &FeatureGrid, mask: &BinaryMask) -> (f64, f64) {
    let dim = before.dim();
    let mut inside: f64 = 0.0;
    let mut outside: f64 = 0.0;
    for (i, (a, b)) in before.values().chunks(dim).zip(after.values().chunks(dim)).enumerate() {
        let delta = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if mask.bits()[i] {
            inside = inside.max(delta);
        } else {
            outside = outside.max(delta);
        }
    }
    (inside, outside)
}

fn residual(hidden: &TokenTensor, out: &TokenTensor) -> Result<TokenTensor> {
    let mix = |h: &Segment, o: &Segment| -> Segment {
        let mut s = h.clone();
        for i in 0..h.len() {
            for (x, &y) in s.token_mut(i).iter_mut().zip(o.token(i)) {
                *x = RESIDUAL_MIX * (*x + y);
            }
        }
        s
    };
    TokenTensor::new(
        hidden.n_heads(),
        hidden.d_head(),
        mix(hidden.txt(), out.txt()),
        mix(hidden.tgt(), out.tgt()),
        mix(hidden.reference(), out.reference()),
    )
}

/// Synthesized first-block tensors for `cfg`.
pub fn synth_tokens(cfg: &HarnessConfig) -> Result<SynthTokens> {
    ToyModel::new(cfg)?.synth_tokens()
}

/// Runs the full mechanism for `cfg` on the given drag outputs.
pub fn run_mechanism(cfg: &HarnessConfig, drag: &DragInputs<'_>) -> Result<RunTrace> {
    ToyModel::new(cfg)?.run(drag)
}
