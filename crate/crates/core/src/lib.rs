//! Drag-editing mechanism on a latent token grid.
//!
//! * [`lrm`]: destination region and per-cell correspondences from control
//!   point pairs (IDW displacement, convex-hull coarse target, reverse lookup).
//! * [`inject`]: warping reference attention outputs and blending them into
//!   the target outputs under a step schedule.
//! * [`attention`] / [`rope`]: joint attention with axial rotary embeddings,
//!   re-encoded reference keys and the overlap-aware mask.
//! * [`harness`]: a seeded toy transformer wiring the pieces together.

pub mod attention;
pub mod error;
pub mod field;
pub mod harness;
pub mod hull;
pub mod idw;
pub mod inject;
pub mod lrm;
pub mod mask;
pub mod rope;
pub mod types;

pub use attention::{
    apply_rope, build_overlap_mask, joint_attention, re_encode_reference_keys, AttentionMask, MaskPolicy,
    Segment, SegmentKind, TokenTensor, MASKED_BIAS,
};
pub use error::{DragError, Result};
pub use field::{Correspondence, VectorField};
pub use harness::{run_mechanism, synth_tokens, BlockScope, DragInputs, HarnessConfig, RunTrace, ToyModel};
pub use idw::{forward_displacement, reverse_displacement, HullMode, LrmConfig};
pub use inject::{blend, lambda_at, warp_reference, FeatureGrid, InjectionConfig, LambdaSchedule};
pub use lrm::{build_coarse_target, reverse_map, ReverseMap};
pub use mask::BinaryMask;
pub use rope::RopeTable;
pub use types::{Cell, DragPair, Point2};
