//! File formats and artifact rendering around the drag engine.
//!
//! * [`spec`]: the JSON drag spec in pixel coordinates and its token-grid form.
//! * [`raster`]: PGM/PPM and PNG images.
//! * [`dkf`]: the DKF1 binary field format.
//! * [`corr`]: correspondence JSON.
//! * [`render`]: pixel preview warp and overlays.
//! * [`bundle`]: the full edit pipeline and atomic bundle output.

pub mod bundle;
pub mod corr;
pub mod dkf;
pub mod error;
pub mod fixtures;
pub mod raster;
pub mod render;
pub mod spec;

pub use bundle::{
    compute_edit, media_type, sha256_hex, write_bundle_atomic, ArtifactKind, BundleSummary, ComputeOptions,
    EditBundle,
};
pub use corr::{corr_from_json, corr_to_json};
pub use dkf::FieldFile;
pub use error::{FormatError, Result};
pub use raster::{Raster, RasterFormat};
pub use render::{preview_warp, render_overlay, OverlayLayers};
pub use spec::{mask_data_uri, pixels_to_tokens, DragSpecFile, ImageSize, InjectionOverrides, PixelPair, TokenSpec};
