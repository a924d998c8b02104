//! Drag spec documents in pixel coordinates and their token-grid form.

use std::collections::BTreeSet;
use std::path::Path;

use base64::Engine;
use dragkit_core::{BinaryMask, Cell, DragPair, InjectionConfig, LambdaSchedule, LrmConfig, MaskPolicy, Point2};
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Result};
use crate::raster::Raster;

pub const DEFAULT_DOWNSCALE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width_px: usize,
    pub height_px: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelPair {
    pub source: [f64; 2],
    pub target: [f64; 2],
}

/// Partial injection settings; unset fields keep the harness defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<LambdaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_subset: Option<BTreeSet<usize>>,
}

impl InjectionOverrides {
    pub fn apply(&self, base: &InjectionConfig) -> InjectionConfig {
        InjectionConfig {
            enabled: self.enabled.unwrap_or(base.enabled),
            schedule: self.schedule.unwrap_or(base.schedule),
            block_subset: self.block_subset.clone().unwrap_or_else(|| base.block_subset.clone()),
        }
    }
}

/// User-authored drag edit.
///
/// `mask` is a file path (resolved against the spec's directory) or a
/// `data:` URI holding a base64 PGM or PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DragSpecFile {
    pub image: ImageSize,
    #[serde(default = "default_downscale")]
    pub downscale_factor: usize,
    pub pairs: Vec<PixelPair>,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lrm: Option<LrmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<InjectionOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_policy: Option<MaskPolicy>,
}

fn default_downscale() -> usize {
    DEFAULT_DOWNSCALE
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::MalformedSpec(msg.into())
}

impl DragSpecFile {
    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| malformed(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.image.width_px, self.image.height_px);
        if w == 0 || h == 0 {
            return Err(malformed("image dimensions must be positive"));
        }
        if self.downscale_factor == 0 {
            return Err(malformed("downscale_factor must be >= 1"));
        }
        if self.pairs.is_empty() {
            return Err(malformed("pairs must be non-empty"));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            for [x, y] in [p.source, p.target] {
                let inside = x.is_finite() && y.is_finite() && (0.0..w as f64).contains(&x) && (0.0..h as f64).contains(&y);
                if !inside {
                    return Err(malformed(format!("pair {i}: point ({x}, {y}) outside the {w}x{h} image")));
                }
            }
        }
        if self.mask.is_empty() {
            return Err(malformed("mask must be set"));
        }
        if let Some(lrm) = &self.lrm {
            lrm.validate().map_err(|e| malformed(e.to_string()))?;
        }
        Ok(())
    }

    /// Token grid `(width, height)`: pixel dimensions divided by the factor, rounded up.
    pub fn grid_dims(&self) -> (usize, usize) {
        let f = self.downscale_factor;
        (self.image.width_px.div_ceil(f), self.image.height_px.div_ceil(f))
    }

    pub fn lrm_config(&self) -> LrmConfig {
        self.lrm.unwrap_or_default()
    }

    pub fn mask_policy(&self) -> MaskPolicy {
        self.mask_policy.unwrap_or_default()
    }

    /// Loads the mask image. Paths are only followed when `base_dir` is given.
    pub fn load_mask(&self, base_dir: Option<&Path>) -> Result<Raster> {
        if let Some(rest) = self.mask.strip_prefix("data:") {
            let (_, payload) = rest
                .split_once(";base64,")
                .ok_or_else(|| malformed("mask data URI must be base64"))?;
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(payload.trim())
                .map_err(|e| malformed(format!("mask data URI: {e}")))?;
            return Raster::decode(&bytes).map_err(|e| malformed(format!("mask: {e}")));
        }
        let dir = base_dir.ok_or_else(|| malformed("mask must be an inline data URI here"))?;
        let path = dir.join(&self.mask);
        let bytes = std::fs::read(&path)
            .map_err(|e| malformed(format!("cannot read mask {}: {e}", path.display())))?;
        Raster::decode(&bytes).map_err(|e| malformed(format!("mask {}: {e}", path.display())))
    }
}

/// Inline `data:` URI for a mask raster, encoded as PGM/PPM.
pub fn mask_data_uri(mask: &Raster) -> String {
    let mime = if mask.channels() == 1 { "image/x-portable-graymap" } else { "image/x-portable-pixmap" };
    format!("data:{mime};base64,{}", base64::engine::general_purpose::STANDARD.encode(mask.to_pnm()))
}

/// The spec on the token grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSpec {
    pub grid_width: usize,
    pub grid_height: usize,
    pub pairs: Vec<DragPair>,
    pub mask: BinaryMask,
}

/// Divides pixel points by the factor and pools the mask to the grid.
///
/// A mask at pixel resolution sets a cell when at least half of the pixels
/// it covers are inside (value ≥ 128). A mask already at grid resolution is
/// thresholded directly.
pub fn pixels_to_tokens(spec: &DragSpecFile, mask: &Raster) -> Result<TokenSpec> {
    spec.validate()?;
    let f = spec.downscale_factor;
    let (gw, gh) = spec.grid_dims();
    let (w, h) = (spec.image.width_px, spec.image.height_px);
    let inside = |x: usize, y: usize| mask.luma(x, y) >= 128;

    let token_mask = if mask.dims() == (w, h) {
        let mut m = BinaryMask::new(gw, gh)?;
        for cy in 0..gh {
            for cx in 0..gw {
                let (x0, x1) = (cx * f, ((cx + 1) * f).min(w));
                let (y0, y1) = (cy * f, ((cy + 1) * f).min(h));
                let covered = (x1 - x0) * (y1 - y0);
                let set = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y))).filter(|&(x, y)| inside(x, y)).count();
                m.set(Cell::new(cx, cy), 2 * set >= covered);
            }
        }
        m
    } else if mask.dims() == (gw, gh) {
        let bits = (0..gh).flat_map(|y| (0..gw).map(move |x| (x, y))).map(|(x, y)| inside(x, y)).collect();
        BinaryMask::from_bits(gw, gh, bits)?
    } else {
        return Err(FormatError::MaskSizeMismatch {
            got_w: mask.width(),
            got_h: mask.height(),
            want_w: w,
            want_h: h,
            grid_w: gw,
            grid_h: gh,
        });
    };

    let to_token = |[x, y]: [f64; 2]| Point2::new(x / f as f64, y / f as f64);
    let pairs = spec
        .pairs
        .iter()
        .map(|p| DragPair::new(to_token(p.source), to_token(p.target)))
        .collect();
    Ok(TokenSpec { grid_width: gw, grid_height: gh, pairs, mask: token_mask })
}

/// Mask raster at grid resolution, 0 outside and 255 inside.
pub fn mask_to_raster(mask: &BinaryMask) -> Raster {
    let data = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    Raster::new(mask.width(), mask.height(), 1, data).expect("mask dims are positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: usize, h: usize, pairs: Vec<PixelPair>) -> DragSpecFile {
        DragSpecFile {
            image: ImageSize { width_px: w, height_px: h },
            downscale_factor: 16,
            pairs,
            mask: "mask.pgm".into(),
            lrm: None,
            injection: None,
            mask_policy: None,
        }
    }

    fn pair(s: [f64; 2], t: [f64; 2]) -> PixelPair {
        PixelPair { source: s, target: t }
    }

    #[test]
    fn grid_and_point_scaling() {
        let s = spec(1024, 1024, vec![pair([160.0, 48.0], [256.0, 48.0])]);
        let mask = Raster::filled(1024, 1024, 1, 255).unwrap();
        let t = pixels_to_tokens(&s, &mask).unwrap();
        assert_eq!((t.grid_width, t.grid_height), (64, 64));
        assert_eq!(t.pairs[0].source, Point2::new(10.0, 3.0));
        assert_eq!(t.mask.count(), 64 * 64);
    }

    #[test]
    fn partial_cells_and_majority_pooling() {
        let s = spec(20, 16, vec![pair([0.0, 0.0], [1.0, 1.0])]);
        assert_eq!(s.grid_dims(), (2, 1));
        let mut mask = Raster::filled(20, 16, 1, 0).unwrap();
        // Right cell covers 4x16 = 64 pixels; 32 inside is exactly half.
        for y in 0..8 {
            for x in 16..20 {
                mask.pixel_mut(x, y)[0] = 200;
            }
        }
        // Left cell: 127 of 256 inside is below half.
        for i in 0..127 {
            mask.pixel_mut(i % 16, i / 16)[0] = 255;
        }
        let t = pixels_to_tokens(&s, &mask).unwrap();
        assert_eq!(t.mask.bits(), &[false, true]);
    }

    #[test]
    fn grid_resolution_mask_and_mismatch() {
        let s = spec(160, 80, vec![pair([48.0, 32.0], [96.0, 32.0])]);
        let mask = Raster::filled(10, 5, 1, 255).unwrap();
        assert_eq!(pixels_to_tokens(&s, &mask).unwrap().mask.count(), 50);
        let err = pixels_to_tokens(&s, &Raster::filled(11, 5, 1, 255).unwrap()).unwrap_err();
        assert_eq!(err.code(), "MaskSizeMismatch");
    }

    #[test]
    fn validation() {
        let ok = spec(64, 64, vec![pair([1.0, 2.0], [3.0, 4.0])]);
        assert!(ok.validate().is_ok());
        assert!(spec(64, 64, vec![]).validate().is_err());
        assert!(spec(64, 64, vec![pair([64.0, 0.0], [0.0, 0.0])]).validate().is_err());
        assert!(spec(64, 64, vec![pair([f64::NAN, 0.0], [0.0, 0.0])]).validate().is_err());
        assert!(DragSpecFile { downscale_factor: 0, ..ok.clone() }.validate().is_err());
        let err = DragSpecFile::parse("{\"image\":{\"width_px\":4}}").unwrap_err();
        assert_eq!(err.code(), "MalformedSpec");
    }

    #[test]
    fn default_factor_and_overrides() {
        let text = r#"{"image":{"width_px":32,"height_px":32},"pairs":[{"source":[1,1],"target":[2,2]}],
            "mask":"m.pgm","lrm":{"dilation_radius":2},"injection":{"block_subset":[1]},"mask_policy":"keep_background"}"#;
        let s = DragSpecFile::parse(text).unwrap();
        assert_eq!(s.downscale_factor, 16);
        assert_eq!(s.lrm_config().dilation_radius, 2);
        assert_eq!(s.lrm_config().epsilon, LrmConfig::default().epsilon);
        assert_eq!(s.mask_policy(), MaskPolicy::KeepBackground);
        let inj = s.injection.as_ref().unwrap().apply(&InjectionConfig::later_half(8));
        assert_eq!(inj.block_subset.into_iter().collect::<Vec<_>>(), vec![1]);
        assert!(inj.enabled);
    }

    #[test]
    fn inline_mask() {
        let mask = Raster::filled(2, 2, 1, 255).unwrap();
        let s = DragSpecFile { mask: mask_data_uri(&mask), ..spec(32, 32, vec![pair([0.0, 0.0], [1.0, 1.0])]) };
        assert_eq!(s.load_mask(None).unwrap(), mask);
        let path_spec = spec(32, 32, vec![pair([0.0, 0.0], [1.0, 1.0])]);
        assert_eq!(path_spec.load_mask(None).unwrap_err().code(), "MalformedSpec");
        assert_eq!(path_spec.load_mask(Some(Path::new("/nonexistent"))).unwrap_err().code(), "MalformedSpec");
    }
}
