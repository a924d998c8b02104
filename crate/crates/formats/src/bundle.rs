//! Edit bundles: every artifact derived from one (image, spec) pair, and
//! their atomic publication on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use dragkit_core::{reverse_map, run_mechanism, DragError, DragInputs, HarnessConfig, ReverseMap, RunTrace};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corr::corr_to_json;
use crate::dkf::FieldFile;
use crate::error::{FormatError, Result};
use crate::raster::Raster;
use crate::render::{preview_warp, render_overlay, OverlayLayers};
use crate::spec::{mask_to_raster, pixels_to_tokens, DragSpecFile, TokenSpec};

/// Largest token grid the toy harness is run on.
pub const TRACE_CELL_LIMIT: usize = 1024;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Default)]
pub struct ComputeOptions {
    /// Run the harness with this configuration. Grid size, mask policy and
    /// injection overrides are taken from the spec.
    pub trace: Option<HarnessConfig>,
    pub field_stride: usize,
}

#[derive(Debug, Clone)]
pub struct EditBundle {
    pub tokens: TokenSpec,
    pub downscale_factor: usize,
    pub map: ReverseMap,
    pub reachability: Vec<bool>,
    pub preview: Raster,
    pub overlay: Raster,
    pub trace: Option<RunTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub source: [f64; 2],
    pub target: [f64; 2],
    pub reachable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub seed: u64,
    pub num_blocks: usize,
    pub total_steps: usize,
    pub injected_blocks: usize,
    pub max_blend_delta_inside: f64,
    pub max_blend_delta_outside: f64,
    pub max_masked_mass: f64,
}

impl TraceSummary {
    pub fn of(trace: &RunTrace) -> Self {
        let max = |f: fn(&dragkit_core::harness::BlockRecord) -> f64| trace.records.iter().map(f).fold(0.0, f64::max);
        Self {
            seed: trace.seed,
            num_blocks: trace.num_blocks,
            total_steps: trace.total_steps,
            injected_blocks: trace.records.iter().filter(|r| r.injected).count(),
            max_blend_delta_inside: max(|r| r.blend_delta_inside),
            max_blend_delta_outside: max(|r| r.blend_delta_outside),
            max_masked_mass: max(|r| r.masked_mass),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub grid_width: usize,
    pub grid_height: usize,
    pub downscale_factor: usize,
    pub pairs: Vec<PairSummary>,
    pub mask_src_rle: Vec<usize>,
    pub mask_dst_rle: Vec<usize>,
    pub src_cells: usize,
    pub dst_cells: usize,
    pub max_field_norm: f64,
    pub trace: Option<TraceSummary>,
    /// File name to SHA-256 hex of every other artifact.
    pub files: BTreeMap<String, String>,
}

/// Artifacts a client may fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Preview,
    Overlay,
    Field,
    Corr,
    Trace,
    MaskSrc,
    MaskDst,
    Summary,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 8] = [
        ArtifactKind::Preview,
        ArtifactKind::Overlay,
        ArtifactKind::Field,
        ArtifactKind::Corr,
        ArtifactKind::Trace,
        ArtifactKind::MaskSrc,
        ArtifactKind::MaskDst,
        ArtifactKind::Summary,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            ArtifactKind::Preview => "preview",
            ArtifactKind::Overlay => "overlay",
            ArtifactKind::Field => "field",
            ArtifactKind::Corr => "corr",
            ArtifactKind::Trace => "trace",
            ArtifactKind::MaskSrc => "mask_src",
            ArtifactKind::MaskDst => "mask_dst",
            ArtifactKind::Summary => "summary",
        }
    }

    /// Candidate file names inside a bundle directory.
    pub fn file_names(self) -> &'static [&'static str] {
        match self {
            ArtifactKind::Preview => &["preview.pgm", "preview.ppm"],
            ArtifactKind::Overlay => &["overlay.ppm", "overlay.pgm"],
            ArtifactKind::Field => &["field.dkf"],
            ArtifactKind::Corr => &["corr.json"],
            ArtifactKind::Trace => &["trace.json"],
            ArtifactKind::MaskSrc => &["mask_src.pgm"],
            ArtifactKind::MaskDst => &["mask_dst.pgm"],
            ArtifactKind::Summary => &[SUMMARY_FILE],
        }
    }

    /// Existing file for this kind in `dir`.
    pub fn locate(self, dir: &Path) -> Option<PathBuf> {
        self.file_names().iter().map(|n| dir.join(n)).find(|p| p.is_file())
    }
}

pub fn media_type(file_name: &str) -> &'static str {
    match file_name.rsplit('.').next() {
        Some("json") => "application/json",
        Some("pgm") => "image/x-portable-graymap",
        Some("ppm") => "image/x-portable-pixmap",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes).as_slice())
}

/// Runs the full pipeline: tokenization, reverse mapping, preview, overlay
/// and optionally the harness.
pub fn compute_edit(image: &Raster, spec: &DragSpecFile, mask: &Raster, opts: &ComputeOptions) -> Result<EditBundle> {
    spec.validate()?;
    if image.dims() != (spec.image.width_px, spec.image.height_px) {
        return Err(FormatError::MalformedSpec(format!(
            "spec declares a {}x{} image, got {}x{}",
            spec.image.width_px,
            spec.image.height_px,
            image.width(),
            image.height()
        )));
    }
    let f = spec.downscale_factor;
    let tokens = pixels_to_tokens(spec, mask)?;
    let map = reverse_map(&tokens.mask, &tokens.pairs, &spec.lrm_config())?;
    let reachability = map.reachability(&tokens.pairs);
    let preview = preview_warp(image, &map.corr, f)?;
    let pixel_pairs: Vec<_> = tokens
        .pairs
        .iter()
        .map(|p| dragkit_core::DragPair::new(p.source * f as f64, p.target * f as f64))
        .collect();
    let layers = OverlayLayers {
        mask_src: Some(&tokens.mask),
        mask_dst: Some(&map.mask_dst),
        field: Some(&map.field),
        field_stride: opts.field_stride.max(1),
        pairs: &pixel_pairs,
    };
    let overlay = render_overlay(image, &layers, f)?;

    let trace = match &opts.trace {
        None => None,
        Some(base) => {
            let (gw, gh) = (tokens.grid_width, tokens.grid_height);
            if gw * gh > TRACE_CELL_LIMIT {
                return Err(DragError::InvalidConfig(format!(
                    "a {gw}x{gh} token grid exceeds the {TRACE_CELL_LIMIT}-cell harness limit"
                ))
                .into());
            }
            let mut cfg = base.clone();
            cfg.grid_width = gw;
            cfg.grid_height = gh;
            cfg.mask_policy = spec.mask_policy.unwrap_or(cfg.mask_policy);
            if let Some(o) = &spec.injection {
                cfg.injection = o.apply(&cfg.injection);
            }
            Some(run_mechanism(&cfg, &DragInputs { mask_src: &tokens.mask, map: &map })?)
        }
    };

    Ok(EditBundle { tokens, downscale_factor: f, map, reachability, preview, overlay, trace })
}

impl EditBundle {
    /// Bundle contents by file name. Identical inputs give identical bytes.
    pub fn files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = BTreeMap::new();
        files.insert("mask_src.pgm".to_string(), mask_to_raster(&self.tokens.mask).to_pnm());
        files.insert("mask_dst.pgm".to_string(), mask_to_raster(&self.map.mask_dst).to_pnm());
        files.insert("field.dkf".to_string(), FieldFile::from_vector_field(&self.map.field).to_bytes());
        files.insert("corr.json".to_string(), corr_to_json(&self.map.corr).into_bytes());
        files.insert(format!("preview.{}", self.preview.pnm_extension()), self.preview.to_pnm());
        files.insert(format!("overlay.{}", self.overlay.pnm_extension()), self.overlay.to_pnm());
        if let Some(t) = &self.trace {
            let mut json = serde_json::to_vec_pretty(t).expect("trace serializes");
            json.push(b'\n');
            files.insert("trace.json".to_string(), json);
        }
        let summary = self.summary(&files);
        let mut json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
        json.push(b'\n');
        files.insert(SUMMARY_FILE.to_string(), json);
        files
    }

    fn summary(&self, files: &BTreeMap<String, Vec<u8>>) -> BundleSummary {
        BundleSummary {
            grid_width: self.tokens.grid_width,
            grid_height: self.tokens.grid_height,
            downscale_factor: self.downscale_factor,
            pairs: self
                .tokens
                .pairs
                .iter()
                .zip(&self.reachability)
                .map(|(p, &reachable)| PairSummary {
                    source: [p.source.x, p.source.y],
                    target: [p.target.x, p.target.y],
                    reachable,
                })
                .collect(),
            mask_src_rle: self.tokens.mask.to_rle(),
            mask_dst_rle: self.map.mask_dst.to_rle(),
            src_cells: self.tokens.mask.count(),
            dst_cells: self.map.mask_dst.count(),
            max_field_norm: self.map.field.max_norm(),
            trace: self.trace.as_ref().map(TraceSummary::of),
            files: files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect(),
        }
    }
}

fn unique_suffix() -> String {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    format!("{}-{}-{nanos}", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed))
}

/// Writes `files` into a fresh hidden directory under `parent` and syncs
/// them. The caller publishes it with a rename.
pub fn stage_files(parent: &Path, files: &BTreeMap<String, Vec<u8>>) -> Result<PathBuf> {
    std::fs::create_dir_all(parent)?;
    let dir = parent.join(format!(".staging-{}", unique_suffix()));
    std::fs::create_dir(&dir)?;
    let write = || -> std::io::Result<()> {
        for (name, bytes) in files {
            let file = std::fs::File::create(dir.join(name))?;
            std::io::Write::write_all(&mut &file, bytes)?;
            file.sync_all()?;
        }
        Ok(())
    };
    if let Err(e) = write() {
        let _ = std::fs::remove_dir_all(&dir);
        return Err(e.into());
    }
    Ok(dir)
}

/// Replaces `out` with a directory holding exactly `files`. A reader sees
/// either the old directory or the complete new one, never a partial write.
pub fn write_bundle_atomic(out: &Path, files: &BTreeMap<String, Vec<u8>>) -> Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let staged = stage_files(&parent, files)?;
    let result = (|| -> std::io::Result<()> {
        if out.exists() {
            let old = parent.join(format!(".retired-{}", unique_suffix()));
            std::fs::rename(out, &old)?;
            std::fs::rename(&staged, out)?;
            std::fs::remove_dir_all(&old)
        } else {
            std::fs::rename(&staged, out)
        }
    })();
    if result.is_err() {
        let _ = std::fs::remove_dir_all(&staged);
    }
    Ok(result?)
}
