//! Small built-in inputs used by tests, `dragkit verify` and the docs.

use crate::raster::Raster;
use crate::spec::{mask_data_uri, DragSpecFile, ImageSize, PixelPair};

/// Correspondence JSON produced by [`translation`].
pub const TRANSLATION_CORR_JSON: &str =
    "{\"width\":10,\"height\":5,\"entries\":[{\"dst\":[5,2],\"src\":[2,2]},{\"dst\":[6,2],\"src\":[3,2]},{\"dst\":[7,2],\"src\":[4,2]}]}\n";

/// Deterministic RGB test pattern.
pub fn pattern(width: usize, height: usize) -> Raster {
    let data = (0..height)
        .flat_map(|y| (0..width).flat_map(move |x| [(x * 7 % 256) as u8, (y * 11 % 256) as u8, ((x ^ y) % 256) as u8]))
        .collect();
    Raster::new(width, height, 3, data).expect("positive dims")
}

/// 160x80 image at factor 16 (a 10x5 grid) whose mask covers cells
/// (2,2), (3,2) and (4,2), dragged three cells right by one pair.
pub fn translation() -> (Raster, DragSpecFile, Raster) {
    let mut mask = Raster::filled(160, 80, 1, 0).expect("positive dims");
    for y in 32..48 {
        for x in 32..80 {
            mask.pixel_mut(x, y)[0] = 255;
        }
    }
    let spec = DragSpecFile {
        image: ImageSize { width_px: 160, height_px: 80 },
        downscale_factor: 16,
        pairs: vec![PixelPair { source: [48.0, 32.0], target: [96.0, 32.0] }],
        mask: mask_data_uri(&mask),
        lrm: None,
        injection: None,
        mask_policy: None,
    };
    (pattern(160, 80), spec, mask)
}

/// Same geometry as [`translation`] with the target on the source.
pub fn zero_drag() -> (Raster, DragSpecFile, Raster) {
    let (image, mut spec, mask) = translation();
    spec.pairs = vec![PixelPair { source: [48.0, 32.0], target: [48.0, 32.0] }];
    (image, spec, mask)
}
