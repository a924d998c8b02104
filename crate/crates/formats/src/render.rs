//! Pixel-space preview warp and diagnostic overlays.
//!
//! Token coordinate `t` maps to pixel `t * f`, the same convention used by
//! [`crate::spec::pixels_to_tokens`].

use dragkit_core::{BinaryMask, Cell, Correspondence, DragError, DragPair, Point2, VectorField};

use crate::error::Result;
use crate::raster::Raster;

pub const SOURCE_TINT: [u8; 3] = [0, 200, 80];
pub const DEST_TINT: [u8; 3] = [255, 140, 0];
pub const ARROW_COLOR: [u8; 3] = [255, 230, 0];
pub const SOURCE_POINT: [u8; 3] = [230, 30, 30];
pub const TARGET_POINT: [u8; 3] = [30, 60, 230];
/// Tint opacity out of 256.
const TINT_ALPHA: u32 = 96;

fn check_grid(image: &Raster, f: usize, grid: (usize, usize), what: &str) -> Result<()> {
    let expected = (image.width().div_ceil(f.max(1)), image.height().div_ceil(f.max(1)));
    if f == 0 || grid != expected {
        return Err(DragError::ShapeMismatch(format!(
            "{what} is {}x{}, image {}x{} at factor {f} needs {}x{}",
            grid.0,
            grid.1,
            image.width(),
            image.height(),
            expected.0,
            expected.1
        ))
        .into());
    }
    Ok(())
}

fn block(c: Cell, f: usize, image: &Raster) -> impl Iterator<Item = (usize, usize)> {
    let (w, h) = image.dims();
    let (x0, y0) = (c.x * f, c.y * f);
    let (x1, y1) = ((x0 + f).min(w), (y0 + f).min(h));
    (y0..y1).flat_map(move |y| (x0..x1).map(move |x| (x, y)))
}

/// Copies each destination cell's `f x f` pixel block from its source block.
/// Pixels outside destination cells are untouched. Reads come from the
/// unmodified input, so overlapping blocks do not cascade.
pub fn preview_warp(image: &Raster, corr: &Correspondence, f: usize) -> Result<Raster> {
    check_grid(image, f, corr.dims(), "correspondence")?;
    let mut out = image.clone();
    for (dst, src) in corr.iter() {
        for (x, y) in block(dst, f, image) {
            let (sx, sy) = (x - dst.x * f + src.x * f, y - dst.y * f + src.y * f);
            if sx < image.width() && sy < image.height() {
                out.pixel_mut(x, y).copy_from_slice(image.pixel(sx, sy));
            }
        }
    }
    Ok(out)
}

/// Layers drawn by [`render_overlay`], bottom to top in field order.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlayLayers<'a> {
    pub mask_src: Option<&'a BinaryMask>,
    pub mask_dst: Option<&'a BinaryMask>,
    /// Reverse field; each destination cell gets an arrow from its source.
    pub field: Option<&'a VectorField>,
    pub field_stride: usize,
    /// Control points in pixel coordinates.
    pub pairs: &'a [DragPair],
}

impl OverlayLayers<'_> {
    pub fn is_empty(&self) -> bool {
        self.mask_src.is_none() && self.mask_dst.is_none() && self.field.is_none() && self.pairs.is_empty()
    }
}

pub fn disc_radius(f: usize) -> usize {
    (f / 4).max(2)
}

/// Composites the layers over `base`. The result is RGB unless there is
/// nothing to draw, in which case `base` is returned unchanged.
pub fn render_overlay(base: &Raster, layers: &OverlayLayers<'_>, f: usize) -> Result<Raster> {
    for (mask, name) in [(layers.mask_src, "source mask"), (layers.mask_dst, "destination mask")] {
        if let Some(m) = mask {
            check_grid(base, f, m.dims(), name)?;
        }
    }
    if let Some(field) = layers.field {
        check_grid(base, f, field.dims(), "field")?;
    }
    if layers.is_empty() {
        return Ok(base.clone());
    }
    let mut out = base.to_rgb();
    for (mask, tint) in [(layers.mask_src, SOURCE_TINT), (layers.mask_dst, DEST_TINT)] {
        let Some(mask) = mask else { continue };
        for c in mask.iter_set() {
            for (x, y) in block(c, f, base) {
                for (v, t) in out.pixel_mut(x, y).iter_mut().zip(tint) {
                    *v = ((*v as u32 * (256 - TINT_ALPHA) + t as u32 * TINT_ALPHA + 128) >> 8) as u8;
                }
            }
        }
    }
    if let (Some(field), Some(mask)) = (layers.field, layers.mask_dst) {
        let stride = layers.field_stride.max(1);
        let scale = f as f64;
        for q in mask.iter_set().filter(|c| c.x % stride == 0 && c.y % stride == 0) {
            let w = field.get(q);
            if w == Point2::ZERO {
                continue;
            }
            let tip = Point2::from(q);
            draw_arrow(&mut out, (tip + w) * scale, tip * scale, ARROW_COLOR);
        }
    }
    let r = disc_radius(f);
    for p in layers.pairs {
        draw_disc(&mut out, p.source, r, SOURCE_POINT);
    }
    for p in layers.pairs {
        draw_disc(&mut out, p.target, r, TARGET_POINT);
    }
    Ok(out)
}

fn put(img: &mut Raster, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        img.pixel_mut(x as usize, y as usize).copy_from_slice(&color);
    }
}

fn draw_disc(img: &mut Raster, center: Point2, r: usize, color: [u8; 3]) {
    let (cx, cy) = (center.x.round() as i64, center.y.round() as i64);
    let r = r as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                put(img, cx + dx, cy + dy, color);
            }
        }
    }
}

fn draw_line(img: &mut Raster, a: (i64, i64), b: (i64, i64), color: [u8; 3]) {
    let (mut x, mut y) = a;
    let (dx, dy) = ((b.0 - x).abs(), -(b.1 - y).abs());
    let (sx, sy) = (if x < b.0 { 1 } else { -1 }, if y < b.1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        put(img, x, y, color);
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn draw_arrow(img: &mut Raster, from: Point2, to: Point2, color: [u8; 3]) {
    let px = |p: Point2| (p.x.round() as i64, p.y.round() as i64);
    draw_line(img, px(from), px(to), color);
    let d = from - to;
    let len = d.x.hypot(d.y);
    if len < 1.0 {
        return;
    }
    let head = 4.0_f64.min(len / 2.0);
    let (ux, uy) = (d.x / len, d.y / len);
    let (c, s) = (0.5_f64.cos(), 0.5_f64.sin());
    for sign in [1.0, -1.0] {
        let bx = ux * c - sign * uy * s;
        let by = sign * ux * s + uy * c;
        draw_line(img, px(to), px(Point2::new(to.x + bx * head, to.y + by * head)), color);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> Raster {
        let data = (0..w * h).map(|i| (i % 251) as u8).collect();
        Raster::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn preview_identity_and_empty() {
        let img = gradient(8, 4);
        let full = BinaryMask::filled(4, 2).unwrap();
        assert_eq!(preview_warp(&img, &Correspondence::identity(&full), 2).unwrap(), img);
        assert_eq!(preview_warp(&img, &Correspondence::empty(4, 2), 2).unwrap(), img);
        assert!(preview_warp(&img, &Correspondence::empty(3, 2), 2).is_err());
    }

    #[test]
    fn preview_single_block() {
        let img = gradient(8, 4);
        let mut corr = Correspondence::empty(4, 2);
        corr.set(Cell::new(3, 1), Some(Cell::new(0, 0)));
        let out = preview_warp(&img, &corr, 2).unwrap();
        for y in 0..4 {
            for x in 0..8 {
                let expected = if x >= 6 && y >= 2 { img.pixel(x - 6, y - 2) } else { img.pixel(x, y) };
                assert_eq!(out.pixel(x, y), expected, "({x}, {y})");
            }
        }
    }

    #[test]
    fn overlay_no_layers_is_base() {
        let img = gradient(8, 4);
        assert_eq!(render_overlay(&img, &OverlayLayers::default(), 2).unwrap(), img);
    }

    #[test]
    fn overlay_target_disc_is_blue() {
        let img = Raster::filled(64, 32, 3, 128).unwrap();
        let pairs = [DragPair::new(Point2::new(10.0, 10.0), Point2::new(40.0, 20.0))];
        let layers = OverlayLayers { pairs: &pairs, ..Default::default() };
        let out = render_overlay(&img, &layers, 16).unwrap();
        assert_eq!(out.pixel(40, 20), TARGET_POINT);
        assert_eq!(out.pixel(10, 10), SOURCE_POINT);
        assert_eq!(out.pixel(0, 0), [128, 128, 128]);
        assert_eq!(render_overlay(&img, &layers, 16).unwrap(), out);
    }

    #[test]
    fn overlay_rejects_mismatched_layers() {
        let img = gradient(8, 4);
        let m = BinaryMask::filled(3, 2).unwrap();
        let layers = OverlayLayers { mask_src: Some(&m), ..Default::default() };
        assert!(render_overlay(&img, &layers, 2).is_err());
    }
}
