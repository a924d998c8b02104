//! Monotone-chain convex hull over real points and inclusive rasterization
//! at integer cell centers.

use crate::types::{Cell, Point2};

const ON_EDGE_TOL: f64 = 1e-9;

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull in counter-clockwise order (y up), without collinear
/// vertices. Degenerate inputs yield one vertex (all points equal) or two
/// (all points collinear).
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Whether `p` lies inside or on the boundary of `hull` (as returned by
/// [`convex_hull`]).
pub fn hull_contains(hull: &[Point2], p: Point2) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].dist_sq(p) <= ON_EDGE_TOL * ON_EDGE_TOL,
        2 => on_segment(hull[0], hull[1], p),
        n => (0..n).all(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let len = a.dist_sq(b).sqrt();
            // signed distance from the edge line
            cross(a, b, p) / len >= -ON_EDGE_TOL
        }),
    }
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    let ab = b - a;
    let ap = p - a;
    let len_sq = ab.x * ab.x + ab.y * ab.y;
    let t = ((ap.x * ab.x + ap.y * ab.y) / len_sq).clamp(0.0, 1.0);
    let closest = Point2::new(a.x + t * ab.x, a.y + t * ab.y);
    closest.dist_sq(p) <= ON_EDGE_TOL * ON_EDGE_TOL
}

/// Grid cells of a `width x height` grid whose centers lie inside or on the
/// hull, in row-major order.
pub fn rasterize_hull(hull: &[Point2], width: usize, height: usize) -> Vec<Cell> {
    if hull.is_empty() {
        return Vec::new();
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in hull {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let lo = |v: f64| (v - ON_EDGE_TOL).ceil().max(0.0);
    let hi = |v: f64, n: usize| (v + ON_EDGE_TOL).floor().min(n as f64 - 1.0);
    let (x0, x1) = (lo(min_x), hi(max_x, width));
    let (y0, y1) = (lo(min_y), hi(max_y, height));
    if x0 > x1 || y0 > y1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            if hull_contains(hull, Point2::new(x as f64, y as f64)) {
                out.push(Cell::new(x, y));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn hull_of_square_with_interior_and_collinear_points() {
        let pts = [p(0.0, 0.0), p(2.0, 0.0), p(1.0, 0.0), p(2.0, 2.0), p(0.0, 2.0), p(1.0, 1.0)];
        let h = convex_hull(&pts);
        assert_eq!(h, vec![p(0.0, 0.0), p(2.0, 0.0), p(2.0, 2.0), p(0.0, 2.0)]);
    }

    #[test]
    fn degenerate_hulls() {
        assert_eq!(convex_hull(&[p(1.5, 2.5), p(1.5, 2.5)]), vec![p(1.5, 2.5)]);
        let h = convex_hull(&[p(0.0, 0.0), p(1.0, 1.0), p(3.0, 3.0), p(2.0, 2.0)]);
        assert_eq!(h, vec![p(0.0, 0.0), p(3.0, 3.0)]);
        assert!(convex_hull(&[]).is_empty());
    }

    #[test]
    fn rasterize_includes_boundary_cells() {
        let h = convex_hull(&[p(1.0, 1.0), p(3.0, 1.0), p(3.0, 3.0), p(1.0, 3.0)]);
        let cells = rasterize_hull(&h, 5, 5);
        assert_eq!(cells.len(), 9);
        assert!(cells.contains(&Cell::new(1, 1)) && cells.contains(&Cell::new(3, 3)));
    }

    #[test]
    fn rasterize_triangle_matches_brute_force() {
        let h = convex_hull(&[p(0.5, 0.2), p(7.3, 1.9), p(2.2, 6.8)]);
        let cells = rasterize_hull(&h, 8, 8);
        for y in 0..8 {
            for x in 0..8 {
                // barycentric sign test, independent of hull_contains
                let q = p(x as f64, y as f64);
                let (a, b, c) = (p(0.5, 0.2), p(7.3, 1.9), p(2.2, 6.8));
                let s1 = cross(a, b, q);
                let s2 = cross(b, c, q);
                let s3 = cross(c, a, q);
                let inside = s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0;
                assert_eq!(cells.contains(&Cell::new(x, y)), inside, "({x},{y})");
            }
        }
    }

    #[test]
    fn rasterize_segment_and_offgrid() {
        let h = convex_hull(&[p(5.0, 2.0), p(7.0, 2.0), p(6.0, 2.0)]);
        assert_eq!(
            rasterize_hull(&h, 10, 5),
            vec![Cell::new(5, 2), Cell::new(6, 2), Cell::new(7, 2)]
        );
        let h = convex_hull(&[p(-5.0, -5.0), p(-1.0, -2.0)]);
        assert!(rasterize_hull(&h, 4, 4).is_empty());
        let h = convex_hull(&[p(20.0, 1.0), p(30.0, 1.0), p(25.0, 3.0)]);
        assert!(rasterize_hull(&h, 10, 10).is_empty());
    }
}
