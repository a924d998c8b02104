//! Reference implementations written for clarity, not speed. They share
//! only data types with `dragkit-core`, never its code paths.

use dragkit_core::{
    AttentionMask, BinaryMask, Cell, Correspondence, DragPair, HullMode, LrmConfig, Point2, TokenTensor,
    VectorField, MASKED_BIAS,
};

/// IDW over explicit anchors: weights first, then the two weighted sums.
pub fn idw(query: Point2, anchors: &[Point2], vectors: &[Point2], epsilon: f64, hit_tol: f64) -> Point2 {
    for (a, v) in anchors.iter().zip(vectors) {
        let dx = query.x - a.x;
        let dy = query.y - a.y;
        if (dx * dx + dy * dy).sqrt() <= hit_tol {
            return *v;
        }
    }
    let weights: Vec<f64> = anchors
        .iter()
        .map(|a| {
            let dx = query.x - a.x;
            let dy = query.y - a.y;
            1.0 / (dx * dx + dy * dy)
        })
        .collect();
    let mut sum_w = 0.0;
    for w in &weights {
        sum_w += w;
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (w, v) in weights.iter().zip(vectors) {
        sx += w * v.x;
        sy += w * v.y;
    }
    Point2::new(sx / (sum_w + epsilon), sy / (sum_w + epsilon))
}

pub fn forward(p: Point2, pairs: &[DragPair], cfg: &LrmConfig) -> Point2 {
    let anchors: Vec<Point2> = pairs.iter().map(|pr| pr.source).collect();
    let drags: Vec<Point2> = pairs
        .iter()
        .map(|pr| Point2::new(pr.target.x - pr.source.x, pr.target.y - pr.source.y))
        .collect();
    idw(p, &anchors, &drags, cfg.epsilon, cfg.exact_hit_tolerance)
}

pub fn reverse(q: Point2, pairs: &[DragPair], cfg: &LrmConfig) -> Point2 {
    let anchors: Vec<Point2> = pairs.iter().map(|pr| pr.target).collect();
    let drags: Vec<Point2> = pairs
        .iter()
        .map(|pr| Point2::new(pr.source.x - pr.target.x, pr.source.y - pr.target.y))
        .collect();
    idw(q, &anchors, &drags, cfg.epsilon, cfg.exact_hit_tolerance)
}

/// Point-in-convex-hull by angular gap: `q` is outside the hull of `cloud`
/// iff the directions from `q` to the cloud fit in an open half-plane,
/// i.e. some angular gap between consecutive directions exceeds π.
pub fn in_hull(cloud: &[Point2], q: Point2) -> bool {
    const TOL: f64 = 1e-9;
    let mut angles = Vec::with_capacity(cloud.len());
    for p in cloud {
        let (dx, dy) = (p.x - q.x, p.y - q.y);
        let r = (dx * dx + dy * dy).sqrt();
        if r <= TOL {
            return true;
        }
        angles.push((dy.atan2(dx), r));
    }
    if angles.is_empty() {
        return false;
    }
    angles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = angles.len();
    let mut worst_gap: f64 = 0.0;
    let mut at = 0;
    for i in 0..n {
        let next = if i + 1 < n { angles[i + 1].0 } else { angles[0].0 + 2.0 * std::f64::consts::PI };
        let gap = next - angles[i].0;
        if gap > worst_gap {
            worst_gap = gap;
            at = i;
        }
    }
    let excess = worst_gap - std::f64::consts::PI;
    if excess <= 0.0 {
        return true;
    }
    // Gap just over π: q sits on an edge if its distance to the supporting
    // line is within tolerance.
    let (a1, r1) = angles[at];
    let (a2, r2) = angles[(at + 1) % n];
    let p1 = Point2::new(q.x + r1 * a1.cos(), q.y + r1 * a1.sin());
    let p2 = Point2::new(q.x + r2 * a2.cos(), q.y + r2 * a2.sin());
    let (ex, ey) = (p2.x - p1.x, p2.y - p1.y);
    let len = (ex * ex + ey * ey).sqrt();
    if len <= TOL {
        return false;
    }
    let dist = ((q.x - p1.x) * ey - (q.y - p1.y) * ex).abs() / len;
    let along = ((q.x - p1.x) * ex + (q.y - p1.y) * ey) / len;
    dist <= TOL && along >= -TOL && along <= len + TOL
}

/// 4-connected labels by repeated relaxation to the minimum neighbour label.
fn component_groups(mask: &BinaryMask) -> Vec<Vec<Cell>> {
    let (w, h) = mask.dims();
    let mut label: Vec<Option<usize>> = (0..w * h).map(|i| mask.bits()[i].then_some(i)).collect();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let Some(mut l) = label[i] else { continue };
                let neighbours = [
                    (x > 0).then(|| i - 1),
                    (x + 1 < w).then(|| i + 1),
                    (y > 0).then(|| i - w),
                    (y + 1 < h).then(|| i + w),
                ];
                for j in neighbours.into_iter().flatten() {
                    if let Some(lj) = label[j] {
                        l = l.min(lj);
                    }
                }
                if Some(l) != label[i] {
                    label[i] = Some(l);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Cell>> = Default::default();
    for (i, l) in label.iter().enumerate() {
        if let Some(l) = l {
            groups.entry(*l).or_default().push(Cell::new(i % w, i / w));
        }
    }
    groups.into_values().collect()
}

pub fn coarse_target(mask_src: &BinaryMask, pairs: &[DragPair], cfg: &LrmConfig) -> BinaryMask {
    let (w, h) = mask_src.dims();
    let groups = match cfg.hull_mode {
        HullMode::PerComponent => component_groups(mask_src),
        HullMode::Global => vec![mask_src.iter_set().collect()],
    };
    let mut hit = vec![false; w * h];
    for group in groups {
        let cloud: Vec<Point2> = group
            .iter()
            .map(|c| {
                let p = Point2::new(c.x as f64, c.y as f64);
                let d = forward(p, pairs, cfg);
                Point2::new(p.x + d.x, p.y + d.y)
            })
            .collect();
        for y in 0..h {
            for x in 0..w {
                if in_hull(&cloud, Point2::new(x as f64, y as f64)) {
                    hit[y * w + x] = true;
                }
            }
        }
        for p in &cloud {
            let (rx, ry) = (p.x.round(), p.y.round());
            if rx >= 0.0 && ry >= 0.0 && rx < w as f64 && ry < h as f64 {
                hit[ry as usize * w + rx as usize] = true;
            }
        }
    }
    let r = cfg.dilation_radius as i64;
    let bits = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 && hit[ny as usize * w + nx as usize]
                })
            })
        })
        .collect();
    BinaryMask::from_bits(w, h, bits).expect("same dims as source")
}

pub struct BruteMap {
    pub coarse: BinaryMask,
    pub mask_dst: BinaryMask,
    pub field: VectorField,
    pub corr: Correspondence,
}

pub fn reverse_map(mask_src: &BinaryMask, pairs: &[DragPair], cfg: &LrmConfig) -> BruteMap {
    let (w, h) = mask_src.dims();
    let coarse = coarse_target(mask_src, pairs, cfg);
    let mut dst = vec![false; w * h];
    let mut field = vec![Point2::ZERO; w * h];
    let mut corr = Correspondence::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if !coarse.get(Cell::new(x, y)) {
                continue;
            }
            let inv = reverse(Point2::new(x as f64, y as f64), pairs, cfg);
            let (sx, sy) = ((x as f64 + inv.x).round(), (y as f64 + inv.y).round());
            if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
                continue;
            }
            let src = Cell::new(sx as usize, sy as usize);
            if mask_src.get(src) {
                dst[y * w + x] = true;
                field[y * w + x] = Point2::new(inv.x + 0.0, inv.y + 0.0);
                corr.set(Cell::new(x, y), Some(src));
            }
        }
    }
    BruteMap {
        coarse,
        mask_dst: BinaryMask::from_bits(w, h, dst).expect("same dims"),
        field: VectorField::from_vectors(w, h, field).expect("finite"),
        corr,
    }
}

/// Verbatim keep-set `(1 − M_DST) ∧ M_SRC`, cellwise.
pub fn verbatim_keep(mask_src: &BinaryMask, mask_dst: &BinaryMask) -> Vec<bool> {
    mask_src.bits().iter().zip(mask_dst.bits()).map(|(&s, &d)| s && !d).collect()
}

fn rows(t: &TokenTensor) -> Vec<Vec<f64>> {
    (0..t.len()).map(|i| t.token(i).to_vec()).collect()
}

/// Two-loop attention with the additive bias applied as-is.
pub fn attention(q: &TokenTensor, k: &TokenTensor, v: &TokenTensor, bias: &[f64]) -> Vec<Vec<f64>> {
    let (qs, ks, vs) = (rows(q), rows(k), rows(v));
    let keys: Vec<usize> = (0..ks.len()).collect();
    attend(q.n_heads(), q.d_head(), &qs, &ks, &vs, &keys, bias)
}

/// Attention with excluded keys physically removed from the sequence.
pub fn attention_deleting_excluded(
    q: &TokenTensor,
    k: &TokenTensor,
    v: &TokenTensor,
    mask: &AttentionMask,
) -> Vec<Vec<f64>> {
    let (qs, ks, vs) = (rows(q), rows(k), rows(v));
    let keys: Vec<usize> = (0..ks.len()).filter(|&j| mask.bias()[j] > MASKED_BIAS).collect();
    let zero = vec![0.0; ks.len()];
    attend(q.n_heads(), q.d_head(), &qs, &ks, &vs, &keys, &zero)
}

fn attend(
    n_heads: usize,
    d_head: usize,
    qs: &[Vec<f64>],
    ks: &[Vec<f64>],
    vs: &[Vec<f64>],
    keys: &[usize],
    bias: &[f64],
) -> Vec<Vec<f64>> {
    let scale = 1.0 / (d_head as f64).sqrt();
    let mut out = vec![vec![0.0; n_heads * d_head]; qs.len()];
    for (i, qrow) in qs.iter().enumerate() {
        for h in 0..n_heads {
            let off = h * d_head;
            let mut scores = Vec::with_capacity(keys.len());
            for &j in keys {
                let mut s = 0.0;
                for c in 0..d_head {
                    s += qrow[off + c] * ks[j][off + c];
                }
                scores.push(s * scale + bias[j]);
            }
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for (e, &j) in exps.iter().zip(keys) {
                for c in 0..d_head {
                    out[i][off + c] += e / z * vs[j][off + c];
                }
            }
        }
    }
    out
}
