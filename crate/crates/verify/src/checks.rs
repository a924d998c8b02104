//! Oracle checks for one drag specification on its token grid.

use serde::Serialize;

use dragkit_core::{
    build_coarse_target, build_overlap_mask, forward_displacement, joint_attention, re_encode_reference_keys,
    reverse_displacement, reverse_map, AttentionMask, BinaryMask, DragPair, HarnessConfig, InjectionConfig,
    LrmConfig, MaskPolicy, Point2, ReverseMap, ToyModel,
};

use crate::oracle;

/// Relative tolerance for displacement oracles.
pub const IDW_REL_TOL: f64 = 1e-6;
/// Absolute tolerance for attention oracles.
pub const ATTENTION_TOL: f64 = 1e-5;
/// Grids above this many cells skip the quadratic attention check.
pub const ATTENTION_CELL_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name, passed, detail: detail.into() }
    }
}

/// `|a − b| ≤ tol·|b|` with a 1e-12 absolute floor.
pub fn rel_close(a: Point2, b: Point2, tol: f64) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= tol * y.abs() + 1e-12;
    close(a.x, b.x) && close(a.y, b.y)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn grid_points(w: usize, h: usize) -> impl Iterator<Item = Point2> {
    (0..h).flat_map(move |y| (0..w).map(move |x| Point2::new(x as f64, y as f64)))
}

fn idw_checks(mask_src: &BinaryMask, pairs: &[DragPair], cfg: &LrmConfig) -> Vec<Check> {
    let (w, h) = mask_src.dims();
    let mut worst_fwd: Option<Point2> = None;
    let mut worst_rev: Option<Point2> = None;
    for p in grid_points(w, h) {
        match forward_displacement(p, pairs, cfg) {
            Ok(d) if rel_close(d, oracle::forward(p, pairs, cfg), IDW_REL_TOL) => {}
            _ => worst_fwd = worst_fwd.or(Some(p)),
        }
        match reverse_displacement(p, pairs, cfg) {
            Ok(d) if rel_close(d, oracle::reverse(p, pairs, cfg), IDW_REL_TOL) => {}
            _ => worst_rev = worst_rev.or(Some(p)),
        }
    }
    let describe = |bad: Option<Point2>| match bad {
        None => format!("{} cells within {IDW_REL_TOL:e}", w * h),
        Some(p) => format!("mismatch at ({}, {})", p.x, p.y),
    };
    let exact = pairs.iter().all(|p| {
        forward_displacement(p.source, pairs, cfg).ok() == Some(oracle::forward(p.source, pairs, cfg))
            && reverse_displacement(p.target, pairs, cfg).ok() == Some(oracle::reverse(p.target, pairs, cfg))
    });
    vec![
        Check::new("idw_forward_oracle", worst_fwd.is_none(), describe(worst_fwd)),
        Check::new("idw_reverse_oracle", worst_rev.is_none(), describe(worst_rev)),
        Check::new("control_point_exactness", exact, format!("{} pairs", pairs.len())),
    ]
}

/// Runs every oracle check for the given source mask and pairs.
pub fn run_suite(mask_src: &BinaryMask, pairs: &[DragPair], cfg: &LrmConfig, policy: MaskPolicy) -> Vec<Check> {
    let mut checks = idw_checks(mask_src, pairs, cfg);
    let (w, h) = mask_src.dims();

    let map = match reverse_map(mask_src, pairs, cfg) {
        Ok(m) => m,
        Err(e) => {
            checks.push(Check::new("reverse_map", false, e.to_string()));
            return checks;
        }
    };
    let coarse = build_coarse_target(mask_src, pairs, cfg).expect("reverse_map succeeded");
    let brute = oracle::reverse_map(mask_src, pairs, cfg);

    checks.push(Check::new(
        "coarse_target_brute_force",
        coarse == brute.coarse,
        format!("{} vs {} cells", coarse.count(), brute.coarse.count()),
    ));
    let field_ok = map
        .field
        .vectors()
        .iter()
        .zip(brute.field.vectors())
        .all(|(a, b)| rel_close(*a, *b, IDW_REL_TOL));
    checks.push(Check::new(
        "reverse_map_brute_force",
        map.mask_dst == brute.mask_dst && map.corr == brute.corr && field_ok,
        format!("{} destination cells (oracle {})", map.mask_dst.count(), brute.mask_dst.count()),
    ));
    let bad_corr = map.corr.iter().filter(|&(_, src)| !mask_src.get(src)).count();
    checks.push(Check::new(
        "correspondence_inside_source",
        bad_corr == 0 && map.mask_dst.is_subset_of(&coarse) && map.corr.domain() == map.mask_dst,
        format!("{bad_corr} entries outside the source mask"),
    ));

    match build_overlap_mask(mask_src, &map.mask_dst, 0, w * h, MaskPolicy::Verbatim) {
        Ok(m) => {
            let ok = m.reference_keep() == oracle::verbatim_keep(mask_src, &map.mask_dst);
            checks.push(Check::new("overlap_mask_keep_set", ok, format!("{} excluded", m.excluded_count())));
        }
        Err(e) => checks.push(Check::new("overlap_mask_keep_set", false, e.to_string())),
    }

    if w * h > ATTENTION_CELL_LIMIT {
        checks.push(Check::new(
            "attention_oracle",
            true,
            format!("skipped: {w}x{h} grid above {ATTENTION_CELL_LIMIT} cells"),
        ));
    } else {
        checks.push(attention_check(mask_src, &map, policy));
    }
    checks
}

fn attention_check(mask_src: &BinaryMask, map: &ReverseMap, policy: MaskPolicy) -> Check {
    let (w, h) = mask_src.dims();
    let cfg = HarnessConfig {
        grid_width: w,
        grid_height: h,
        num_blocks: 1,
        injection: InjectionConfig { block_subset: Default::default(), ..InjectionConfig::later_half(1) },
        mask_policy: policy,
        ..HarnessConfig::default()
    };
    let run = || -> dragkit_core::Result<(f64, f64)> {
        let model = ToyModel::new(&cfg)?;
        let t = model.synth_tokens()?;
        let k = t.k.clone().with_reference(re_encode_reference_keys(
            &t.k0_ref,
            &map.field,
            &map.mask_dst,
            model.rope(),
        )?)?;
        let mask = build_overlap_mask(mask_src, &map.mask_dst, t.q.txt().len(), w * h, policy)?;
        let out = joint_attention(&t.q, &k, &t.v, &mask)?;
        let ours: Vec<Vec<f64>> = (0..out.len()).map(|i| out.token(i).to_vec()).collect();
        let deleted = oracle::attention_deleting_excluded(&t.q, &k, &t.v, &mask);
        let plain = AttentionMask::zeros(t.q.txt().len(), w * h, w * h);
        let unmasked = joint_attention(&t.q, &k, &t.v, &plain)?;
        let unmasked: Vec<Vec<f64>> = (0..unmasked.len()).map(|i| unmasked.token(i).to_vec()).collect();
        let reference = oracle::attention(&t.q, &k, &t.v, plain.bias());
        Ok((max_abs_diff(&ours, &deleted), max_abs_diff(&unmasked, &reference)))
    };
    match run() {
        Ok((masked, plain)) => Check::new(
            "attention_oracle",
            masked <= ATTENTION_TOL && plain <= ATTENTION_TOL,
            format!("masked {masked:.2e}, unmasked {plain:.2e}"),
        ),
        Err(e) => Check::new("attention_oracle", false, e.to_string()),
    }
}
