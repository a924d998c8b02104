use dragkit_core::{
    build_coarse_target, forward_displacement, reverse_displacement, reverse_map, BinaryMask, Cell,
    Correspondence, DragPair, LrmConfig, Point2, VectorField,
};
use proptest::prelude::*;

fn arb_mask(w: usize, h: usize) -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(any::<bool>(), w * h)
        .prop_filter("non-empty", |b| b.iter().any(|&x| x))
        .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
}

fn arb_pairs(w: usize, h: usize) -> impl Strategy<Value = Vec<DragPair>> {
    let pt = move || (0.0..w as f64, 0.0..h as f64).prop_map(|(x, y)| Point2::new(x, y));
    proptest::collection::vec((pt(), pt()).prop_map(|(s, t)| DragPair::new(s, t)), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn control_points_are_exact(pairs in arb_pairs(20, 20)) {
        let cfg = LrmConfig::default();
        for p in &pairs {
            // the first pair sharing this source decides; random reals never collide
            prop_assert_eq!(forward_displacement(p.source, &pairs, &cfg).unwrap(), p.drag());
            let w = reverse_displacement(p.target, &pairs, &cfg).unwrap();
            prop_assert_eq!(w, -p.drag());
        }
    }

    #[test]
    fn displacement_is_a_damped_convex_combination(
        pairs in arb_pairs(16, 16), x in 0.0..16.0f64, y in 0.0..16.0f64,
    ) {
        let cfg = LrmConfig::default();
        let d = forward_displacement(Point2::new(x, y), &pairs, &cfg).unwrap();
        let (lo_x, hi_x) = pairs.iter().map(|p| p.drag().x).fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
        let (lo_y, hi_y) = pairs.iter().map(|p| p.drag().y).fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
        prop_assert!(d.x >= lo_x - 1e-12 && d.x <= hi_x + 1e-12);
        prop_assert!(d.y >= lo_y - 1e-12 && d.y <= hi_y + 1e-12);
    }

    #[test]
    fn destination_is_valid(mask in arb_mask(12, 10), pairs in arb_pairs(12, 10)) {
        let cfg = LrmConfig::default();
        let coarse = build_coarse_target(&mask, &pairs, &cfg).unwrap();
        let out = reverse_map(&mask, &pairs, &cfg).unwrap();
        prop_assert!(out.mask_dst.is_subset_of(&coarse));
        prop_assert_eq!(out.corr.domain(), out.mask_dst.clone());
        for (dst, src) in out.corr.iter() {
            prop_assert!(mask.get(src), "corr {:?} -> {:?} outside source", dst, src);
        }
        for (i, v) in out.field.vectors().iter().enumerate() {
            if !out.mask_dst.bits()[i] {
                prop_assert_eq!(*v, Point2::ZERO);
            }
        }
    }

    #[test]
    fn zero_drag_identity(mask in arb_mask(9, 9), sx in 0.0..9.0f64, sy in 0.0..9.0f64) {
        let cfg = LrmConfig::default();
        let anchor = Point2::new(sx, sy);
        let out = reverse_map(&mask, &[DragPair::new(anchor, anchor)], &cfg).unwrap();
        prop_assert_eq!(&out.mask_dst, &mask);
        prop_assert_eq!(&out.field, &VectorField::zeros(9, 9));
        prop_assert_eq!(&out.corr, &Correspondence::identity(&mask));
    }

    #[test]
    fn single_pair_translation_equivariance(
        cells in proptest::collection::btree_set((8usize..16, 8usize..16), 1..20),
        dx in -6i64..=6, dy in -6i64..=6,
    ) {
        let cfg = LrmConfig::default();
        let mask = BinaryMask::from_cells(24, 24, cells.iter().map(|&(x, y)| Cell::new(x, y))).unwrap();
        let (sx, sy) = *cells.iter().next().unwrap();
        let s = Point2::new(sx as f64, sy as f64);
        let pair = DragPair::new(s, Point2::new(s.x + dx as f64, s.y + dy as f64));
        let out = reverse_map(&mask, &[pair], &cfg).unwrap();
        let shifted: Vec<Cell> = {
            let mut v: Vec<Cell> = cells
                .iter()
                .map(|&(x, y)| Cell::new((x as i64 + dx) as usize, (y as i64 + dy) as usize))
                .collect();
            v.sort_by_key(|c| (c.y, c.x));
            v
        };
        prop_assert_eq!(out.mask_dst.iter_set().collect::<Vec<_>>(), shifted);
        for (dst, src) in out.corr.iter() {
            prop_assert_eq!(src, Cell::new((dst.x as i64 - dx) as usize, (dst.y as i64 - dy) as usize));
        }
    }
}
