use dragkit_core::{
    build_overlap_mask, joint_attention, reverse_map, AttentionMask, BinaryMask, Cell, DragPair, HullMode,
    LrmConfig, MaskPolicy, Point2, Segment, SegmentKind, TokenTensor,
};
use dragkit_verify::checks::{max_abs_diff, run_suite};
use dragkit_verify::oracle;
use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn arb_case(max_w: usize, max_h: usize) -> impl Strategy<Value = (BinaryMask, Vec<DragPair>)> {
    (2..=max_w, 2..=max_h).prop_flat_map(|(w, h)| {
        let mask = proptest::collection::vec(prop::bool::weighted(0.3), w * h)
            .prop_filter("non-empty", |b| b.iter().any(|&x| x))
            .prop_map(move |b| BinaryMask::from_bits(w, h, b).unwrap());
        let pt = move || (-2.0..w as f64 + 2.0, -2.0..h as f64 + 2.0).prop_map(|(x, y)| Point2::new(x, y));
        let pairs = proptest::collection::vec((pt(), pt()).prop_map(|(s, t)| DragPair::new(s, t)), 1..=8);
        (mask, pairs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn suite_passes_on_random_specs((mask, pairs) in arb_case(14, 12), global in any::<bool>()) {
        let cfg = LrmConfig {
            hull_mode: if global { HullMode::Global } else { HullMode::PerComponent },
            ..LrmConfig::default()
        };
        for check in run_suite(&mask, &pairs, &cfg, MaskPolicy::Verbatim) {
            prop_assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }

    #[test]
    fn integer_drags_match_brute_force((mask, _) in arb_case(12, 12), sx in 0usize..12, sy in 0usize..12, dx in -4i32..=4, dy in -4i32..=4) {
        // integer control points put hull vertices exactly on cell centers
        let cfg = LrmConfig::default();
        let s = Point2::new(sx as f64, sy as f64);
        let pairs = [DragPair::new(s, Point2::new(s.x + dx as f64, s.y + dy as f64))];
        let ours = reverse_map(&mask, &pairs, &cfg).unwrap();
        let brute = oracle::reverse_map(&mask, &pairs, &cfg);
        prop_assert_eq!(ours.mask_dst, brute.mask_dst);
        prop_assert_eq!(ours.corr, brute.corr);
    }
}

#[test]
fn hull_oracle_handles_collinear_and_boundary_points() {
    let seg = [Point2::new(5.0, 2.0), Point2::new(6.0, 2.0), Point2::new(7.0, 2.0)];
    assert!(oracle::in_hull(&seg, Point2::new(5.5, 2.0)));
    assert!(oracle::in_hull(&seg, Point2::new(7.0, 2.0)));
    assert!(!oracle::in_hull(&seg, Point2::new(8.0, 2.0)));
    assert!(!oracle::in_hull(&seg, Point2::new(6.0, 3.0)));
    let tri = [Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), Point2::new(0.0, 4.0)];
    assert!(oracle::in_hull(&tri, Point2::new(2.0, 2.0)));
    assert!(oracle::in_hull(&tri, Point2::new(1.0, 1.0)));
    assert!(!oracle::in_hull(&tri, Point2::new(2.1, 2.1)));
    assert!(!oracle::in_hull(&[Point2::new(1.0, 1.0)], Point2::new(1.0, 2.0)));
}

fn random_tensor(rng: &mut StdRng, n_heads: usize, d_head: usize, txt: usize, w: usize, h: usize) -> TokenTensor {
    let d = n_heads * d_head;
    let mut gen = |n: usize| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
    TokenTensor::new(
        n_heads,
        d_head,
        Segment::text(txt, d, gen(txt * d)).unwrap(),
        Segment::image(SegmentKind::Target, w, h, d, gen(w * h * d)).unwrap(),
        Segment::image(SegmentKind::Reference, w, h, d, gen(w * h * d)).unwrap(),
    )
    .unwrap()
}

fn rows(t: &TokenTensor) -> Vec<Vec<f64>> {
    (0..t.len()).map(|i| t.token(i).to_vec()).collect()
}

#[test]
fn attention_matches_naive_reference() {
    let mut rng = StdRng::seed_from_u64(7);
    for case in 0..12 {
        let (w, h) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
        let txt = rng.gen_range(0..=6);
        let d_head = 4 * rng.gen_range(1..=8);
        let n_heads = rng.gen_range(1..=3);
        let q = random_tensor(&mut rng, n_heads, d_head, txt, w, h);
        let k = random_tensor(&mut rng, n_heads, d_head, txt, w, h);
        let v = random_tensor(&mut rng, n_heads, d_head, txt, w, h);
        let plain = AttentionMask::zeros(txt, w * h, w * h);
        let ours = rows(&joint_attention(&q, &k, &v, &plain).unwrap());
        let diff = max_abs_diff(&ours, &oracle::attention(&q, &k, &v, plain.bias()));
        assert!(diff <= 1e-5, "case {case}: {diff}");

        let src = BinaryMask::from_bits(w, h, (0..w * h).map(|_| rng.gen_bool(0.6)).collect()).unwrap();
        let dst = BinaryMask::from_bits(w, h, (0..w * h).map(|_| rng.gen_bool(0.4)).collect()).unwrap();
        for policy in [MaskPolicy::Verbatim, MaskPolicy::KeepBackground] {
            let mask = build_overlap_mask(&src, &dst, txt, w * h, policy).unwrap();
            let ours = rows(&joint_attention(&q, &k, &v, &mask).unwrap());
            let deleted = oracle::attention_deleting_excluded(&q, &k, &v, &mask);
            let diff = max_abs_diff(&ours, &deleted);
            assert!(diff <= 1e-5, "case {case} {policy:?}: {diff}");
        }
    }
}

#[test]
fn three_cell_fixture_agrees_with_oracle() {
    let mask = BinaryMask::from_cells(10, 5, [Cell::new(2, 2), Cell::new(3, 2), Cell::new(4, 2)]).unwrap();
    let pairs = [DragPair::new(Point2::new(3.0, 2.0), Point2::new(6.0, 2.0))];
    let brute = oracle::reverse_map(&mask, &pairs, &LrmConfig::default());
    assert_eq!(
        brute.mask_dst.iter_set().collect::<Vec<_>>(),
        vec![Cell::new(5, 2), Cell::new(6, 2), Cell::new(7, 2)]
    );
    // dilated hull is x ∈ 4..=8, y ∈ 1..=3; everything else falls outside the source
    assert_eq!(brute.coarse.count(), 15);
    for check in run_suite(&mask, &pairs, &LrmConfig::default(), MaskPolicy::Verbatim) {
        assert!(check.passed, "{}: {}", check.name, check.detail);
    }
}
