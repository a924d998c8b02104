use dragkit_core::attention::{attention_weights, joint_attention_with_stats, masked_softmax};
use dragkit_core::{
    apply_rope, build_overlap_mask, re_encode_reference_keys, BinaryMask, Cell, MaskPolicy, Point2,
    RopeTable, Segment, SegmentKind, TokenTensor, VectorField,
};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotated(table: &RopeTable, v: &[f64], pos: Point2) -> Vec<f64> {
    let mut out = v.to_vec();
    table.rotate_head(&mut out, &table.phases(pos));
    out
}

fn arb_head(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0..3.0f64, d)
}

proptest! {
    #[test]
    fn rope_preserves_norm(v in arb_head(16), x in -50.0..50.0f64, y in -50.0..50.0f64) {
        let table = RopeTable::new(16, 10000.0).unwrap();
        let r = rotated(&table, &v, Point2::new(x, y));
        let n0 = dot(&v, &v).sqrt();
        let n1 = dot(&r, &r).sqrt();
        prop_assert!((n0 - n1).abs() <= 1e-6);
    }

    #[test]
    fn rope_scores_depend_on_offset_only(
        q in arb_head(16), k in arb_head(16),
        m in (0.0..32.0f64, 0.0..32.0f64), n in (0.0..32.0f64, 0.0..32.0f64),
        shift in (-20.0..20.0f64, -20.0..20.0f64),
    ) {
        let table = RopeTable::new(16, 10000.0).unwrap();
        let (pm, pn) = (Point2::new(m.0, m.1), Point2::new(n.0, n.1));
        let off = Point2::new(shift.0, shift.1);
        let s0 = dot(&rotated(&table, &q, pm), &rotated(&table, &k, pn));
        let s1 = dot(&rotated(&table, &q, pm + off), &rotated(&table, &k, pn + off));
        prop_assert!((s0 - s1).abs() <= 1e-6, "{} vs {}", s0, s1);
    }
}

#[test]
fn segment_rope_at_origin_is_identity() {
    let table = RopeTable::new(8, 10000.0).unwrap();
    let data: Vec<f64> = (0..16).map(|i| (i as f64 * 1.3).sin()).collect();
    let seg = Segment::image(SegmentKind::Target, 1, 1, 16, data.clone()).unwrap();
    assert_eq!(apply_rope(&seg, &table).unwrap().data(), data.as_slice());
}

#[test]
fn re_encoded_key_scores_as_if_at_destination() {
    let table = RopeTable::new(8, 10000.0).unwrap();
    let (w, h, d) = (10, 5, 8);
    let k0: Vec<f64> = (0..w * h * d).map(|i| ((i * 7919) % 97) as f64 / 48.5 - 1.0).collect();
    let k0 = Segment::image(SegmentKind::Reference, w, h, d, k0).unwrap();
    // q = (6, 2) sources p = (3, 2)
    let mut field = VectorField::zeros(w, h);
    field.set(Cell::new(6, 2), Point2::new(-3.0, 0.0));
    let dst = BinaryMask::from_cells(w, h, [Cell::new(6, 2)]).unwrap();
    let out = re_encode_reference_keys(&k0, &field, &dst, &table).unwrap();
    let slot = 2 * w + 3;
    let want = rotated(&table, k0.token(slot), Point2::new(6.0, 2.0));
    assert_eq!(out.token(slot), want.as_slice());

    let query: Vec<f64> = (0..d).map(|i| 0.25 * i as f64 - 0.6).collect();
    let q_at = rotated(&table, &query, Point2::new(6.0, 2.0));
    let moved = dot(&q_at, out.token(slot));
    let placed = dot(&q_at, &rotated(&table, k0.token(slot), Point2::new(6.0, 2.0)));
    assert!((moved - placed).abs() <= 1e-12);
    // every other slot keeps standard encoding
    let standard = apply_rope(&k0, &table).unwrap();
    for i in (0..w * h).filter(|&i| i != slot) {
        assert_eq!(out.token(i), standard.token(i));
    }
}

fn tensor(n_heads: usize, d_head: usize, txt: usize, w: usize, h: usize, seed: u64) -> TokenTensor {
    let d = n_heads * d_head;
    let mut s = seed;
    let mut gen = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            })
            .collect()
    };
    TokenTensor::new(
        n_heads,
        d_head,
        Segment::text(txt, d, gen(txt * d)).unwrap(),
        Segment::image(SegmentKind::Target, w, h, d, gen(w * h * d)).unwrap(),
        Segment::image(SegmentKind::Reference, w, h, d, gen(w * h * d)).unwrap(),
    )
    .unwrap()
}

#[test]
fn masked_keys_get_exactly_zero_weight() {
    let (w, h) = (4, 3);
    let q = tensor(2, 4, 3, w, h, 1);
    let k = tensor(2, 4, 3, w, h, 2);
    let src = BinaryMask::from_bits(w, h, (0..12).map(|i| i % 3 != 0).collect()).unwrap();
    let dst = BinaryMask::from_bits(w, h, (0..12).map(|i| i % 4 == 1).collect()).unwrap();
    let mask = build_overlap_mask(&src, &dst, 3, 12, MaskPolicy::Verbatim).unwrap();
    assert!(mask.excluded_count() > 0);
    for query in 0..q.len() {
        for head in 0..2 {
            let wts = attention_weights(&q, &k, &mask, query, head).unwrap();
            let mut kept = 0.0;
            for (j, &wt) in wts.iter().enumerate() {
                if mask.is_excluded(j) {
                    assert_eq!(wt, 0.0);
                } else {
                    kept += wt;
                }
            }
            assert!((kept - 1.0).abs() <= 1e-6);
        }
    }
    let (_, stats) = joint_attention_with_stats(&q, &k, &k, &mask).unwrap();
    assert_eq!(stats.masked_mass, 0.0);
}

proptest! {
    #[test]
    fn softmax_ignores_constant_logit_shift(
        logits in proptest::collection::vec(-30.0..30.0f64, 1..40), c in -500.0..500.0f64,
    ) {
        let excluded = vec![false; logits.len()];
        let mut a = logits.clone();
        let mut b: Vec<f64> = logits.iter().map(|l| l + c).collect();
        masked_softmax(&mut a, &excluded);
        masked_softmax(&mut b, &excluded);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }
}
