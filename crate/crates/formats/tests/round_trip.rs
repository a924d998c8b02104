use dragkit_core::{BinaryMask, HullMode, LrmConfig, MaskPolicy};
use dragkit_formats::{DragSpecFile, FieldFile, ImageSize, InjectionOverrides, PixelPair, Raster};
use proptest::prelude::*;

fn arb_spec() -> impl Strategy<Value = DragSpecFile> {
    (1usize..2048, 1usize..2048, 1usize..33).prop_flat_map(|(w, h, f)| {
        let point = (0.0..w as f64, 0.0..h as f64).prop_map(|(x, y)| [x, y]);
        let pair = (point.clone(), point).prop_map(|(source, target)| PixelPair { source, target });
        (
            prop::collection::vec(pair, 1..6),
            prop::option::of((0usize..4, any::<bool>())),
            prop::option::of(prop::collection::btree_set(0usize..8, 0..4)),
            prop::option::of(any::<bool>()),
        )
            .prop_map(move |(pairs, lrm, subset, keep_bg)| DragSpecFile {
                image: ImageSize { width_px: w, height_px: h },
                downscale_factor: f,
                pairs,
                mask: "mask.pgm".into(),
                lrm: lrm.map(|(r, global)| LrmConfig {
                    dilation_radius: r,
                    hull_mode: if global { HullMode::Global } else { HullMode::PerComponent },
                    ..LrmConfig::default()
                }),
                injection: subset.map(|s| InjectionOverrides { block_subset: Some(s), ..Default::default() }),
                mask_policy: keep_bg.map(|k| if k { MaskPolicy::KeepBackground } else { MaskPolicy::Verbatim }),
            })
    })
}

proptest! {
    #[test]
    fn field_file_round_trip_is_bit_exact(
        w in 1u32..12, h in 1u32..12, c in 1u32..4, seed in any::<u64>()
    ) {
        let n = (w * h * c) as usize;
        let mut state = seed;
        let values: Vec<f32> = (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f32::from_bits((state >> 32) as u32)
            })
            .collect();
        let file = FieldFile::new(w, h, c, values).unwrap();
        let bytes = file.to_bytes();
        prop_assert_eq!(bytes.len(), 16 + n * 4);
        prop_assert_eq!(&bytes[..4], b"DKF1");
        let back = FieldFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!((back.width, back.height, back.channels), (w, h, c));
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.values), bits(&file.values));
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn spec_parse_serialize_is_a_fixed_point(spec in arb_spec()) {
        let once = DragSpecFile::parse(&spec.to_json()).unwrap();
        prop_assert_eq!(&once, &spec);
        let text = once.to_json();
        prop_assert_eq!(DragSpecFile::parse(&text).unwrap().to_json(), text);
    }

    #[test]
    fn mask_rle_round_trip(w in 1usize..20, h in 1usize..20, bits in prop::collection::vec(any::<bool>(), 400)) {
        let m = BinaryMask::from_bits(w, h, bits[..w * h].to_vec()).unwrap();
        let rle = m.to_rle();
        prop_assert_eq!(rle.iter().sum::<usize>(), w * h);
        prop_assert_eq!(BinaryMask::from_rle(w, h, &rle).unwrap(), m);
    }

    #[test]
    fn raster_pnm_and_png_round_trip(w in 1usize..24, h in 1usize..24, rgb in any::<bool>(), seed in any::<u8>()) {
        let c = if rgb { 3 } else { 1 };
        let data = (0..w * h * c).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let r = Raster::new(w, h, c, data).unwrap();
        prop_assert_eq!(Raster::decode(&r.to_pnm()).unwrap(), r.clone());
        prop_assert_eq!(Raster::decode(&r.to_png().unwrap()).unwrap(), r);
    }
}

#[test]
fn payload_is_little_endian_on_any_host() {
    let file = FieldFile::new(1, 1, 2, vec![-3.0, 0.5]).unwrap();
    let bytes = file.to_bytes();
    assert_eq!(&bytes[16..20], &(-3.0f32).to_bits().to_le_bytes());
    assert_eq!(&bytes[16..20], &[0x00, 0x00, 0x40, 0xc0]);
    assert_eq!(&bytes[20..24], &[0x00, 0x00, 0x00, 0x3f]);
}
