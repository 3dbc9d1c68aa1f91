use idspace::data::dataset::{decode_dataset, encode_dataset};
use idspace::data::{
    extract_crops, generate_scene, mask_iou, normalize_pose, Dataset, InteractionImage, Split, PLANE, PROTOTYPE_COUNT,
};
use proptest::prelude::*;

#[test]
fn hand_rarely_covers_object() {
    for p in 0..PROTOTYPE_COUNT {
        let mut worst = 0.0f64;
        for seed in 0..1000 {
            let s = generate_scene(p, seed).unwrap();
            let hand: f32 = s.hand_mask.iter().sum();
            let both: f32 = s.hand_mask.iter().zip(&s.object_mask).map(|(h, o)| h * o).sum();
            assert!(hand > 0.0, "prototype {p} seed {seed} has no hand");
            worst = worst.max((both / hand) as f64);
        }
        assert!(worst <= 0.30, "prototype {p}: overlap {worst:.3} of hand area");
    }
}

#[test]
fn hundreds_of_crops_per_scene() {
    for p in 0..PROTOTYPE_COUNT {
        let s = generate_scene(p, 7).unwrap();
        let crops = extract_crops(&s, 300, 0.10, 1).unwrap();
        assert_eq!(crops.len(), 300);
        assert!(crops.iter().all(|c| c.interaction.hand_fraction() >= 0.10));
        let mut corners: Vec<(usize, usize)> = crops.iter().map(|c| (c.x0, c.y0)).collect();
        corners.sort_unstable();
        corners.dedup();
        assert!(corners.len() > 50, "prototype {p}: only {} distinct windows", corners.len());
    }
}

#[test]
fn zero_fraction_accepts_any_window() {
    let s = generate_scene(1, 3).unwrap();
    let crops = extract_crops(&s, 200, 0.0, 2).unwrap();
    assert!(crops.iter().any(|c| c.interaction.hand_fraction() == 0.0));
}

#[test]
fn half_turn_twice_is_near_identity() {
    for p in 0..PROTOTYPE_COUNT {
        let s = generate_scene(p, 11).unwrap();
        let img = s.window(16, 16).unwrap();
        let back = normalize_pose(&normalize_pose(&img, std::f32::consts::PI, (0.0, 0.0)), std::f32::consts::PI, (0.0, 0.0));
        if img.object_mask().iter().sum::<f32>() > 20.0 {
            assert!(mask_iou(back.object_mask(), img.object_mask(), 0.5) >= 0.9, "prototype {p}");
        }
    }
}

fn plane() -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(0.0f32..=1.0, PLANE)
}

fn mask() -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1.0 } else { 0.0 }), PLANE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn dataset_round_trip(
        items in prop::collection::vec((plane(), mask(), mask(), prop::option::of(0u8..12)), 0..4),
        seed in prop::option::of(any::<u64>()),
        test in any::<bool>(),
    ) {
        let items: Vec<InteractionImage> = items
            .into_iter()
            .map(|(a, h, o, l)| InteractionImage::new(&a, &h, &o).unwrap().with_label(l))
            .collect();
        let ds = Dataset { items, split: Some(if test { Split::Test } else { Split::Train }), seed };
        let back = decode_dataset(&encode_dataset(&ds)).unwrap();
        prop_assert_eq!(back.items, ds.items);
    }
}
