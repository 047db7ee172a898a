//! Model containers survive a write/read cycle bit for bit, and patch
//! extraction followed by reconstruction reproduces the covered pixels.

mod common;

use common::random_model;
use deepam::io::{load_model, load_relu, model_from_bytes, model_to_bytes, relu_from_bytes, relu_to_bytes, save_model, save_relu};
use deepam::patches::{coverage_mask, extract_pairs, reconstruct};
use deepam::scenes::test_scene;
use deepam::{GrayImage, PatchGeometry};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn model_bytes_round_trip_exactly(
        widths in prop::collection::vec(1usize..30, 0..4), seed in 0u64..10_000, sigma in 0.0f64..0.5,
    ) {
        let mut model = random_model(&widths, seed);
        model.training_noise_sigma = sigma;
        let bytes = model_to_bytes(&model).unwrap();
        let back = model_from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(model_to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn relu_bytes_round_trip_exactly(widths in prop::collection::vec(1usize..20, 0..3), seed in 0u64..10_000) {
        let model = random_model(&widths, seed);
        let net = model.to_relu_network();
        let bytes = relu_to_bytes(&net, &model).unwrap();
        let back = relu_from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(relu_to_bytes(&back, &model).unwrap(), bytes);
    }

    #[test]
    fn any_single_byte_flip_is_rejected(seed in 0u64..10_000, pick in 0usize..usize::MAX, bit in 0u8..8) {
        let model = random_model(&[6, 4], seed);
        let mut bytes = model_to_bytes(&model).unwrap();
        let at = pick % bytes.len();
        bytes[at] ^= 1 << bit;
        prop_assert!(model_from_bytes(&bytes).is_err());
    }

    #[test]
    fn extract_then_reconstruct_is_identity_on_covered_pixels(
        h in 16usize..40, w in 16usize..40, stride in 1usize..4, seed in 0u64..10_000,
    ) {
        let geom = PatchGeometry::default();
        let mut rng = common::rng(seed);
        let pixels = (0..h * w * 4).map(|_| rng.random::<f64>()).collect();
        let hr = GrayImage::new(2 * h, 2 * w, pixels).unwrap();
        let data = extract_pairs(&hr, &geom, stride).unwrap();
        let fill = GrayImage::filled(2 * h, 2 * w, -1.0).unwrap();
        let out = reconstruct(&data.y, &data.lr_means, &data.positions, &geom, hr.dims(), &fill).unwrap();
        let mask = coverage_mask(&data.positions, &geom, hr.dims());
        prop_assert!(mask.iter().any(|m| *m));
        for (k, covered) in mask.iter().enumerate() {
            let (a, b) = (out.pixels()[k], hr.pixels()[k]);
            if *covered {
                prop_assert!((a - b).abs() <= 1e-12, "pixel {}: {} vs {}", k, a, b);
            } else {
                prop_assert_eq!(a, -1.0);
            }
        }
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = random_model(&[12, 10], 3);
    let path = dir.path().join("m.dam");
    save_model(&model, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), model);

    let net = model.to_relu_network();
    let relu_path = dir.path().join("m.relu");
    save_relu(&net, &model, &relu_path).unwrap();
    assert_eq!(load_relu(&relu_path).unwrap(), net);
    // A ReLU container is not a DeepAM model and vice versa.
    assert!(load_model(&relu_path).is_err());
    assert!(load_relu(&path).is_err());
}

#[test]
fn natural_looking_scene_reconstructs_from_its_own_patches() {
    let geom = PatchGeometry::default();
    let hr = test_scene(48, 60, 4);
    let data = extract_pairs(&hr, &geom, 1).unwrap();
    let out = reconstruct(&data.y, &data.lr_means, &data.positions, &geom, hr.dims(), &hr).unwrap();
    let worst = out.pixels().iter().zip(hr.pixels()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst <= 1e-12, "worst {worst:e}");
}
