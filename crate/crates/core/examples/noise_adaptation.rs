//! Trains on noisy LR inputs at `sigma_n` and evaluates at several test noise
//! levels, with and without rescaling the first-layer thresholds to the test
//! noise.
//!
//! cargo run --release --example noise_adaptation -- [sigma_n]

use deepam::patches::PatchGeometry;
use deepam::scenes;
use deepam::sr::{self, EvalOptions};
use deepam::train::{self, BatchSchedule, TrainConfig};
use deepam::GrayImage;

fn main() -> deepam::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let sigma_n: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let geom = PatchGeometry::default();
    let train_images = scenes::scene_set(24, 96, 96, 0);
    let data = sr::prepare_training_set(&train_images, &geom, 1, sigma_n, 0)?;
    let data = sr::subsample(&data, 10_000, 0);
    let config = TrainConfig {
        arch: "160".parse()?,
        schedule: BatchSchedule {
            iters_per_batch: 100,
            ..BatchSchedule::single_batch()
        },
        training_noise_sigma: sigma_n,
        ..TrainConfig::default()
    };
    let (model, _) = train::train(&data, &geom, &config)?;

    let test: Vec<(String, GrayImage)> = scenes::scene_set(4, 128, 128, 900)
        .into_iter()
        .enumerate()
        .map(|(k, img)| (format!("scene{k}"), img.quantized()))
        .collect();
    println!("trained at sigma_n = {sigma_n}");
    println!("{:>8}  {:>8}  {:>10}  {:>8}", "sigma_t", "bicubic", "unscaled", "rescaled");
    for factor in [0.5, 1.0, 1.5, 2.0] {
        let sigma_t = factor * sigma_n;
        let eval = |rescale: bool| {
            let opts = EvalOptions {
                sigma_t,
                rescale,
                ..EvalOptions::default()
            };
            sr::evaluate(Some(&model), geom.scale, &test, &opts).map(|(r, _)| r)
        };
        let (plain, scaled) = (eval(false)?, eval(true)?);
        println!(
            "{sigma_t:>8.3}  {:>8.2}  {:>10.2}  {:>8.2}",
            plain.mean_bicubic(),
            plain.mean_model().unwrap_or(f64::NAN),
            scaled.mean_model().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
