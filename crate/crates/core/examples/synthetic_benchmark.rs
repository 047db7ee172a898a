//! Trains DeepAM on procedurally generated scenes and compares it against
//! bicubic interpolation and the linear model on held-out scenes.
//!
//! cargo run --release --example synthetic_benchmark -- [arch] [pairs] [iters]

use std::time::Instant;

use deepam::patches::PatchGeometry;
use deepam::scenes;
use deepam::sr::{self, EvalOptions};
use deepam::train::{self, ArchSpec, BatchSchedule, TrainConfig};

fn main() -> deepam::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let arch: ArchSpec = args.next().as_deref().unwrap_or("64,64").parse()?;
    let pairs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);
    let iters: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);

    let geom = PatchGeometry::default();
    let train_images = scenes::scene_set(40, 96, 96, 1000);
    let data = sr::prepare_training_set(&train_images, &geom, 1, 0.0, 0)?;
    let data = sr::subsample(&data, pairs, 7);
    println!("training on {} pairs with arch {arch}", data.len());

    let test: Vec<(String, _)> = scenes::scene_set(5, 96, 96, 5000)
        .into_iter()
        .enumerate()
        .map(|(k, img)| (format!("scene{k}"), img.quantized()))
        .collect();

    let linear_cfg = TrainConfig {
        arch: ArchSpec::linear(),
        ..TrainConfig::default()
    };
    let (linear, _) = train::train(&data, &geom, &linear_cfg)?;

    let cfg = TrainConfig {
        arch,
        schedule: BatchSchedule {
            batches: 3,
            iters_per_batch: iters,
            ..BatchSchedule::default()
        },
        seed: 1,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let (model, report) = train::train(&data, &geom, &cfg)?;
    println!("trained in {:.1}s", t0.elapsed().as_secs_f64());
    for (i, l) in report.layers.iter().enumerate() {
        let ipad_min = l.survivor_fractions[..l.ipad_atoms].iter().cloned().fold(f64::INFINITY, f64::min);
        let cad_max = l.survivor_fractions[l.ipad_atoms..].iter().cloned().fold(0.0, f64::max);
        println!(
            "layer {}: rho_I {:e} rho_C {:?} | IPAD min survivors {:.3}, CAD max survivors {:.3}",
            i + 1,
            l.ipad_thresholds.rho,
            l.cad_thresholds.as_ref().map(|c| c.rho),
            ipad_min,
            cad_max
        );
    }
    println!("train MSE {:.4e} vs linear {:.4e}", report.train_mse, report.linear_train_mse);

    let opts = EvalOptions::default();
    let (lin_rep, _) = sr::evaluate(Some(&linear), geom.scale, &test, &opts)?;
    let (rep, _) = sr::evaluate(Some(&model), geom.scale, &test, &opts)?;
    println!("{}", rep.to_text());
    println!(
        "average PSNR: bicubic {:.2} dB, linear {:.2} dB, DeepAM {:.2} dB",
        rep.mean_bicubic(),
        lin_rep.mean_model().unwrap(),
        rep.mean_model().unwrap()
    );
    Ok(())
}
