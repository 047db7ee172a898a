//! Trains a model from a directory of HR images (or generated scenes when no
//! directory is given) and saves it with its JSON training report.
//!
//! cargo run --release --example train_model -- [train_dir] [out.dam] [arch]

use std::path::PathBuf;

use deepam::io;
use deepam::patches::PatchGeometry;
use deepam::scenes;
use deepam::sr;
use deepam::train::{self, BatchSchedule, TrainConfig};

fn main() -> deepam::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let dir = args.next().filter(|a| a != "-").map(PathBuf::from);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "deepam.dam".into()));
    let arch = args.next().as_deref().unwrap_or("128,128").parse()?;

    let images = match &dir {
        Some(d) => sr::load_luminance_dir(d)?.into_iter().map(|(_, img)| img).collect(),
        None => scenes::scene_set(24, 96, 96, 0),
    };
    let geom = PatchGeometry::default();
    let data = sr::subsample(&sr::prepare_training_set(&images, &geom, 1, 0.0, 0)?, 10_000, 0);

    let config = TrainConfig {
        arch,
        schedule: BatchSchedule {
            batches: 3,
            iters_per_batch: 50,
            ..BatchSchedule::default()
        },
        ..TrainConfig::default()
    };
    let (model, report) = train::train(&data, &geom, &config)?;
    io::save_model(&model, &out)?;
    let report_path = out.with_extension("json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report serializes"))?;

    println!("{} pairs, LR patch rank {}", report.samples, report.lr_rank);
    for (i, l) in report.layers.iter().enumerate() {
        println!(
            "layer {}: {} -> {} IPAD + {} CAD atoms, rho_I {:e}, rho_C {:?}",
            i + 1,
            l.d_in,
            l.ipad_atoms,
            l.cad_atoms,
            l.ipad_thresholds.rho,
            l.cad_thresholds.as_ref().map(|c| c.rho)
        );
    }
    println!("training MSE {:.4e} (linear {:.4e})", report.train_mse, report.linear_train_mse);
    println!("wrote {} and {}", out.display(), report_path.display());
    Ok(())
}
