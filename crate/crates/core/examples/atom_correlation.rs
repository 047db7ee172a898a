//! For a single-layer model, measures how well each analysis atom, mapped
//! back to the HR domain through the pseudo-inverse of the degradation,
//! lines up with its synthesis atom. Information-preserving atoms are
//! expected to align far better than clustering atoms.
//!
//! cargo run --release --example atom_correlation -- [model.dam]

use deepam::io;
use deepam::model::atom_correlation_diagnostic;
use deepam::patches::PatchGeometry;
use deepam::scenes;
use deepam::sr;
use deepam::train::{self, BatchSchedule, TrainConfig};

fn main() -> deepam::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => io::load_model(path)?,
        None => {
            let geom = PatchGeometry::default();
            let data = sr::prepare_training_set(&scenes::scene_set(20, 96, 96, 0), &geom, 2, 0.0, 0)?;
            let config = TrainConfig {
                arch: "128".parse()?,
                schedule: BatchSchedule {
                    iters_per_batch: 60,
                    ..BatchSchedule::single_batch()
                },
                ..TrainConfig::default()
            };
            train::train(&data, &geom, &config)?.0
        }
    };
    let corr = atom_correlation_diagnostic(&model)?;
    for (label, ipad) in [("IPAD", true), ("CAD", false)] {
        let v: Vec<f64> = corr.iter().filter(|c| c.ipad == ipad).map(|c| c.value.abs()).collect();
        if v.is_empty() {
            continue;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let max = v.iter().copied().fold(0.0, f64::max);
        println!("{label:>4}: {:>3} atoms, mean |corr| {mean:.3}, max {max:.3}", v.len());
    }
    Ok(())
}
