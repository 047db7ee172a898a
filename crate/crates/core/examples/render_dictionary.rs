//! Renders every layer of a model as an atom mosaic. Each atom is drawn as a
//! patch in the LR domain (deeper layers as the product of the analysis
//! dictionaries so far); the clustering atoms are outlined in blue.
//!
//! cargo run --release --example render_dictionary -- [model.dam] [out_prefix]

use deepam::io;
use deepam::patches::PatchGeometry;
use deepam::render::{render_layer, MosaicStyle};
use deepam::scenes;
use deepam::sr;
use deepam::train::{self, BatchSchedule, TrainConfig};

fn main() -> deepam::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next().filter(|a| a != "-") {
        Some(path) => io::load_model(path)?,
        None => {
            let geom = PatchGeometry::default();
            let data = sr::prepare_training_set(&scenes::scene_set(12, 96, 96, 0), &geom, 2, 0.0, 0)?;
            let config = TrainConfig {
                arch: "64,64".parse()?,
                schedule: BatchSchedule {
                    iters_per_batch: 60,
                    ..BatchSchedule::single_batch()
                },
                ..TrainConfig::default()
            };
            train::train(&data, &geom, &config)?.0
        }
    };
    let prefix = args.next().unwrap_or_else(|| "dictionary".into());
    for layer in 1..=model.depth() {
        let path = format!("{prefix}_layer{layer}.png");
        let l = &model.layers[layer - 1];
        render_layer(&model, layer, &MosaicStyle::default())?.save_png(&path)?;
        println!("layer {layer}: {} IPAD + {} CAD atoms -> {path}", l.ipad_atoms, l.cad_atoms());
    }
    Ok(())
}
