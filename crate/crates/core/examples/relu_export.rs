//! Converts a model into the equivalent rectifier network, checks that both
//! agree on random inputs and writes the network container.
//!
//! cargo run --release --example relu_export -- [model.dam] [out.relu]

use deepam::io;
use deepam::ipad::gaussian_matrix;
use deepam::patches::PatchGeometry;
use deepam::scenes;
use deepam::sr;
use deepam::train::{self, BatchSchedule, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> deepam::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next().filter(|a| a != "-") {
        Some(path) => io::load_model(path)?,
        None => {
            let geom = PatchGeometry::default();
            let data = sr::prepare_training_set(&scenes::scene_set(8, 96, 96, 0), &geom, 2, 0.0, 0)?;
            let config = TrainConfig {
                arch: "48,48,48".parse()?,
                schedule: BatchSchedule {
                    iters_per_batch: 20,
                    ..BatchSchedule::single_batch()
                },
                ..TrainConfig::default()
            };
            train::train(&data, &geom, &config)?.0
        }
    };
    let out = args.next().unwrap_or_else(|| "deepam.relu".into());

    let net = model.to_relu_network();
    let widths: Vec<usize> = net.layers.iter().map(|l| l.weight.nrows()).collect();
    println!("analysis widths {:?} -> rectifier widths {widths:?}", model.layers.iter().map(|l| l.d_out()).collect::<Vec<_>>());

    let x = gaussian_matrix(model.input_dim(), 10_000, &mut ChaCha8Rng::seed_from_u64(0)) * 0.2;
    let a = model.forward_batch(&x)?;
    let b = net.forward_batch(&x)?;
    let dev = a.iter().zip(b.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    println!("max deviation over 10^4 random patches: {dev:.2e}");

    io::save_relu(&net, &model, &out)?;
    println!("wrote {out}");
    Ok(())
}
