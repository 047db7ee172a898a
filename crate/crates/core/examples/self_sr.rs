//! Self-example super-resolution: the model is trained on the input image
//! and its own downscaled copy, then applied to the input. Without
//! arguments, a generated scene is degraded and restored, and both the
//! bicubic and the self-example PSNR are reported.
//!
//! cargo run --release --example self_sr -- [input.png output.png]

use deepam::metrics::psnr;
use deepam::patches::PatchGeometry;
use deepam::scenes::test_scene;
use deepam::sr::{self, EvalOptions, SelfSrConfig};
use deepam::train::ArchSpec;
use deepam::GrayImage;

fn main() -> deepam::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let geom = PatchGeometry::default();
    let mut config = SelfSrConfig::default();
    config.train.arch = "128,128".parse::<ArchSpec>()?;
    config.train.schedule.iters_per_batch = 200;

    if let [input, output] = args.as_slice() {
        let lr = GrayImage::load(input)?;
        let out = sr::self_example_sr(&lr, &geom, &config)?;
        out.image.save_png(output)?;
        println!("trained on {} self-example pairs; wrote {output}", out.report.samples);
        return Ok(());
    }

    let hr = test_scene(192, 192, 11).quantized();
    let (report, images) = sr::evaluate(None, geom.scale, &[("scene".into(), hr)], &EvalOptions::default())?;
    let out = sr::self_example_sr(&images[0].lr, &geom, &config)?;
    let restored = psnr(&out.image.quantized(), &images[0].reference)?;
    println!("bicubic      {:.2} dB", report.mean_bicubic());
    println!("self-example {restored:.2} dB ({} training pairs)", out.report.samples);
    Ok(())
}
