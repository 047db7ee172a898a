//! Upscales an image with a trained model. Colour inputs have their
//! luminance super-resolved and their chroma upscaled bicubically.
//!
//! cargo run --release --example super_resolve -- <model.dam> <input> <output.png>

use deepam::image::RgbImage;
use deepam::io;
use deepam::sr::{self, SrOptions};

fn main() -> deepam::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [model, input, output] = args.as_slice() else {
        eprintln!("usage: super_resolve <model.dam> <input> <output.png>");
        std::process::exit(2);
    };
    let model = io::load_model(model)?;
    let lr = RgbImage::load(input)?;
    let hr = sr::super_resolve_rgb(&model, &lr, &SrOptions::default())?;
    hr.save_png(output)?;
    println!("{}x{} -> {}x{}: wrote {output}", lr.width, lr.height, hr.width, hr.height);
    Ok(())
}
