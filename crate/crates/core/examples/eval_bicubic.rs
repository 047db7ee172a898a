//! Bicubic baseline PSNR over a directory of HR images, the reference point
//! every learned model is compared against.
//!
//! cargo run --release --example eval_bicubic -- <test_dir> [scale]

use std::path::PathBuf;

use deepam::sr::{self, EvalOptions};

fn main() -> deepam::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: eval_bicubic <test_dir> [scale]");
        std::process::exit(2);
    };
    let scale: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let images = sr::load_luminance_dir(&dir)?;
    let (report, _) = sr::evaluate(None, scale, &images, &EvalOptions::default())?;
    print!("{}", report.to_text());
    Ok(())
}
