//! Writes procedurally generated HR scenes as PNGs, e.g. to try the command
//! line tool without downloading a benchmark.
//!
//! cargo run --example generate_scenes -- <out_dir> [count] [size] [seed]

use std::path::PathBuf;

use deepam::scenes;

fn main() -> deepam::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "scenes".into()));
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let size: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(96);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    std::fs::create_dir_all(&dir)?;
    for (k, img) in scenes::scene_set(count, size, size, seed).iter().enumerate() {
        let path = dir.join(format!("scene{k:03}.png"));
        img.save_png(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}
