//! The `deepam` binary end to end on a handful of generated scenes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deepam::metrics::psnr;
use deepam::resize::downscale;
use deepam::scenes::test_scene;
use deepam::GrayImage;

fn deepam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepam"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        for (sub, seed, count) in [("train", 0u64, 4), ("test", 100, 2)] {
            fs::create_dir(root.join(sub)).unwrap();
            for k in 0..count {
                let img = test_scene(64, 64, seed + k);
                img.save_png(root.join(sub).join(format!("s{k}.png"))).unwrap();
            }
        }
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn train(&self, out: &str, arch: &str, extra: &[&str]) -> Output {
        let train_dir = self.path("train");
        let out = self.path(out);
        let mut args = vec![
            "train", "--train-dir", s(&train_dir), "--out", s(&out), "--arch", arch, "--iters", "5",
            "--max-pairs", "1500", "--batches", "1", "--seed", "7",
        ];
        args.extend_from_slice(extra);
        deepam(&args)
    }
}

#[test]
fn every_subcommand_runs_on_a_tiny_model() {
    let ws = Workspace::new();
    ok(ws.train("m.dam", "48", &[]));
    let model = ws.path("m.dam");
    assert!(ws.path("m.json").exists(), "training report written next to the model");

    // sr with a reference: the LR input is the downscaled reference.
    let reference = ws.path("test/s0.png");
    let hr = GrayImage::load(&reference).unwrap();
    let lr = downscale(&hr, 2).unwrap().quantized();
    let lr_path = ws.path("lr.png");
    lr.save_png(&lr_path).unwrap();
    let sr_out = ws.path("sr.png");
    let o = ok(deepam(&["sr", "--model", s(&model), "--input", s(&lr_path), "--out", s(&sr_out), "--reference", s(&reference)]));
    assert!(stdout(&o).contains("PSNR"), "{}", stdout(&o));
    assert_eq!(GrayImage::load(&sr_out).unwrap().dims(), (64, 64));

    let self_out = ws.path("self.png");
    ok(deepam(&["self-sr", "--input", s(&lr_path), "--out", s(&self_out), "--arch", "40", "--iters", "3"]));
    assert_eq!(GrayImage::load(&self_out).unwrap().dims(), (64, 64));

    let mosaic = ws.path("dict.png");
    ok(deepam(&["render-dict", "--model", s(&model), "--out", s(&mosaic)]));
    assert!(mosaic.exists());

    let relu = ws.path("m.relu");
    let o = ok(deepam(&["export-relu", "--model", s(&model), "--out", s(&relu)]));
    assert!(stdout(&o).contains("hidden widths"));
    let net = deepam::io::load_relu(&relu).unwrap();
    assert_eq!(net.layers[0].weight.nrows(), 2 * deepam::io::load_model(&model).unwrap().layers[0].d_out());
}

#[test]
fn eval_psnr_matches_the_written_outputs() {
    let ws = Workspace::new();
    ok(ws.train("m.dam", "48", &[]));
    let out_dir = ws.path("eval");
    let o = ok(deepam(&[
        "eval", "--test-dir", s(&ws.path("test")), "--model", s(&ws.path("m.dam")), "--report", "csv",
        "--out-dir", s(&out_dir),
    ]));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("image,bicubic_psnr,model_psnr"));
    for line in lines.filter(|l| !l.starts_with("average")) {
        let cells: Vec<&str> = line.split(',').collect();
        let name = cells[0];
        let reference = GrayImage::load(ws.path("test").join(format!("{name}.png"))).unwrap().modcrop(2).unwrap();
        for (col, suffix) in [(1, "bicubic"), (2, "deepam")] {
            let written = GrayImage::load(out_dir.join(format!("{name}_{suffix}.png"))).unwrap();
            let external = psnr(&written, &reference.quantized()).unwrap();
            let reported: f64 = cells[col].parse().unwrap();
            assert!((external - reported).abs() < 1e-4, "{name} {suffix}: {external} vs {reported}");
        }
    }
}

#[test]
fn fixed_seed_training_is_bit_reproducible() {
    let ws = Workspace::new();
    ok(ws.train("a.dam", "48", &[]));
    ok(ws.train("b.dam", "48", &[]));
    assert_eq!(fs::read(ws.path("a.dam")).unwrap(), fs::read(ws.path("b.dam")).unwrap());
}

#[test]
fn exit_codes_classify_failures() {
    let ws = Workspace::new();
    // Config: malformed flag values and invalid settings.
    assert_eq!(ws.train("x.dam", "48", &["--sigma-n", "-1"]).status.code(), Some(2));
    assert_eq!(ws.train("x.dam", "abc", &[]).status.code(), Some(2));
    assert_eq!(deepam(&["train"]).status.code(), Some(2));
    // Data: missing directory, an IPAD smaller than the patch rank, a
    // corrupt model file.
    let missing = ws.path("nope");
    let out = ws.path("x.dam");
    assert_eq!(deepam(&["train", "--train-dir", s(&missing), "--out", s(&out)]).status.code(), Some(3));
    assert_eq!(ws.train("x.dam", "48:10", &[]).status.code(), Some(3));
    let junk = ws.path("junk.dam");
    fs::write(&junk, b"not a model").unwrap();
    let o = deepam(&["export-relu", "--model", s(&junk), "--out", s(&ws.path("j.relu"))]);
    assert_eq!(o.status.code(), Some(3));
    // Test-noise rescaling needs a noise-trained model.
    ok(ws.train("clean.dam", "48", &[]));
    let lr = ws.path("test/s1.png");
    let o = deepam(&["sr", "--model", s(&ws.path("clean.dam")), "--input", s(&lr), "--out", s(&ws.path("o.png")), "--sigma-t", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let ws = Workspace::new();
    let cfg = ws.path("run.toml");
    fs::write(&cfg, "arch = \"40\"\niters = 3\nseed = 7\n").unwrap();
    let train_dir = ws.path("train");
    let from_file = ws.path("f.dam");
    ok(deepam(&["--config", s(&cfg), "train", "--train-dir", s(&train_dir), "--out", s(&from_file), "--max-pairs", "800"]));
    assert_eq!(deepam::io::load_model(&from_file).unwrap().layers[0].d_out(), 40);
    let flagged = ws.path("g.dam");
    ok(deepam(&[
        "--config", s(&cfg), "train", "--train-dir", s(&train_dir), "--out", s(&flagged), "--max-pairs", "800",
        "--arch", "44",
    ]));
    assert_eq!(deepam::io::load_model(&flagged).unwrap().layers[0].d_out(), 44);

    fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = deepam(&["--config", s(&cfg), "train", "--train-dir", s(&train_dir), "--out", s(&flagged)]);
    assert_eq!(o.status.code(), Some(2));
}
