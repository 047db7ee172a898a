use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use deepam::config::{self, check_positive, check_sigma, grid_from_bounds, FileConfig, ReportFormat};
use deepam::image::{GrayImage, RgbImage, YCbCr};
use deepam::io;
use deepam::metrics;
use deepam::patches::PatchGeometry;
use deepam::render::{self, MosaicStyle};
use deepam::sr::{self, EvalOptions, SelfSrConfig, SrOptions};
use deepam::thresholds::ThresholdSearchGrid;
use deepam::train::{self, ArchSpec, BatchSchedule, TrainConfig};
use deepam::{Error, Result};

#[derive(Parser)]
#[command(name = "deepam", version, about = "Deep analysis dictionary super-resolution")]
struct Cli {
    /// TOML file with default values for the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GridFlags {
    /// Smallest decade exponent of the threshold-scaling grid.
    #[arg(long, allow_negative_numbers = true)]
    grid_min: Option<i32>,
    /// Largest decade exponent of the threshold-scaling grid.
    #[arg(long, allow_negative_numbers = true)]
    grid_max: Option<i32>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a directory of HR images.
    Train {
        #[arg(long)]
        train_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-layer atoms, e.g. "256,256,256" or "256:35,256:35"; "none" for
        /// the linear model.
        #[arg(long)]
        arch: Option<String>,
        /// Noise added to the LR training inputs.
        #[arg(long)]
        sigma_n: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// LR patch stride for training pairs.
        #[arg(long)]
        stride: Option<usize>,
        #[command(flatten)]
        grid: GridFlags,
        /// Randomly keep at most this many pairs.
        #[arg(long)]
        max_pairs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        batches: Option<usize>,
        /// Optimizer iterations per batch.
        #[arg(long)]
        iters: Option<usize>,
        /// Where to write the JSON training report (default: the model path
        /// with a `.json` extension).
        #[arg(long)]
        report_json: Option<PathBuf>,
    },
    /// Super-resolve an LR image with a trained model.
    Sr {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Input noise level; rescales the first-layer thresholds.
        #[arg(long)]
        sigma_t: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
        /// Ground-truth HR image for PSNR reporting.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Train on the input and its own downscaled copy, then super-resolve it.
    SelfSr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Inference stride.
        #[arg(long)]
        stride: Option<usize>,
        /// Stride of the self-example training pairs.
        #[arg(long)]
        train_stride: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[command(flatten)]
        grid: GridFlags,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// PSNR table over a directory of HR test images.
    Eval {
        #[arg(long)]
        test_dir: PathBuf,
        /// Model to evaluate; without it only bicubic is reported.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Upscaling factor when no model is given.
        #[arg(long, default_value_t = 2)]
        scale: usize,
        /// Noise added to the LR test inputs.
        #[arg(long)]
        sigma_t: Option<f64>,
        /// Keep the trained thresholds even when sigma-t differs.
        #[arg(long)]
        no_rescale: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        stride: Option<usize>,
        /// Border pixels excluded from PSNR.
        #[arg(long)]
        shave: Option<usize>,
        #[arg(long, value_enum)]
        report: Option<ReportFormat>,
        /// Directory for the restored images.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a layer's atoms as a PNG mosaic.
    RenderDict {
        #[arg(long)]
        model: PathBuf,
        /// 1-based layer index.
        #[arg(long, default_value_t = 1)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        zoom: usize,
    },
    /// Write the equivalent rectifier network.
    ExportRelu {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn echo<T: Serialize>(command: &str, resolved: &T) {
    let json = serde_json::to_string(resolved).expect("config serializes");
    eprintln!("{command} config: {json}");
}

fn grid(flags: &GridFlags, file: &FileConfig) -> Result<ThresholdSearchGrid> {
    grid_from_bounds(
        flags.grid_min.or(file.grid_min).unwrap_or(-4),
        flags.grid_max.or(file.grid_max).unwrap_or(1),
    )
}

fn arch(flag: Option<String>, file: &FileConfig) -> Result<ArchSpec> {
    flag.or_else(|| file.arch.clone())
        .unwrap_or_else(|| "256,256,256".into())
        .parse()
        .map_err(|e: Error| Error::InvalidArgument(e.to_string()))
}

/// Reference luminance cropped to `dims` (the SR output size).
fn load_reference(path: &Path, dims: (usize, usize)) -> Result<GrayImage> {
    let r = sr::ground_truth(&GrayImage::load(path)?);
    if r.height() < dims.0 || r.width() < dims.1 {
        return Err(Error::DimensionMismatch(format!(
            "reference is {:?}, output {dims:?}",
            r.dims()
        )));
    }
    r.crop(0, 0, dims.0, dims.1)
}

fn report_psnr(label: &str, out_y: &GrayImage, lr_y: &GrayImage, scale: usize, reference: &Path) -> Result<()> {
    let reference = load_reference(reference, out_y.dims())?;
    let bicubic = sr::bicubic_upscale(lr_y, scale)?.quantized();
    let ours = metrics::psnr(&out_y.quantized(), &reference)?;
    let base = metrics::psnr(&bicubic, &reference)?;
    println!("{label} PSNR {ours:.4} dB (bicubic {base:.4} dB)");
    Ok(())
}

/// Input luminance and, for colour inputs, the chroma planes.
fn load_input(path: &Path) -> Result<(RgbImage, GrayImage, Option<YCbCr>)> {
    let rgb = RgbImage::load(path)?;
    if rgb.is_gray() {
        let y = GrayImage::from_u8(rgb.height, rgb.width, &rgb.data)?;
        Ok((rgb, y, None))
    } else {
        let ycc = YCbCr::from_rgb(&rgb)?;
        Ok((rgb, ycc.y.clone(), Some(ycc)))
    }
}

fn write_output(out_y: &GrayImage, chroma: Option<&YCbCr>, scale: usize, path: &Path) -> Result<()> {
    match chroma {
        None => out_y.save_png(path),
        Some(c) => YCbCr {
            y: out_y.clone(),
            cb: sr::bicubic_upscale(&c.cb, scale)?,
            cr: sr::bicubic_upscale(&c.cr, scale)?,
        }
        .to_rgb()?
        .save_png(path),
    }
}

#[derive(Serialize)]
struct TrainResolved<'a> {
    train_dir: &'a Path,
    out: &'a Path,
    arch: String,
    sigma_n: f64,
    seed: u64,
    stride: usize,
    grid_min: i32,
    grid_max: i32,
    max_pairs: Option<usize>,
    schedule: BatchSchedule,
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Train {
            train_dir,
            out,
            arch: arch_flag,
            sigma_n,
            seed,
            stride,
            grid: grid_flags,
            max_pairs,
            batch_size,
            batches,
            iters,
            report_json,
        } => {
            let arch = arch(arch_flag, &file)?;
            let sigma_n = check_sigma("sigma-n", sigma_n.or(file.sigma_n).unwrap_or(0.0))?;
            let seed = seed.or(file.seed).unwrap_or(0);
            let stride = check_positive("stride", stride.or(file.stride).unwrap_or(1))?;
            let grid = grid(&grid_flags, &file)?;
            let max_pairs = max_pairs.or(file.max_pairs);
            let defaults = BatchSchedule::default();
            let schedule = BatchSchedule {
                batch_size: check_positive("batch-size", batch_size.or(file.batch_size).unwrap_or(defaults.batch_size))?,
                batches: check_positive("batches", batches.or(file.batches).unwrap_or(defaults.batches))?,
                iters_per_batch: iters.or(file.iters).unwrap_or(defaults.iters_per_batch),
                thresholds_every_batch: false,
            };
            echo(
                "train",
                &TrainResolved {
                    train_dir: &train_dir,
                    out: &out,
                    arch: arch.to_string(),
                    sigma_n,
                    seed,
                    stride,
                    grid_min: grid_flags.grid_min.or(file.grid_min).unwrap_or(-4),
                    grid_max: grid_flags.grid_max.or(file.grid_max).unwrap_or(1),
                    max_pairs,
                    schedule,
                },
            );
            let geom = PatchGeometry {
                stride,
                ..PatchGeometry::default()
            };
            let images: Vec<GrayImage> = sr::load_luminance_dir(&train_dir)?.into_iter().map(|(_, i)| i).collect();
            let data = sr::prepare_training_set(&images, &geom, stride, sigma_n, seed)?;
            let data = match max_pairs {
                Some(m) => sr::subsample(&data, check_positive("max-pairs", m)?, seed),
                None => data,
            };
            info!("{} images, {} training pairs", images.len(), data.len());
            let cfg = TrainConfig {
                arch,
                schedule,
                grid,
                seed,
                training_noise_sigma: sigma_n,
                ..TrainConfig::default()
            };
            let (model, report) = train::train(&data, &geom, &cfg)?;
            io::save_model(&model, &out)?;
            let report_path = report_json.unwrap_or_else(|| out.with_extension("json"));
            fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report serializes"))?;
            println!(
                "wrote {} ({} layers, training MSE {:.4e}, linear {:.4e}); report {}",
                out.display(),
                model.depth(),
                report.train_mse,
                report.linear_train_mse,
                report_path.display()
            );
        }
        Command::Sr {
            model,
            input,
            out,
            sigma_t,
            stride,
            reference,
        } => {
            let sigma_t = sigma_t.or(file.sigma_t).map(|s| check_sigma("sigma-t", s)).transpose()?;
            let opts = SrOptions {
                stride: check_positive("stride", stride.or(file.stride).unwrap_or(1))?,
                sigma_t,
            };
            echo("sr", &serde_json::json!({
                "model": model, "input": input, "out": out, "options": opts, "reference": reference
            }));
            let model = io::load_model(&model)?;
            if sigma_t.is_some() && model.training_noise_sigma == 0.0 {
                return Err(Error::InvalidArgument(
                    "--sigma-t needs a model trained with --sigma-n > 0".into(),
                ));
            }
            let (_, y, chroma) = load_input(&input)?;
            let hr = sr::super_resolve(&model, &y, &opts)?;
            write_output(&hr, chroma.as_ref(), model.geometry.scale, &out)?;
            println!("wrote {} ({}x{})", out.display(), hr.height(), hr.width());
            if let Some(r) = reference {
                report_psnr("DeepAM", &hr, &y, model.geometry.scale, &r)?;
            }
        }
        Command::SelfSr {
            input,
            out,
            arch: arch_flag,
            seed,
            stride,
            train_stride,
            iters,
            grid: grid_flags,
            reference,
        } => {
            let mut cfg = SelfSrConfig::default();
            cfg.train.arch = arch(arch_flag, &file)?;
            cfg.train.seed = seed.or(file.seed).unwrap_or(0);
            cfg.train.grid = grid(&grid_flags, &file)?;
            cfg.train.schedule.iters_per_batch = iters.or(file.iters).unwrap_or(cfg.train.schedule.iters_per_batch);
            cfg.sr.stride = check_positive("stride", stride.or(file.stride).unwrap_or(1))?;
            cfg.train_stride = check_positive("train-stride", train_stride.or(file.train_stride).unwrap_or(1))?;
            echo("self-sr", &serde_json::json!({
                "input": input, "out": out, "arch": cfg.train.arch.to_string(), "settings": cfg, "reference": reference
            }));
            let (_, y, chroma) = load_input(&input)?;
            let geom = PatchGeometry::default();
            let outcome = sr::self_example_sr(&y, &geom, &cfg)?;
            write_output(&outcome.image, chroma.as_ref(), geom.scale, &out)?;
            println!(
                "wrote {} ({} training pairs{})",
                out.display(),
                outcome.report.samples,
                if outcome.used_linear_fallback { ", linear fallback" } else { "" }
            );
            if let Some(r) = reference {
                report_psnr("self-example", &outcome.image, &y, geom.scale, &r)?;
            }
        }
        Command::Eval {
            test_dir,
            model,
            scale,
            sigma_t,
            no_rescale,
            seed,
            stride,
            shave,
            report,
            out_dir,
        } => {
            let opts = EvalOptions {
                stride: check_positive("stride", stride.or(file.stride).unwrap_or(1))?,
                shave: shave.or(file.shave).unwrap_or(0),
                sigma_t: check_sigma("sigma-t", sigma_t.or(file.sigma_t).unwrap_or(0.0))?,
                noise_seed: seed.or(file.seed).unwrap_or(0),
                rescale: !no_rescale,
            };
            let format = report.or(file.report).unwrap_or_default();
            echo("eval", &serde_json::json!({
                "test_dir": test_dir, "model": model, "scale": scale, "options": opts,
                "report": format, "out_dir": out_dir
            }));
            let model = model.map(io::load_model).transpose()?;
            let scale = model.as_ref().map(|m| m.geometry.scale).unwrap_or(check_positive("scale", scale)?);
            let images = sr::load_luminance_dir(&test_dir)?;
            let (table, outputs) = sr::evaluate(model.as_ref(), scale, &images, &opts)?;
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)?;
                for o in &outputs {
                    o.bicubic.save_png(dir.join(format!("{}_bicubic.png", o.name)))?;
                    if let Some(m) = &o.model {
                        m.save_png(dir.join(format!("{}_deepam.png", o.name)))?;
                    }
                }
            }
            match format {
                ReportFormat::Csv => print!("{}", table.to_csv()),
                ReportFormat::Text => print!("{}", table.to_text()),
            }
        }
        Command::RenderDict { model, layer, out, zoom } => {
            echo("render-dict", &serde_json::json!({"model": model, "layer": layer, "out": out, "zoom": zoom}));
            let m = io::load_model(&model)?;
            let style = MosaicStyle {
                zoom: check_positive("zoom", zoom)?,
                ..MosaicStyle::default()
            };
            render::render_layer(&m, layer, &style)?.save_png(&out)?;
            println!("wrote {}", out.display());
        }
        Command::ExportRelu { model, out } => {
            echo("export-relu", &serde_json::json!({"model": model, "out": out}));
            let m = io::load_model(&model)?;
            let net = m.to_relu_network();
            io::save_relu(&net, &m, &out)?;
            let neurons: Vec<usize> = net.layers.iter().map(|l| l.weight.nrows()).collect();
            println!("wrote {} (hidden widths {neurons:?})", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(config::exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
