//! Command-line front end. Exit codes: 0 success, 2 invalid input, 3 numeric abort.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hybrid_gs::eval::{evaluate, run_ablation, AblationMatrix};
use hybrid_gs::io::{
    generate_synthetic, init_scene, load_cameras, load_checkpoint, load_dataset, read_points, save_checkpoint,
    write_synthetic, SyntheticSpec, POINTS_FILE,
};
use hybrid_gs::raster::density_map;
use hybrid_gs::scene::temporal_scale_histogram;
use hybrid_gs::train::{train, TrainConfig};
use hybrid_gs::{rasterize, Camera, Error, RenderOptions, Result};

#[derive(Parser)]
#[command(name = "hgs", version, about = "Hybrid 3D/4D Gaussian splatting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a dataset directory (with points.txt) and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        held_out: usize,
        /// Per-iteration CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Render one view to a PPM image.
    Render {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        camera: usize,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        out: PathBuf,
        /// Dataset directory holding cameras.txt.
        #[arg(long, default_value = ".")]
        data: PathBuf,
    },
    /// PSNR/SSIM of the held-out camera as CSV.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        held_out: usize,
    },
    /// Histogram of temporal extent as CSV; 3D Gaussians land in the last bin.
    ClassifyStats {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        bins: usize,
        #[arg(long)]
        max: f64,
    },
    /// Per-pixel Gaussian coverage counts as CSV, or PGM with --out.
    DensityMap {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        camera: usize,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        dynamics_only: bool,
        #[arg(long, default_value = ".")]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an ablation matrix and print the CSV table.
    Ablate {
        #[arg(long)]
        matrix: PathBuf,
    },
}

fn camera(data: &Path, id: usize) -> Result<Camera> {
    load_cameras(data)?
        .into_iter()
        .find(|(i, _)| *i == id)
        .map(|(_, c)| c)
        .ok_or_else(|| Error::InvalidArgument(format!("camera {id} is not in {}", data.join("cameras.txt").display())))
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--time {t} outside [0, 1]")))
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { config, data, out, held_out, log } => {
            let cfg = TrainConfig::load(&config)?;
            let (train_set, _) = load_dataset(&data, held_out)?;
            let points = read_points(data.join(POINTS_FILE))?;
            let init = init_scene(&points, cfg.tau, train_set.duration_seconds, 0)?;
            let result = train(&train_set, init, &cfg)?;
            save_checkpoint(&out, &result.scene, Some(&result.state))?;
            if let Some(path) = log {
                fs::write(path, result.log.to_csv())?;
            }
            let last = result.log.rows().last();
            eprintln!(
                "trained {} iterations: {} dynamic, {} static, last loss {:.5}",
                cfg.iterations,
                result.scene.dynamics.len(),
                result.scene.statics.len(),
                last.map_or(f64::NAN, |r| r.loss)
            );
        }
        Command::Render { ckpt, camera: id, time, out, data } => {
            check_time(time)?;
            let scene = load_checkpoint(&ckpt)?.scene;
            let cam = camera(&data, id)?;
            let img = rasterize(&scene, &cam, time, [0.0; 3], &RenderOptions::default())?.image;
            img.write_ppm(&out)?;
        }
        Command::Eval { ckpt, data, held_out } => {
            let scene = load_checkpoint(&ckpt)?.scene;
            let (_, test) = load_dataset(&data, held_out)?;
            print!("{}", evaluate(&scene, &test, [0.0; 3])?.to_csv());
        }
        Command::ClassifyStats { ckpt, bins, max } => {
            let scene = load_checkpoint(&ckpt)?.scene;
            print!("{}", temporal_scale_histogram(&scene, bins, max)?.to_csv());
        }
        Command::DensityMap { ckpt, camera: id, time, dynamics_only, data, out } => {
            check_time(time)?;
            let scene = load_checkpoint(&ckpt)?.scene;
            let map = density_map(&scene, &camera(&data, id)?, time, dynamics_only);
            match out {
                Some(path) => map.write_pgm(path)?,
                None => print!("{}", map.to_csv()),
            }
        }
        Command::Synth { spec, seed, out } => {
            let spec = SyntheticSpec::load(&spec)?;
            write_synthetic(&out, &generate_synthetic(&spec, seed)?)?;
        }
        Command::Ablate { matrix } => {
            print!("{}", run_ablation(&AblationMatrix::load(&matrix)?)?.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
