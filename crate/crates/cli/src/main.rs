use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use omnipose::config::KeyValues;
use omnipose::cylinder::{unwrap, CylinderModel, OmniImage, PanoramaImage, UnwrapOptions};
use omnipose::error::{Error, Result};
use omnipose::image::{write_atomic, GrayImage};
use omnipose::motionfield::SweepConfig;
use omnipose::pipeline::{estimate_pose, PipelineConfig};
use omnipose::report::{to_json, ErrorRecord, PoseRecord};
use omnipose::sinusoid::{FitConfig, HuberForm};
use omnipose::synth::Scenario;

mod eval;
mod odometry;
mod synth;

#[derive(Parser)]
#[command(name = "omnipose", version, about = "Relative pose between omni-camera frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unwrap an omni image into a cylindrical panorama.
    Unwrap {
        omni: PathBuf,
        /// Model file with rho_min, rho_max and optionally center_u,
        /// center_v, u_max, v_max, aspect_ratio.
        #[arg(long)]
        config: PathBuf,
        /// Map row 0 to the inner annulus radius.
        #[arg(long)]
        flip_v: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the pose of the second panorama relative to the first.
    Estimate {
        pano_1: PathBuf,
        pano_2: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        /// Directory receiving pose.json and motion.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise estimates over the panoramas of a directory.
    Odometry {
        frames: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        /// Trajectory CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-axis RMSE of a trajectory against ground truth.
    Eval {
        trajectory: PathBuf,
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a synthetic frame sequence with a ground-truth sidecar.
    Synth {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Debug)]
pub struct Tuning {
    /// Registration window side L.
    #[arg(long, default_value_t = 110)]
    window: usize,
    /// Column step d between windows.
    #[arg(long, default_value_t = 20)]
    step: usize,
    /// Pseudo-Huber scale in pixels.
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    /// Sliding-median width (odd); 0 disables the filter.
    #[arg(long, default_value_t = 5)]
    median: usize,
    /// Let windows cross the column seam.
    #[arg(long)]
    wrap: bool,
    #[arg(long, default_value = "paper", value_parser = parse_huber)]
    huber_form: HuberForm,
    /// Single-threaded, and no wall-clock values in the outputs.
    #[arg(long)]
    deterministic: bool,
    /// Model file supplying aspect_ratio (and optionally u_max, v_max).
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_huber(s: &str) -> std::result::Result<HuberForm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Tuning {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            sweep: SweepConfig {
                window: self.window,
                step: self.step,
                wrap: self.wrap,
                parallel: !self.deterministic,
                ..SweepConfig::default()
            },
            median: (self.median != 0).then_some(self.median),
            fit: FitConfig {
                delta: self.delta,
                huber_form: self.huber_form,
                ..FitConfig::default()
            },
        }
    }

    pub fn model_config(&self) -> Result<KeyValues> {
        match &self.config {
            Some(p) => KeyValues::read(p),
            None => Ok(KeyValues::default()),
        }
    }

    pub fn deterministic(&self) -> bool {
        self.deterministic
    }
}

/// Reads a panorama; dimensions missing from the model file are taken from
/// the image.
pub fn load_panorama(path: &Path, model_kv: &KeyValues) -> Result<PanoramaImage> {
    let img = GrayImage::read_pgm(path)
        .map_err(|e| annotate(e, path))?;
    let mut kv = model_kv.clone();
    if kv.get_str("u_max").is_none() {
        kv.insert("u_max", img.width());
    }
    if kv.get_str("v_max").is_none() {
        kv.insert("v_max", img.height());
    }
    let model = CylinderModel::from_config(&kv)?;
    PanoramaImage::new(img, model)
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        Error::Image(m) => Error::Image(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn cmd_unwrap(omni: &Path, config: &Path, flip_v: bool, out: &Path) -> Result<()> {
    let kv = KeyValues::read(config)?;
    let img = GrayImage::read_pgm(omni).map_err(|e| annotate(e, omni))?;
    let omni = OmniImage::from_config(img, &kv)?;
    let model = CylinderModel::from_config(&kv)?;
    let pano = unwrap(&omni, &model, UnwrapOptions { flip_v })?;
    pano.pixels.write_pgm(out)
}

fn cmd_estimate(p1: &Path, p2: &Path, tuning: &Tuning, out: Option<&Path>) -> Result<String> {
    let kv = tuning.model_config()?;
    let a = load_panorama(p1, &kv)?;
    let b = load_panorama(p2, &kv)?;
    let start = Instant::now();
    let est = estimate_pose(&a, &b, &tuning.pipeline())?;
    let runtime = (!tuning.deterministic).then(|| start.elapsed().as_secs_f64());
    let json = PoseRecord::new(&est, runtime).to_json();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        est.raw.write_csv(dir.join("motion.csv"))?;
        write_text(&dir.join("pose.json"), &json)?;
    }
    Ok(json)
}

fn cmd_synth(scenario: &Path, out: &Path) -> Result<()> {
    let kv = KeyValues::read(scenario)?;
    let sc = Scenario::from_config(&kv)?;
    synth::write_sequence(&sc, out)
}

fn run(cli: Cli) -> Result<Option<String>> {
    match cli.command {
        Command::Unwrap {
            omni,
            config,
            flip_v,
            out,
        } => cmd_unwrap(&omni, &config, flip_v, &out).map(|_| None),
        Command::Estimate {
            pano_1,
            pano_2,
            tuning,
            out,
        } => cmd_estimate(&pano_1, &pano_2, &tuning, out.as_deref()).map(Some),
        Command::Odometry {
            frames,
            tuning,
            out,
        } => odometry::run(&frames, &tuning, &out).map(|_| None),
        Command::Eval {
            trajectory,
            truth,
            out,
        } => {
            let metrics = eval::run(&trajectory, &truth)?;
            let json = to_json(&metrics);
            if let Some(p) = out {
                write_text(&p, &json)?;
            }
            Ok(Some(json))
        }
        Command::Synth { scenario, out } => cmd_synth(&scenario, &out).map(|_| None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Some(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            print!("{}", ErrorRecord::new(&e).to_json());
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
