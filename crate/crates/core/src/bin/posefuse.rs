use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use posefuse::body::BodyModel;
use posefuse::crf::{FactorToggles, ModelConfig};
use posefuse::evaluation::{EstimatesFile, GroundTruthFile};
use posefuse::geometry::load_calibrations;
use posefuse::overlay::{emit_overlays, OverlayOptions};
use posefuse::pipeline::{run_pipeline, score_estimates, PipelineConfig};
use posefuse::synth::{generate, SceneSpec};
use posefuse::{Error, Result};

#[derive(Parser)]
#[command(name = "posefuse", version, about = "Multi-view 3D pose fusion with a temporal CRF")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma list of factors, e.g. `data,temp,col`.
        #[arg(long)]
        factors: Option<String>,
    },
    /// Generate a synthetic scene and a config that runs on it.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score estimates against ground truth and print the PCP table.
    Score {
        /// `skeletons.json` or the run directory containing it.
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 100.0)]
        head_offset_mm: f64,
        /// Body model TOML; the 14-joint default otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Draw estimates (and ground truth) over every camera view.
    Overlay {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        background_dir: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        marker_radius: u32,
    },
}

fn skeletons_path(est: &Path) -> PathBuf {
    if est.is_dir() {
        est.join("skeletons.json")
    } else {
        est.to_path_buf()
    }
}

/// Missing input files named on the command line are config errors.
fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Config { message: format!("{} does not exist", path.display()), path: Some(path.to_path_buf()) })
    }
}

fn body(model: Option<&Path>) -> Result<BodyModel> {
    model.map_or_else(|| Ok(BodyModel::default()), |p| ModelConfig::load(require(p)?).map(|m| m.body))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, seed, factors } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = factors {
                FactorToggles::parse(&f)?;
                cfg.factors = f.split(',').map(|s| s.trim().to_string()).collect();
            }
            let out = run_pipeline(&cfg)?;
            println!("{} frames written to {}", out.estimates.len(), cfg.output_dir.display());
            if let Some(report) = out.report {
                print!("{}", report.to_table());
            }
        }
        Command::Synth { spec, out, seed } => {
            let spec = SceneSpec::load(require(&spec)?)?;
            let scene = generate(&spec, seed)?;
            scene.write(&out)?;
            let cfg = PipelineConfig {
                calibration: "calibration.json".into(),
                heatmaps: "heatmaps".into(),
                keypoints: "keypoints".into(),
                ground_truth: Some("gt.json".into()),
                output_dir: "run".into(),
                seed,
                // synthetic ground truth shares the estimate's head convention
                head_offset_mm: 0.0,
                ..Default::default()
            };
            let path = out.join("config.json");
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n";
            std::fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            println!("scene written to {} ({} frames, {} cameras)", out.display(), spec.n_frames, spec.n_cameras);
        }
        Command::Score { est, gt, alpha, head_offset_mm, model } => {
            let body = body(model.as_deref())?;
            let est = EstimatesFile::load(require(&skeletons_path(&est))?)?.to_frames();
            let gt = GroundTruthFile::load(require(&gt)?)?.to_frames();
            let report = score_estimates(&est, &gt, &body, head_offset_mm, alpha)?;
            print!("{}", report.to_table());
        }
        Command::Overlay { est, calibration, out, gt, background_dir, model, marker_radius } => {
            let body = body(model.as_deref())?;
            let cals = load_calibrations(require(&calibration)?)?;
            let est = EstimatesFile::load(require(&skeletons_path(&est))?)?.to_frames();
            let gt = gt.map(|p| GroundTruthFile::load(require(&p)?).map(|g| g.to_frames())).transpose()?;
            let opts = OverlayOptions { marker_radius, background_dir };
            let written = emit_overlays(&est, gt.as_deref(), &cals, &body, &out, &opts)?;
            println!("{} overlays written to {}", written.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
