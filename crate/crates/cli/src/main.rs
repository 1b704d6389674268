//! `geomeval`: synthetic scene generation and evaluation from the command line.
//!
//! Every invocation prints one JSON record holding the command, its effective
//! configuration and the result. Exit codes: 2 parse/format, 3 shape mismatch,
//! 4 empty overlap, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use geomeval::alignment::IcpConfig;
use geomeval::io;
use geomeval::losses::{LossConfig, DEFAULT_GRADIENT_SCALES};
use geomeval::metrics::{PdbeConfig, DEFAULT_F1_THRESHOLDS, DEFAULT_K_NORMALS, DEFAULT_TAU};
use geomeval::protocol::{self, AlignMode, ReconAlign, Sim3Record};
use geomeval::synth::{corrupt, generate};
use geomeval::Error;

#[derive(Parser)]
#[command(name = "geomeval", version, about = "Pointmap, depth, pose and reconstruction evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene (and an optional corrupted prediction).
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    EvalPointmap(EvalMaps),
    EvalDepth(EvalMaps),
    EvalBoundary(EvalBoundary),
    EvalPose(EvalPose),
    EvalRecon(EvalRecon),
    EvalLoss(EvalLoss),
}

#[derive(Args)]
struct EvalMaps {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value = "affine")]
    align: AlignMode,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
}

#[derive(Args)]
struct EvalBoundary {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Comma-separated depth-ratio thresholds.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_F1_THRESHOLDS.to_vec())]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    canny_low: f64,
    #[arg(long, default_value_t = 0.2)]
    canny_high: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

#[derive(Args)]
struct EvalPose {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 1)]
    delta: usize,
}

#[derive(Args)]
struct EvalRecon {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Camera-to-world poses lifting the predicted pointmaps.
    #[arg(long)]
    pred_traj: Option<PathBuf>,
    #[arg(long)]
    gt_traj: Option<PathBuf>,
    #[arg(long, default_value = "sim3")]
    align: ReconAlign,
    #[arg(long, default_value_t = DEFAULT_K_NORMALS)]
    k_normals: usize,
    #[arg(long, default_value_t = 50)]
    icp_iterations: usize,
    #[arg(long, default_value_t = 1e-10)]
    icp_tol: f64,
    #[arg(long, default_value_t = 0.1)]
    icp_max_dist: f64,
}

#[derive(Args)]
struct EvalLoss {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Enables the camera term together with `--gt-traj`.
    #[arg(long, requires = "gt_traj")]
    pred_traj: Option<PathBuf>,
    #[arg(long, requires = "pred_traj")]
    gt_traj: Option<PathBuf>,
    /// Predicted metric scale; enables the scale term.
    #[arg(long)]
    pred_scale: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRADIENT_SCALES.to_vec())]
    gradient_scales: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    w_pointmap: f64,
    #[arg(long, default_value_t = 0.1)]
    w_camera: f64,
    #[arg(long, default_value_t = 100.0)]
    w_translation: f64,
    #[arg(long, default_value_t = 1.0)]
    w_rotation: f64,
    #[arg(long, default_value_t = 1.0)]
    w_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    w_normal: f64,
    #[arg(long, default_value_t = 0.1)]
    w_gradient: f64,
    #[arg(long, default_value_t = 0.5)]
    w_distill: f64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format(_) => 2,
        Error::ShapeMismatch(_) | Error::LengthMismatch { .. } | Error::FrameCountMismatch(..) => 3,
        Error::EmptyOverlap | Error::EmptyMask => 4,
        _ => 1,
    }
}

fn path(p: &Path) -> Value {
    json!(p.display().to_string())
}

fn synth(spec: &Path, out_dir: &Path) -> geomeval::Result<Value> {
    let cfg = io::parse_synth_config(&std::fs::read_to_string(spec)?)?;
    let scene = generate(&cfg.scene)?;
    std::fs::create_dir_all(out_dir)?;
    let mut files = vec!["gt.gpm", "gt.gdm", "gt_traj.txt"];
    io::write_pointmaps(&out_dir.join("gt.gpm"), &scene.pointmaps)?;
    io::write_depths(&out_dir.join("gt.gdm"), &scene.depths)?;
    io::write_trajectory(&out_dir.join("gt_traj.txt"), &scene.trajectory)?;
    let corruption = match &cfg.corruption {
        None => Value::Null,
        Some(c) => {
            let out = corrupt(&scene, c, cfg.scene.seed)?;
            io::write_pointmaps(&out_dir.join("pred.gpm"), &out.scene.pointmaps)?;
            io::write_depths(&out_dir.join("pred.gdm"), &out.scene.depths)?;
            io::write_trajectory(&out_dir.join("pred_traj.txt"), &out.scene.trajectory)?;
            files.extend(["pred.gpm", "pred.gdm", "pred_traj.txt"]);
            json!({
                "settings": c,
                "gauge": c.global_sim3.as_ref().map(Sim3Record::from),
                "seed": cfg.scene.seed,
                "outliers": out.outlier_count(),
            })
        }
    };
    let manifest = json!({
        "seed": cfg.scene.seed,
        "metric_scale": scene.metric_scale,
        "scene": cfg.scene,
        "corruption": corruption,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    io::write_atomic(&out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(json!({
        "command": "synth",
        "config": { "spec": path(spec), "out_dir": path(out_dir) },
        "result": manifest,
    }))
}

fn run(cli: Cli) -> geomeval::Result<Value> {
    match cli.command {
        Command::Synth { spec, out_dir } => synth(&spec, &out_dir),
        Command::EvalPointmap(a) => {
            let r =
                protocol::eval_pointmap(&io::read_pointmaps(&a.pred)?, &io::read_pointmaps(&a.gt)?, a.align, a.tau)?;
            Ok(json!({
                "command": "eval-pointmap",
                "config": { "pred": path(&a.pred), "gt": path(&a.gt), "align": a.align, "tau": a.tau },
                "result": r,
            }))
        }
        Command::EvalDepth(a) => {
            let r = protocol::eval_depth(&io::read_depths(&a.pred)?, &io::read_depths(&a.gt)?, a.align, a.tau)?;
            Ok(json!({
                "command": "eval-depth",
                "config": { "pred": path(&a.pred), "gt": path(&a.gt), "align": a.align, "tau": a.tau },
                "result": r,
            }))
        }
        Command::EvalBoundary(a) => {
            let cfg = PdbeConfig { canny_low: a.canny_low, canny_high: a.canny_high, sigma: a.sigma };
            let r = protocol::eval_boundary(&io::read_depths(&a.pred)?, &io::read_depths(&a.gt)?, &a.thresholds, &cfg)?;
            Ok(json!({
                "command": "eval-boundary",
                "config": { "pred": path(&a.pred), "gt": path(&a.gt), "thresholds": a.thresholds, "pdbe": cfg },
                "result": r,
            }))
        }
        Command::EvalPose(a) => {
            let r = protocol::eval_pose(&io::read_trajectory(&a.pred)?, &io::read_trajectory(&a.gt)?, a.delta)?;
            Ok(json!({
                "command": "eval-pose",
                "config": { "pred": path(&a.pred), "gt": path(&a.gt), "delta": a.delta },
                "result": r,
            }))
        }
        Command::EvalRecon(a) => {
            let icp = IcpConfig {
                max_iterations: a.icp_iterations,
                convergence_tol: a.icp_tol,
                max_correspondence_dist: a.icp_max_dist,
            };
            let pt = a.pred_traj.as_deref().map(io::read_trajectory).transpose()?;
            let gt = a.gt_traj.as_deref().map(io::read_trajectory).transpose()?;
            let r = protocol::eval_recon(
                &io::read_pointmaps(&a.pred)?,
                &io::read_pointmaps(&a.gt)?,
                pt.as_ref(),
                gt.as_ref(),
                a.align,
                &icp,
                a.k_normals,
            )?;
            Ok(json!({
                "command": "eval-recon",
                "config": {
                    "pred": path(&a.pred), "gt": path(&a.gt),
                    "pred_traj": a.pred_traj.as_deref().map(path), "gt_traj": a.gt_traj.as_deref().map(path),
                    "align": a.align, "k_normals": a.k_normals, "icp": icp,
                },
                "result": r,
            }))
        }
        Command::EvalLoss(a) => {
            let cfg = LossConfig {
                pointmap: a.w_pointmap,
                camera: a.w_camera,
                translation: a.w_translation,
                rotation: a.w_rotation,
                scale: a.w_scale,
                normal: a.w_normal,
                gradient: a.w_gradient,
                distill: a.w_distill,
            };
            let trajs = match (&a.pred_traj, &a.gt_traj) {
                (Some(p), Some(g)) => Some((io::read_trajectory(p)?, io::read_trajectory(g)?)),
                _ => None,
            };
            let r = protocol::eval_loss(
                &io::read_pointmaps(&a.pred)?,
                &io::read_pointmaps(&a.gt)?,
                trajs.as_ref().map(|(p, g)| (p, g)),
                a.pred_scale,
                &cfg,
                &a.gradient_scales,
            )?;
            Ok(json!({
                "command": "eval-loss",
                "config": {
                    "pred": path(&a.pred), "gt": path(&a.gt),
                    "pred_traj": a.pred_traj.as_deref().map(path), "gt_traj": a.gt_traj.as_deref().map(path),
                    "pred_scale": a.pred_scale, "gradient_scales": a.gradient_scales, "weights": cfg,
                },
                "result": r,
            }))
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GEOMEVAL_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("GEOMEVAL_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("GEOMEVAL_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("geomeval: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(record) => {
            println!("{record}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("geomeval: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
