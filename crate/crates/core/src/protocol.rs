//! Evaluation protocols shared by the command-line tool and the test suites.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::Serialize;

use crate::alignment::{affine_align_depth, icp_refine, l1_scale, roe_scale, umeyama, IcpConfig};
use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Pointmap, Sim3, Trajectory};
use crate::losses::{
    camera_loss, gradient_loss, normal_loss, pointmap_loss, scale_loss, total_loss, LossConfig, LossReport, LossTerms,
};
use crate::metrics::{
    boundary_f1, depth_metrics, pdbe, pointmap_metrics, recon_metrics, trajectory_metrics, BoundaryMetrics,
    DepthMetrics, PdbeConfig, PointmapMetrics, ReconMetrics, TrajectoryMetrics,
};
use crate::scalar::ordered_sum;

/// How predictions are registered to ground truth before pointmap or depth metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Shared scale and shift on inverse depth over the whole video.
    Affine,
    /// Shared L1-optimal scale.
    Scale,
    /// None.
    Metric,
}

impl FromStr for AlignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(Self::Affine),
            "scale" => Ok(Self::Scale),
            "metric" => Ok(Self::Metric),
            other => Err(Error::Format(format!("unknown alignment `{other}`"))),
        }
    }
}

impl fmt::Display for AlignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Affine => "affine",
            Self::Scale => "scale",
            Self::Metric => "metric",
        })
    }
}

/// Registration of point clouds before reconstruction metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconAlign {
    Sim3,
    Se3,
    None,
}

impl FromStr for ReconAlign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim3" => Ok(Self::Sim3),
            "se3" => Ok(Self::Se3),
            "none" => Ok(Self::None),
            other => Err(Error::Format(format!("unknown recon alignment `{other}`"))),
        }
    }
}

impl fmt::Display for ReconAlign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sim3 => "sim3",
            Self::Se3 => "se3",
            Self::None => "none",
        })
    }
}

/// Fitted alignment parameters; `shift` applies to inverse depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alignment {
    pub mode: AlignMode,
    pub scale: f64,
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sim3Record {
    pub scale: f64,
    /// Row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&Sim3<f64>> for Sim3Record {
    fn from(s: &Sim3<f64>) -> Self {
        let r = s.rotation;
        Self {
            scale: s.scale,
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [s.translation.x, s.translation.y, s.translation.z],
        }
    }
}

fn inverse_depth_pairs(pred: &[Pointmap<f64>], gt: &[Pointmap<f64>]) -> (Vec<DepthMap<f64>>, Vec<DepthMap<f64>>) {
    let inv = |p: &Pointmap<f64>| {
        let values = p.points.iter().map(|x| if x.z > 0.0 { 1.0 / x.z } else { 0.0 }).collect();
        let mask = p.points.iter().zip(&p.mask).map(|(x, &m)| m && x.z > 0.0).collect();
        DepthMap { height: p.height, width: p.width, values, mask }
    };
    (pred.iter().map(inv).collect(), gt.iter().map(inv).collect())
}

fn check_frames<A, B>(pred: &[A], gt: &[B]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::FrameCountMismatch(pred.len(), gt.len()));
    }
    Ok(())
}

/// Registers predicted pointmaps to ground truth.
///
/// Affine mode fits `a/ẑ + b ≈ 1/z` robustly over every frame, then moves each
/// point along its ray to the new depth; pixels whose aligned inverse depth is not
/// positive become invalid.
pub fn align_pointmaps(
    pred: &[Pointmap<f64>],
    gt: &[Pointmap<f64>],
    mode: AlignMode,
) -> Result<(Vec<Pointmap<f64>>, Alignment)> {
    check_frames(pred, gt)?;
    match mode {
        AlignMode::Metric => Ok((pred.to_vec(), Alignment { mode, scale: 1.0, shift: 0.0 })),
        AlignMode::Scale => {
            let s = roe_scale(pred, gt)?;
            Ok((pred.iter().map(|p| p.scaled(s)).collect(), Alignment { mode, scale: s, shift: 0.0 }))
        }
        AlignMode::Affine => {
            let (pi, gi) = inverse_depth_pairs(pred, gt);
            let fit = affine_align_depth(&pi, &gi, true)?;
            let out = pred
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    for (x, m) in q.points.iter_mut().zip(q.mask.iter_mut()) {
                        let inv = if x.z > 0.0 { fit.apply(1.0 / x.z) } else { 0.0 };
                        if *m && inv > 0.0 {
                            *x *= (1.0 / inv) / x.z;
                        } else {
                            *m = false;
                        }
                    }
                    q
                })
                .collect();
            Ok((out, Alignment { mode, scale: fit.scale, shift: fit.shift }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointmapEval {
    pub metrics: PointmapMetrics<f64>,
    pub alignment: Alignment,
}

pub fn eval_pointmap(pred: &[Pointmap<f64>], gt: &[Pointmap<f64>], mode: AlignMode, tau: f64) -> Result<PointmapEval> {
    let (aligned, alignment) = align_pointmaps(pred, gt, mode)?;
    Ok(PointmapEval { metrics: pointmap_metrics(&aligned, gt, tau)?, alignment })
}

/// Registers predicted depth maps; affine mode works on inverse depth as for pointmaps.
pub fn align_depths(
    pred: &[DepthMap<f64>],
    gt: &[DepthMap<f64>],
    mode: AlignMode,
) -> Result<(Vec<DepthMap<f64>>, Alignment)> {
    check_frames(pred, gt)?;
    match mode {
        AlignMode::Metric => Ok((pred.to_vec(), Alignment { mode, scale: 1.0, shift: 0.0 })),
        AlignMode::Scale => {
            let pairs = pred.iter().zip(gt).flat_map(|(p, g)| {
                (0..p.len()).filter(|&i| p.mask[i] && g.mask[i]).map(move |i| (p.values[i], g.values[i]))
            });
            let s = l1_scale(pairs)?;
            Ok((pred.iter().map(|p| p.map(|v| v * s)).collect(), Alignment { mode, scale: s, shift: 0.0 }))
        }
        AlignMode::Affine => {
            let inv = |d: &DepthMap<f64>| {
                let values = d.values.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 }).collect();
                let mask = d.values.iter().zip(&d.mask).map(|(&v, &m)| m && v > 0.0).collect();
                DepthMap { height: d.height, width: d.width, values, mask }
            };
            let (pi, gi): (Vec<_>, Vec<_>) = (pred.iter().map(inv).collect(), gt.iter().map(inv).collect());
            let fit = affine_align_depth(&pi, &gi, true)?;
            let out = pi
                .iter()
                .map(|d| {
                    let mut q = d.clone();
                    for (v, m) in q.values.iter_mut().zip(q.mask.iter_mut()) {
                        let a = fit.apply(*v);
                        if *m && a > 0.0 {
                            *v = 1.0 / a;
                        } else {
                            *m = false;
                            *v = 0.0;
                        }
                    }
                    q
                })
                .collect();
            Ok((out, Alignment { mode, scale: fit.scale, shift: fit.shift }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthEval {
    pub metrics: DepthMetrics<f64>,
    pub alignment: Alignment,
}

pub fn eval_depth(pred: &[DepthMap<f64>], gt: &[DepthMap<f64>], mode: AlignMode, tau: f64) -> Result<DepthEval> {
    let (aligned, alignment) = align_depths(pred, gt, mode)?;
    Ok(DepthEval { metrics: depth_metrics(&aligned, gt, tau)?, alignment })
}

/// Boundary F1 and PDBE averaged over frames; the chamfer is the mean of the averaged terms.
pub fn eval_boundary(
    pred: &[DepthMap<f64>],
    gt: &[DepthMap<f64>],
    thresholds: &[f64],
    cfg: &PdbeConfig<f64>,
) -> Result<BoundaryMetrics<f64>> {
    check_frames(pred, gt)?;
    if pred.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut f1 = Vec::new();
    let mut acc = Vec::new();
    let mut comp = Vec::new();
    for (p, g) in pred.iter().zip(gt) {
        f1.push(boundary_f1(p, g, thresholds)?.f1);
        let e = pdbe(p, g, cfg)?;
        acc.push(e.acc);
        comp.push(e.comp);
    }
    let n = pred.len() as f64;
    let (pdbe_acc, pdbe_comp) = (ordered_sum(acc) / n, ordered_sum(comp) / n);
    Ok(BoundaryMetrics { f1: ordered_sum(f1) / n, pdbe_chamfer: (pdbe_acc + pdbe_comp) / 2.0, pdbe_acc, pdbe_comp })
}

pub fn eval_pose(pred: &Trajectory<f64>, gt: &Trajectory<f64>, delta: usize) -> Result<TrajectoryMetrics<f64>> {
    trajectory_metrics(pred, gt, delta)
}

/// Valid points of every frame, lifted to world coordinates when a trajectory is given.
pub fn cloud(maps: &[Pointmap<f64>], trajectory: Option<&Trajectory<f64>>) -> Result<Vec<Vector3<f64>>> {
    if let Some(t) = trajectory {
        check_frames(maps, &t.poses)?;
    }
    let mut out = Vec::new();
    for (f, m) in maps.iter().enumerate() {
        for (p, &ok) in m.points.iter().zip(&m.mask) {
            if ok {
                out.push(trajectory.map_or(*p, |t| t.poses[f].transform_point(p)));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconEval {
    pub metrics: ReconMetrics<f64>,
    pub transform: Sim3Record,
    pub icp_iterations: usize,
    pub icp_converged: bool,
}

/// Reconstruction metrics after Umeyama on pixel correspondences and ICP refinement.
pub fn eval_recon(
    pred: &[Pointmap<f64>],
    gt: &[Pointmap<f64>],
    pred_traj: Option<&Trajectory<f64>>,
    gt_traj: Option<&Trajectory<f64>>,
    mode: ReconAlign,
    icp: &IcpConfig<f64>,
    k_normals: usize,
) -> Result<ReconEval> {
    check_frames(pred, gt)?;
    let (pc, gc) = (cloud(pred, pred_traj)?, cloud(gt, gt_traj)?);
    let (transform, iterations, converged) = match mode {
        ReconAlign::None => (Sim3::identity(), 0, true),
        ReconAlign::Sim3 | ReconAlign::Se3 => {
            let lift = |m: &Pointmap<f64>, f: usize, t: Option<&Trajectory<f64>>, i: usize| {
                t.map_or(m.points[i], |t| t.poses[f].transform_point(&m.points[i]))
            };
            let (mut src, mut dst) = (Vec::new(), Vec::new());
            for (f, (p, g)) in pred.iter().zip(gt).enumerate() {
                if !p.same_shape(g) {
                    return Err(Error::ShapeMismatch(format!(
                        "frame {f}: {}x{} vs {}x{}",
                        p.height, p.width, g.height, g.width
                    )));
                }
                for i in 0..p.len() {
                    if p.mask[i] && g.mask[i] {
                        src.push(lift(p, f, pred_traj, i));
                        dst.push(lift(g, f, gt_traj, i));
                    }
                }
            }
            if src.is_empty() {
                return Err(Error::EmptyOverlap);
            }
            let init = umeyama(&src, &dst, mode == ReconAlign::Sim3)?;
            let r = icp_refine(&pc, &gc, &init, icp)?;
            (r.transform, r.residuals.len(), r.converged)
        }
    };
    let aligned: Vec<Vector3<f64>> = pc.iter().map(|p| transform.apply(p)).collect();
    Ok(ReconEval {
        metrics: recon_metrics(&aligned, &gc, k_normals)?,
        transform: Sim3Record::from(&transform),
        icp_iterations: iterations,
        icp_converged: converged,
    })
}

/// Scene-level loss report. The camera slot holds the pairwise relative-pose term
/// with its rotation/translation weights applied inside; the separate rotation and
/// translation slots stay empty.
pub fn eval_loss(
    pred: &[Pointmap<f64>],
    gt: &[Pointmap<f64>],
    trajectories: Option<(&Trajectory<f64>, &Trajectory<f64>)>,
    pred_scale: Option<f64>,
    cfg: &LossConfig<f64>,
    gradient_scales: &[usize],
) -> Result<LossReport<f64>> {
    cfg.validate()?;
    let terms = LossTerms {
        pointmap: Some(pointmap_loss(pred, gt)?),
        camera: trajectories.map(|(p, g)| camera_loss(p, g, cfg.rotation, cfg.translation)).transpose()?,
        scale: pred_scale.map(|s| scale_loss(s, pred, gt)).transpose()?,
        normal: Some(normal_loss(pred, gt)?),
        gradient: Some(gradient_loss(pred, gt, gradient_scales)?),
        ..LossTerms::default()
    };
    total_loss(&terms, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SceneSpec};

    fn scene() -> crate::synth::Scene {
        generate(&SceneSpec::default()).unwrap()
    }

    #[test]
    fn identity_in_every_mode() {
        let s = scene();
        for mode in [AlignMode::Affine, AlignMode::Scale, AlignMode::Metric] {
            let e = eval_pointmap(&s.pointmaps, &s.pointmaps, mode, 0.25).unwrap();
            assert!(e.metrics.rel_p < 1e-9, "{mode}: {}", e.metrics.rel_p);
            assert_eq!(e.metrics.delta_p, 100.0);
            let d = eval_depth(&s.depths, &s.depths, mode, 0.25).unwrap();
            assert!(d.metrics.rel_d < 1e-9);
        }
    }

    #[test]
    fn scale_mode_recovers_half() {
        let s = scene();
        let half: Vec<_> = s.pointmaps.iter().map(|p| p.scaled(0.5)).collect();
        let e = eval_pointmap(&half, &s.pointmaps, AlignMode::Scale, 0.25).unwrap();
        assert!(e.metrics.rel_p < 1e-6);
        assert_eq!(e.alignment.scale, 2.0);
    }

    #[test]
    fn affine_mode_undoes_inverse_depth_affinity() {
        let s = generate(&SceneSpec { surface: crate::synth::Surface::SmoothRandom, ..Default::default() }).unwrap();
        let pred: Vec<_> = s
            .pointmaps
            .iter()
            .map(|p| {
                let mut q = p.clone();
                for x in &mut q.points {
                    let inv = (1.0 / x.z - 0.05) / 2.0;
                    *x *= (1.0 / inv) / x.z;
                }
                q
            })
            .collect();
        let e = eval_pointmap(&pred, &s.pointmaps, AlignMode::Affine, 0.25).unwrap();
        assert!(e.metrics.rel_p < 1e-6, "{}", e.metrics.rel_p);
        assert!((e.alignment.scale - 2.0).abs() < 1e-6 && (e.alignment.shift - 0.05).abs() < 1e-6);
    }

    #[test]
    fn recon_identity() {
        let s = scene();
        let e = eval_recon(
            &s.pointmaps,
            &s.pointmaps,
            Some(&s.trajectory),
            Some(&s.trajectory),
            ReconAlign::Sim3,
            &IcpConfig::default(),
            20,
        )
        .unwrap();
        assert!(e.metrics.acc < 1e-9 && e.metrics.comp < 1e-9);
    }

    #[test]
    fn loss_report_slots() {
        let s = scene();
        let r = eval_loss(
            &s.pointmaps,
            &s.pointmaps,
            Some((&s.trajectory, &s.trajectory)),
            Some(1.0),
            &LossConfig::default(),
            &[1, 2, 4],
        )
        .unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.terms.camera.is_some() && r.terms.rotation.is_none() && r.terms.distill.is_none());
    }

    #[test]
    fn mode_keywords() {
        assert_eq!("affine".parse::<AlignMode>().unwrap(), AlignMode::Affine);
        assert_eq!(ReconAlign::Se3.to_string(), "se3");
        assert!("bogus".parse::<AlignMode>().is_err());
    }
}
