//! Deterministic synthetic scenes with exact ground truth.
//!
//! Cameras are pinhole with focal length `max(H, W)` pixels and the principal
//! point at the image center; each pixel's ray is intersected analytically with
//! a world surface. Geometry is generated at unit scale and multiplied by
//! `metric_scale`. Depth equals the z channel of the pointmap bit-for-bit.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{axis_angle, DepthMap, Pointmap, Pose, Sim3, Trajectory};
use crate::rng::StreamRng;

const ORBIT_STEP_DEG: f64 = 5.0;
const ORBIT_PIVOT_Z: f64 = 2.0;
const WALK_MAX_ANGLE_DEG: f64 = 2.0;
const WALK_MAX_STEP: f64 = 0.05;

const STREAM_SURFACE: u64 = 0;
const STREAM_TRAJECTORY: u64 = 1;
const STREAM_NOISE: u64 = 10;
const STREAM_OUTLIERS: u64 = 11;
const STREAM_JITTER: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Plane,
    TiltedPlane,
    SpherePatch,
    TwoPlaneStep,
    SmoothRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryModel {
    Static,
    Orbit,
    RandomWalk,
}

macro_rules! keyword_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::Format(format!("unknown {} `{other}`", stringify!($ty)))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self { $(v if *v == $variant => $name,)+ _ => unreachable!() };
                f.write_str(name)
            }
        }
    };
}

keyword_enum!(Surface {
    "plane" => Surface::Plane,
    "tilted_plane" => Surface::TiltedPlane,
    "sphere_patch" => Surface::SpherePatch,
    "two_plane_step" => Surface::TwoPlaneStep,
    "smooth_random" => Surface::SmoothRandom,
});

keyword_enum!(TrajectoryModel {
    "static" => TrajectoryModel::Static,
    "orbit" => TrajectoryModel::Orbit,
    "random_walk" => TrajectoryModel::RandomWalk,
});

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub surface: Surface,
    pub trajectory: TrajectoryModel,
    pub metric_scale: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 4,
            height: 32,
            width: 32,
            surface: Surface::Plane,
            trajectory: TrajectoryModel::Orbit,
            metric_scale: 1.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::InvalidArgument("n_frames must be >= 1".into()));
        }
        if self.height < 4 || self.width < 4 {
            return Err(Error::InvalidArgument("resolution must be at least 4x4".into()));
        }
        if !(self.metric_scale > 0.0 && self.metric_scale.is_finite()) {
            return Err(Error::InvalidArgument("metric_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Generated ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub pointmaps: Vec<Pointmap<f64>>,
    pub depths: Vec<DepthMap<f64>>,
    pub trajectory: Trajectory<f64>,
    pub metric_scale: f64,
}

impl Scene {
    /// Re-expresses the scene in another world gauge. Camera-frame geometry only scales.
    pub fn apply_gauge(&self, gauge: &Sim3<f64>) -> Scene {
        let pointmaps: Vec<_> = self.pointmaps.iter().map(|p| p.scaled(gauge.scale)).collect();
        Scene {
            depths: pointmaps.iter().map(|p| p.depth()).collect(),
            pointmaps,
            trajectory: self.trajectory.transformed(gauge),
            metric_scale: self.metric_scale,
        }
    }

    /// Valid points of frame `i` in world coordinates.
    pub fn world_points(&self, i: usize) -> Vec<Vector3<f64>> {
        let pose = &self.trajectory.poses[i];
        self.pointmaps[i].valid_points().map(|p| pose.transform_point(p)).collect()
    }
}

/// Analytic world surface at unit scale.
enum Shape {
    Plane { normal: Vector3<f64>, offset: f64 },
    Sphere { center: Vector3<f64>, radius: f64 },
    Step { near: f64, far: f64 },
    Height { base: f64, waves: Vec<[f64; 4]> },
}

impl Shape {
    fn build(surface: Surface, rng: &mut StreamRng) -> Shape {
        match surface {
            Surface::Plane => Shape::Plane { normal: Vector3::z(), offset: 2.0 },
            Surface::TiltedPlane => {
                let a = 30f64.to_radians();
                let normal = Vector3::new(a.sin(), 0.0, a.cos());
                Shape::Plane { normal, offset: normal.dot(&Vector3::new(0.0, 0.0, 2.0)) }
            }
            Surface::SpherePatch => Shape::Sphere { center: Vector3::new(0.0, 0.0, 4.0), radius: 2.5 },
            Surface::TwoPlaneStep => Shape::Step { near: 1.5, far: 2.5 },
            Surface::SmoothRandom => Shape::Height {
                base: 2.0,
                waves: (0..4)
                    .map(|_| {
                        [
                            rng.uniform_in(0.01, 0.04),
                            rng.uniform_in(-2.5, 2.5),
                            rng.uniform_in(-2.5, 2.5),
                            rng.uniform_in(0.0, std::f64::consts::TAU),
                        ]
                    })
                    .collect(),
            },
        }
    }

    /// Ray parameter of the first hit in front of the origin.
    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let t = match self {
            Shape::Plane { normal, offset } => {
                let den = normal.dot(d);
                if den.abs() < 1e-12 {
                    return None;
                }
                (offset - normal.dot(o)) / den
            }
            Shape::Sphere { center, radius } => {
                let oc = o - center;
                let a = d.dot(d);
                let b = oc.dot(d);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                (-b - disc.sqrt()) / a
            }
            Shape::Step { near, far } => {
                if d.z.abs() < 1e-12 {
                    return None;
                }
                let t_near = (near - o.z) / d.z;
                if t_near > 0.0 && o.x + t_near * d.x < 0.0 {
                    t_near
                } else {
                    (far - o.z) / d.z
                }
            }
            Shape::Height { base, waves } => {
                if d.z.abs() < 1e-12 {
                    return None;
                }
                let mut t = (base - o.z) / d.z;
                for _ in 0..60 {
                    let x = o + d * t;
                    let (h, hx, hy) = height_field(*base, waves, x.x, x.y);
                    let g = x.z - h;
                    let dg = d.z - hx * d.x - hy * d.y;
                    if dg.abs() < 1e-12 {
                        return None;
                    }
                    t -= g / dg;
                }
                let x = o + d * t;
                if (x.z - height_field(*base, waves, x.x, x.y).0).abs() > 1e-12 {
                    return None;
                }
                t
            }
        };
        (t > 1e-6).then_some(t)
    }

    /// Implicit residual; zero on the surface.
    fn residual(&self, x: &Vector3<f64>) -> f64 {
        match self {
            Shape::Plane { normal, offset } => normal.dot(x) - offset,
            Shape::Sphere { center, radius } => (x - center).norm() - radius,
            Shape::Step { near, far } => {
                if x.x < 0.0 && (x.z - near).abs() < (x.z - far).abs() {
                    x.z - near
                } else {
                    x.z - far
                }
            }
            Shape::Height { base, waves } => x.z - height_field(*base, waves, x.x, x.y).0,
        }
    }
}

fn height_field(base: f64, waves: &[[f64; 4]], x: f64, y: f64) -> (f64, f64, f64) {
    let mut h = base;
    let (mut hx, mut hy) = (0.0, 0.0);
    for &[a, u, v, phi] in waves {
        let arg = u * x + v * y + phi;
        h += a * arg.sin();
        hx += a * u * arg.cos();
        hy += a * v * arg.cos();
    }
    (h, hx, hy)
}

fn build_trajectory(spec: &SceneSpec, rng: &mut StreamRng) -> Vec<Pose<f64>> {
    let n = spec.n_frames;
    match spec.trajectory {
        TrajectoryModel::Static => vec![Pose::identity(); n],
        TrajectoryModel::Orbit => {
            let pivot = Vector3::new(0.0, 0.0, ORBIT_PIVOT_Z);
            let step = ORBIT_STEP_DEG.to_radians();
            (0..n)
                .map(|i| {
                    let theta = (i as f64 - (n as f64 - 1.0) / 2.0) * step;
                    let r = axis_angle(&Vector3::y(), theta);
                    Pose::new(r, pivot - r * pivot)
                })
                .collect()
        }
        TrajectoryModel::RandomWalk => {
            let mut pose = Pose::identity();
            let mut poses = vec![pose];
            for _ in 1..n {
                let axis = Vector3::new(rng.normal(), rng.normal(), rng.normal());
                let angle = rng.uniform() * WALK_MAX_ANGLE_DEG.to_radians();
                let t = Vector3::new(
                    rng.uniform_in(-WALK_MAX_STEP, WALK_MAX_STEP),
                    rng.uniform_in(-WALK_MAX_STEP, WALK_MAX_STEP),
                    rng.uniform_in(-WALK_MAX_STEP, WALK_MAX_STEP),
                );
                let rot = if axis.norm() > 0.0 { axis_angle(&axis, angle) } else { Matrix3::identity() };
                pose = pose.compose(&Pose::new(rot, t));
                poses.push(pose);
            }
            poses
        }
    }
}

/// Per-pixel camera-frame ray with unit z component.
pub fn pixel_ray(height: usize, width: usize, row: usize, col: usize) -> Vector3<f64> {
    let f = height.max(width) as f64;
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    Vector3::new((col as f64 - cx) / f, (row as f64 - cy) / f, 1.0)
}

/// Renders pointmaps, depths and camera poses for `spec`.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let shape = Shape::build(spec.surface, &mut StreamRng::new(spec.seed, STREAM_SURFACE));
    let poses = build_trajectory(spec, &mut StreamRng::new(spec.seed, STREAM_TRAJECTORY));
    let (h, w, ms) = (spec.height, spec.width, spec.metric_scale);
    let mut pointmaps = Vec::with_capacity(poses.len());
    for (f, pose) in poses.iter().enumerate() {
        let mut points = Vec::with_capacity(h * w);
        let mut mask = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                let ray = pixel_ray(h, w, i, j);
                match shape.intersect(&pose.translation, &(pose.rotation * ray)) {
                    Some(t) => {
                        points.push(ray * t * ms);
                        mask.push(true);
                    }
                    None => {
                        points.push(Vector3::zeros());
                        mask.push(false);
                    }
                }
            }
        }
        pointmaps.push(Pointmap::new(h, w, points, mask, f)?);
    }
    let poses = poses.into_iter().map(|p| Pose::new(p.rotation, p.translation * ms)).collect();
    Ok(Scene {
        depths: pointmaps.iter().map(|p| p.depth()).collect(),
        pointmaps,
        trajectory: Trajectory::from_poses(poses),
        metric_scale: ms,
    })
}

/// Implicit-surface residual of a world point, at the spec's metric scale.
pub fn surface_residual(spec: &SceneSpec, world_point: &Vector3<f64>) -> f64 {
    let shape = Shape::build(spec.surface, &mut StreamRng::new(spec.seed, STREAM_SURFACE));
    shape.residual(&(world_point / spec.metric_scale)) * spec.metric_scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jitter {
    pub rotation_rad: f64,
    pub translation: f64,
}

/// Controlled corruption applied to a generated scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corruption {
    /// Isotropic Gaussian noise on every valid point coordinate (meters, pre-gauge).
    pub gaussian_sigma: f64,
    /// Fraction of valid pixels whose point is multiplied by `outlier_magnitude`.
    pub outlier_fraction: f64,
    pub outlier_magnitude: f64,
    #[serde(skip)]
    pub global_sim3: Option<Sim3<f64>>,
    pub per_frame_jitter: Option<Jitter>,
}

impl Default for Corruption {
    fn default() -> Self {
        Self {
            gaussian_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_magnitude: 1.0,
            global_sim3: None,
            per_frame_jitter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub scene: Scene,
    /// Per frame, per pixel: true where an outlier was injected.
    pub outlier_mask: Vec<Vec<bool>>,
}

impl Corrupted {
    pub fn outlier_count(&self) -> usize {
        self.outlier_mask.iter().flatten().filter(|&&b| b).count()
    }
}

/// Applies noise, then outliers, then pose jitter, then the global gauge.
///
/// Exactly `⌊outlier_fraction · M⌋` of the `M` valid pixels become outliers.
pub fn corrupt(scene: &Scene, c: &Corruption, seed: u64) -> Result<Corrupted> {
    if !(0.0..1.0).contains(&c.outlier_fraction) {
        return Err(Error::InvalidArgument("outlier_fraction must lie in [0, 1)".into()));
    }
    let mut pointmaps = scene.pointmaps.clone();
    if c.gaussian_sigma > 0.0 {
        let mut rng = StreamRng::new(seed, STREAM_NOISE);
        for pm in &mut pointmaps {
            for (p, &m) in pm.points.iter_mut().zip(&pm.mask) {
                if m {
                    *p += Vector3::new(rng.normal(), rng.normal(), rng.normal()) * c.gaussian_sigma;
                }
            }
        }
    }

    let mut outlier_mask: Vec<Vec<bool>> = pointmaps.iter().map(|p| vec![false; p.len()]).collect();
    let valid: Vec<(usize, usize)> = pointmaps
        .iter()
        .enumerate()
        .flat_map(|(f, pm)| pm.mask.iter().enumerate().filter(|(_, &m)| m).map(move |(i, _)| (f, i)))
        .collect();
    let n_out = (c.outlier_fraction * valid.len() as f64).floor() as usize;
    if n_out > 0 {
        let mut rng = StreamRng::new(seed, STREAM_OUTLIERS);
        let mut pool = valid;
        // partial Fisher-Yates
        for k in 0..n_out {
            let j = k + rng.below((pool.len() - k) as u64) as usize;
            pool.swap(k, j);
            let (f, i) = pool[k];
            pointmaps[f].points[i] *= c.outlier_magnitude;
            outlier_mask[f][i] = true;
        }
    }

    let mut trajectory = scene.trajectory.clone();
    if let Some(j) = c.per_frame_jitter {
        let mut rng = StreamRng::new(seed, STREAM_JITTER);
        for pose in &mut trajectory.poses {
            let axis = Vector3::new(rng.normal(), rng.normal(), rng.normal());
            let dir = Vector3::new(rng.normal(), rng.normal(), rng.normal());
            let delta = Pose::new(axis_angle(&axis, j.rotation_rad), dir.normalize() * j.translation);
            *pose = pose.compose(&delta);
        }
    }

    let mut out = Scene {
        depths: pointmaps.iter().map(|p| p.depth()).collect(),
        pointmaps,
        trajectory,
        metric_scale: scene.metric_scale,
    };
    if let Some(g) = &c.global_sim3 {
        out = out.apply_gauge(g);
    }
    Ok(Corrupted { scene: out, outlier_mask })
}
