#![allow(dead_code)]

use geomeval::geometry::{axis_angle, Pose, Sim3, Trajectory};
use geomeval::synth::{generate, Scene, SceneSpec, Surface, TrajectoryModel};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

pub fn small_scene(seed: u64, surface: Surface, trajectory: TrajectoryModel) -> Scene {
    generate(&SceneSpec { seed, n_frames: 3, height: 10, width: 12, surface, trajectory, ..Default::default() })
        .unwrap()
}

pub fn surface() -> impl Strategy<Value = Surface> {
    prop_oneof![
        Just(Surface::Plane),
        Just(Surface::TiltedPlane),
        Just(Surface::SpherePatch),
        Just(Surface::TwoPlaneStep),
        Just(Surface::SmoothRandom),
    ]
}

pub fn unit_vector() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate axis", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
}

pub fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (unit_vector(), -3.1..3.1f64).prop_map(|(a, t)| axis_angle(&a, t))
}

pub fn translation() -> impl Strategy<Value = Vector3<f64>> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

pub fn pose() -> impl Strategy<Value = Pose<f64>> {
    (rotation(), translation()).prop_map(|(r, t)| Pose::new(r, t))
}

pub fn sim3() -> impl Strategy<Value = Sim3<f64>> {
    (0.1..10.0f64, rotation(), translation()).prop_map(|(s, r, t)| Sim3::new(s, r, t))
}

pub fn rigid() -> impl Strategy<Value = Sim3<f64>> {
    (rotation(), translation()).prop_map(|(r, t)| Sim3::new(1.0, r, t))
}

pub fn trajectory(n: usize) -> impl Strategy<Value = Trajectory<f64>> {
    prop::collection::vec(pose(), n).prop_map(Trajectory::from_poses)
}
