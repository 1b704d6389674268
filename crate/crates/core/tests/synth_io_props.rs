mod common;

use common::*;
use geomeval::io::{
    decode_depths, decode_pointmaps, encode_depths, encode_pointmaps, format_trajectory, parse_trajectory,
    trajectory_to_records,
};
use geomeval::synth::{corrupt, generate, Corruption, SceneSpec, TrajectoryModel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_scene(seed in 0u64..10_000, s in surface()) {
        let spec = SceneSpec { seed, n_frames: 2, height: 8, width: 9, surface: s, ..Default::default() };
        let (a, b) = (generate(&spec).unwrap(), generate(&spec).unwrap());
        prop_assert_eq!(a.pointmaps, b.pointmaps);
        prop_assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn depth_positive(seed in 0u64..10_000, s in surface()) {
        let scene = small_scene(seed, s, TrajectoryModel::RandomWalk);
        for p in &scene.pointmaps {
            for x in p.valid_points() {
                prop_assert!(x.z > 0.0);
            }
        }
    }

    #[test]
    fn inverse_gauge_restores(seed in 0u64..10_000, g in sim3()) {
        let scene = small_scene(seed, geomeval::synth::Surface::SpherePatch, TrajectoryModel::Orbit);
        let c = Corruption { global_sim3: Some(g), ..Default::default() };
        let back = corrupt(&scene, &c, seed).unwrap().scene.apply_gauge(&g.inverse());
        for (a, b) in back.pointmaps.iter().zip(&scene.pointmaps) {
            for (x, y) in a.points.iter().zip(&b.points) {
                prop_assert!((x - y).norm() < 1e-12 * y.norm().max(1.0));
            }
        }
        for (a, b) in back.trajectory.poses.iter().zip(&scene.trajectory.poses) {
            prop_assert!((a.rotation - b.rotation).abs().max() < 1e-12);
            prop_assert!((a.translation - b.translation).norm() < 1e-12 * b.translation.norm().max(1.0));
        }
    }

    #[test]
    fn files_round_trip(seed in 0u64..10_000, s in surface()) {
        let scene = small_scene(seed, s, TrajectoryModel::RandomWalk);
        let bytes = encode_pointmaps(&scene.pointmaps).unwrap();
        let read = decode_pointmaps(&bytes).unwrap();
        prop_assert_eq!(encode_pointmaps(&read).unwrap(), bytes);
        prop_assert_eq!(decode_pointmaps(&encode_pointmaps(&read).unwrap()).unwrap(), read);
        let dbytes = encode_depths(&scene.depths).unwrap();
        let dread = decode_depths(&dbytes).unwrap();
        prop_assert_eq!(decode_depths(&encode_depths(&dread).unwrap()).unwrap(), dread);
        let text = format_trajectory(&trajectory_to_records(&scene.trajectory));
        prop_assert_eq!(format_trajectory(&parse_trajectory(&text).unwrap()), text);
    }
}
