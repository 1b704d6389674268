mod common;

use common::*;
use geomeval::geometry::{geodesic_angle, pointmap_normals, relative_pose, rot9d_to_rotation, scene_norm};
use geomeval::synth::TrajectoryModel;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rot9d_idempotent_and_scale_free(r in rotation(), alpha in 0.01..100.0f64) {
        prop_assert!((rot9d_to_rotation(&r) - r).abs().max() < 1e-12);
        let m = r * 0.7 + nalgebra::Matrix3::new(0.1, -0.2, 0.05, 0.0, 0.3, -0.1, 0.2, 0.1, 0.0);
        let a = rot9d_to_rotation(&m);
        let b = rot9d_to_rotation(&(m * alpha));
        prop_assert!((a - b).abs().max() < 1e-12);
    }

    #[test]
    fn relative_pose_with_itself_is_identity(g in pose()) {
        let r = relative_pose(&g, &g);
        prop_assert!((r.rotation - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!(r.translation.norm() < 1e-12);
    }

    #[test]
    fn geodesic_metric_axioms(a in rotation(), b in rotation(), c in rotation()) {
        let (ab, ba) = (geodesic_angle(&a, &b), geodesic_angle(&b, &a));
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(geodesic_angle(&a, &c) <= ab + geodesic_angle(&b, &c) + 1e-9);
    }

    #[test]
    fn scene_norm_homogeneous(seed in 0u64..1000, s in surface(), alpha in 0.01..100.0f64) {
        let scene = small_scene(seed, s, TrajectoryModel::Orbit);
        let scaled: Vec<_> = scene.pointmaps.iter().map(|p| p.scaled(alpha)).collect();
        let (n0, n1) = (scene_norm(&scene.pointmaps).unwrap(), scene_norm(&scaled).unwrap());
        prop_assert!((n1 - alpha * n0).abs() <= 1e-9 * n1.max(1.0));
    }

    #[test]
    fn normals_unit_where_valid(seed in 0u64..1000, s in surface()) {
        let scene = small_scene(seed, s, TrajectoryModel::Static);
        for p in &scene.pointmaps {
            let n = pointmap_normals(p);
            for (v, &m) in n.values.iter().zip(&n.mask) {
                if m {
                    prop_assert!((v.norm() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
