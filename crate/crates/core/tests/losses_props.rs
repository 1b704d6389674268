mod common;

use common::*;
use geomeval::geometry::{DepthMap, Trajectory};
use geomeval::losses::{
    camera_loss, distill_loss, gradient_loss, gradient_loss_inverse_depth, normal_loss, pointmap_loss,
};
use geomeval::synth::{corrupt, Corruption, Surface, TrajectoryModel};
use geomeval::toy::random_tokens;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn noisy(seed: u64, s: Surface) -> (geomeval::synth::Scene, geomeval::synth::Scene) {
    let gt = small_scene(seed, s, TrajectoryModel::RandomWalk);
    let c = Corruption { gaussian_sigma: 0.02, ..Default::default() };
    let pred = corrupt(&gt, &c, seed + 1).unwrap().scene;
    (pred, gt)
}

fn inverse_depth(scene: &geomeval::synth::Scene) -> Vec<DepthMap<f64>> {
    scene.depths.iter().map(|d| d.map(|z| 1.0 / z)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pointmap_loss_scale_invariant(seed in 0u64..500, s in surface(), alpha in 0.01..100.0f64) {
        let (pred, gt) = noisy(seed, s);
        let scaled: Vec<_> = pred.pointmaps.iter().map(|p| p.scaled(alpha)).collect();
        let (a, b) = (pointmap_loss(&pred.pointmaps, &gt.pointmaps).unwrap(), pointmap_loss(&scaled, &gt.pointmaps).unwrap());
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn camera_loss_gauge_invariant(p in trajectory(5), g in trajectory(5), a in rigid(), b in rigid()) {
        let base = camera_loss(&p, &g, 1.0, 100.0).unwrap();
        let moved = camera_loss(&p.transformed(&a), &g.transformed(&b), 1.0, 100.0).unwrap();
        prop_assert!((base - moved).abs() < 1e-9 * base.max(1.0));
    }

    #[test]
    fn camera_loss_order_free(p in trajectory(4), g in trajectory(4)) {
        let rev = |t: &Trajectory<f64>| Trajectory::from_poses(t.poses.iter().rev().cloned().collect());
        let (a, b) = (camera_loss(&p, &g, 1.0, 1.0).unwrap(), camera_loss(&rev(&p), &rev(&g), 1.0, 1.0).unwrap());
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }

    #[test]
    fn gradient_loss_offset_free(seed in 0u64..500, s in surface(), c in -0.3..0.3f64) {
        let (pred, gt) = noisy(seed, s);
        let (pi, gi) = (inverse_depth(&pred), inverse_depth(&gt));
        let shift = |v: &[DepthMap<f64>]| v.iter().map(|d| d.map(|x| x + c)).collect::<Vec<_>>();
        let a = gradient_loss_inverse_depth(&pi, &gi, &[1, 2, 4]).unwrap();
        let b = gradient_loss_inverse_depth(&shift(&pi), &shift(&gi), &[1, 2, 4]).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ranges(seed in 0u64..500, s in surface()) {
        let (pred, gt) = noisy(seed, s);
        let n = normal_loss(&pred.pointmaps, &gt.pointmaps).unwrap();
        prop_assert!((0.0..=std::f64::consts::PI).contains(&n));
        let st = random_tokens::<f64>(2, 3, 3, 4, seed);
        let te = random_tokens::<f64>(2, 3, 3, 4, seed + 7);
        let proj = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.1 });
        let d = distill_loss(&st, &te, &proj).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
    }

    #[test]
    fn frame_permutation_consistent(seed in 0u64..500, s in surface()) {
        let (pred, gt) = noisy(seed, s);
        let perm = [2usize, 0, 1];
        let pm = |v: &[geomeval::geometry::Pointmap<f64>]| perm.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let (pp, gp) = (pm(&pred.pointmaps), pm(&gt.pointmaps));
        for (a, b) in [
            (pointmap_loss(&pred.pointmaps, &gt.pointmaps).unwrap(), pointmap_loss(&pp, &gp).unwrap()),
            (normal_loss(&pred.pointmaps, &gt.pointmaps).unwrap(), normal_loss(&pp, &gp).unwrap()),
            (gradient_loss(&pred.pointmaps, &gt.pointmaps, &[1, 2]).unwrap(), gradient_loss(&pp, &gp, &[1, 2]).unwrap()),
        ] {
            prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
        let pt = |t: &Trajectory<f64>| Trajectory::from_poses(perm.iter().map(|&i| t.poses[i]).collect());
        let a = camera_loss(&pred.trajectory, &gt.trajectory, 1.0, 100.0).unwrap();
        let b = camera_loss(&pt(&pred.trajectory), &pt(&gt.trajectory), 1.0, 100.0).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
}
