use serde::Serialize;

use crate::alignment::umeyama;
use crate::error::{Error, Result};
use crate::geometry::{geodesic_angle, relative_pose, Pose, Sim3, Trajectory};
use crate::scalar::{ordered_sum, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryMetrics<T> {
    pub ate: T,
    pub rpe_t: T,
    /// Degrees.
    pub rpe_r: T,
}

fn check_lengths<T: Real>(pred: &Trajectory<T>, gt: &Trajectory<T>) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { expected: gt.len(), got: pred.len() });
    }
    Ok(())
}

/// Absolute trajectory error: RMSE of camera centers after a Sim(3) fit of pred onto gt.
pub fn ate<T: Real>(pred: &Trajectory<T>, gt: &Trajectory<T>) -> Result<(T, Sim3<T>)> {
    check_lengths(pred, gt)?;
    if gt.len() < 3 {
        return Err(Error::DegenerateTrajectory("fewer than 3 poses"));
    }
    let (pp, gp) = (pred.positions(), gt.positions());
    let s = match umeyama(&pp, &gp, true) {
        Ok(s) => s,
        Err(Error::DegenerateConfiguration) => return Err(Error::DegenerateTrajectory("collinear positions")),
        Err(e) => return Err(e),
    };
    // Collinear ground truth leaves the rotation about the line undetermined.
    if umeyama(&gp, &pp, true).is_err() {
        return Err(Error::DegenerateTrajectory("collinear positions"));
    }
    let sq = pp.iter().zip(&gp).map(|(p, g)| (s.apply(p) - g).norm_squared());
    let rmse = (ordered_sum(sq) / T::from_count(gt.len())).sqrt();
    Ok((rmse, s))
}

/// Relative pose error over frame pairs `(i, i+delta)`, with predicted translations
/// multiplied by `scale` first. Returns `(rpe_t, rpe_r in degrees)`.
pub fn rpe_with_scale<T: Real>(pred: &Trajectory<T>, gt: &Trajectory<T>, delta: usize, scale: T) -> Result<(T, T)> {
    check_lengths(pred, gt)?;
    if delta == 0 || gt.len() <= delta {
        return Err(Error::InvalidArgument(format!("rpe needs length > delta >= 1, got {} and {delta}", gt.len())));
    }
    let scaled: Vec<Pose<T>> = pred.poses.iter().map(|p| Pose::new(p.rotation, p.translation * scale)).collect();
    let pairs = gt.len() - delta;
    let mut te = Vec::with_capacity(pairs);
    let mut re = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let mh = relative_pose(&scaled[i], &scaled[i + delta]);
        let m = relative_pose(&gt.poses[i], &gt.poses[i + delta]);
        let e = m.inverse().compose(&mh);
        te.push(e.translation.norm_squared());
        let ang = geodesic_angle(&e.rotation, &nalgebra::Matrix3::identity()) * T::lit(180.0) / T::pi();
        re.push(ang * ang);
    }
    let n = T::from_count(pairs);
    Ok(((ordered_sum(te) / n).sqrt(), (ordered_sum(re) / n).sqrt()))
}

/// Relative pose error with the prediction pre-scaled by the ATE similarity scale.
pub fn rpe<T: Real>(pred: &Trajectory<T>, gt: &Trajectory<T>, delta: usize) -> Result<(T, T)> {
    let (_, s) = ate(pred, gt)?;
    rpe_with_scale(pred, gt, delta, s.scale)
}

pub fn trajectory_metrics<T: Real>(
    pred: &Trajectory<T>,
    gt: &Trajectory<T>,
    delta: usize,
) -> Result<TrajectoryMetrics<T>> {
    let (ate, s) = ate(pred, gt)?;
    let (rpe_t, rpe_r) = rpe_with_scale(pred, gt, delta, s.scale)?;
    Ok(TrajectoryMetrics { ate, rpe_t, rpe_r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::axis_angle;
    use crate::rng::StreamRng;
    use nalgebra::{Matrix3, Vector3};

    fn walk(n: usize, seed: u64) -> Trajectory<f64> {
        let mut r = StreamRng::new(seed, 0);
        let mut cur = Pose::identity();
        let mut poses = Vec::new();
        for _ in 0..n {
            poses.push(cur);
            let ax = Vector3::new(r.normal(), r.normal(), r.normal()).normalize();
            let step = Pose::new(axis_angle(&ax, 0.05), Vector3::new(r.normal(), r.normal(), r.normal()) * 0.1);
            cur = cur.compose(&step);
        }
        Trajectory::from_poses(poses)
    }

    fn gauge() -> Sim3<f64> {
        Sim3::new(2.5, axis_angle(&Vector3::new(0.3, -1.0, 0.4).normalize(), 1.1), Vector3::new(3.0, -1.0, 2.0))
    }

    #[test]
    fn ate_zero_under_sim3() {
        let gt = walk(12, 1);
        assert!(ate(&gt, &gt).unwrap().0 < 1e-12);
        let pred = gt.transformed(&gauge());
        assert!(ate(&pred, &gt).unwrap().0 < 1e-9);
        let other = Sim3::new(0.3, axis_angle(&Vector3::x(), -0.4), Vector3::new(0.0, 5.0, 1.0));
        let base = ate(&walk(12, 2), &gt).unwrap().0;
        let moved = ate(&walk(12, 2).transformed(&gauge()), &gt.transformed(&other)).unwrap().0;
        // ATE is in gt units, so rescaling gt rescales it.
        assert!((moved - base * 0.3).abs() < 1e-9);
    }

    #[test]
    fn ate_circle_matches_oracle() {
        let mut r = StreamRng::new(5, 0);
        let gt = Trajectory::from_poses(
            (0..100)
                .map(|i| {
                    let a = i as f64 * std::f64::consts::TAU / 100.0;
                    Pose::from_translation(Vector3::new(a.cos(), a.sin(), 0.1 * (3.0 * a).sin()))
                })
                .collect(),
        );
        let pred = Trajectory::from_poses(
            gt.poses
                .iter()
                .map(|p| {
                    let t = p.translation;
                    let radial = Vector3::new(t.x, t.y, 0.0).normalize() * (0.01 * r.normal());
                    Pose::from_translation(gauge().apply(&(t + radial)))
                })
                .collect(),
        );
        // Independent closed-form fit: Horn-style via SVD on f64 arrays.
        let (src, dst) = (pred.positions(), gt.positions());
        let n = src.len() as f64;
        let ms = src.iter().sum::<Vector3<f64>>() / n;
        let md = dst.iter().sum::<Vector3<f64>>() / n;
        let mut h = Matrix3::zeros();
        let mut var = 0.0;
        for (s, d) in src.iter().zip(&dst) {
            h += (s - ms) * (d - md).transpose();
            var += (s - ms).norm_squared();
        }
        let svd = h.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let d = (vt.transpose() * u.transpose()).determinant().signum();
        let dm = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
        let rot = vt.transpose() * dm * u.transpose();
        let sv = svd.singular_values;
        let scale = (sv[0] + sv[1] + d * sv[2]) / var;
        let t = md - rot * ms * scale;
        let rmse =
            (src.iter().zip(&dst).map(|(s, g)| (rot * s * scale + t - g).norm_squared()).sum::<f64>() / n).sqrt();
        let got = ate(&pred, &gt).unwrap().0;
        assert!((got - rmse).abs() < 1e-9, "{got} vs {rmse}");
    }

    #[test]
    fn ate_rejects_collinear() {
        let line =
            Trajectory::from_poses((0..5).map(|i| Pose::from_translation(Vector3::new(i as f64, 0.0, 0.0))).collect());
        assert!(matches!(ate(&line, &line), Err(Error::DegenerateTrajectory(_))));
    }

    #[test]
    fn rpe_zero_under_rigid_gauges() {
        let gt = walk(10, 3);
        assert_eq!(rpe(&gt, &gt, 1).unwrap(), (0.0, 0.0));
        let w = Sim3::new(1.0, axis_angle(&Vector3::y(), 0.7), Vector3::new(1.0, 2.0, 3.0));
        let v = Sim3::new(1.0, axis_angle(&Vector3::z(), -0.2), Vector3::new(-4.0, 0.0, 1.0));
        let (t, r) = rpe(&gt.transformed(&w), &gt.transformed(&v), 1).unwrap();
        assert!(t < 1e-9 && r < 1e-9, "{t} {r}");
    }

    #[test]
    fn rpe_corrupted_step_matches_pair_oracle() {
        let gt = walk(10, 4);
        let mut pred = gt.clone();
        let bump = Pose::new(axis_angle(&Vector3::x(), 0.02), Vector3::new(0.03, 0.0, -0.01));
        for k in 5..10 {
            pred.poses[k] = gt.poses[4].compose(&bump).compose(&gt.poses[4].inverse().compose(&gt.poses[k]));
        }
        // Only the pair (4, 5) changes its relative motion.
        let (t, r) = rpe_with_scale(&pred, &gt, 1, 1.0).unwrap();
        let m = gt.poses[4].inverse().compose(&gt.poses[5]);
        let mh = pred.poses[4].inverse().compose(&pred.poses[5]);
        let e = m.inverse().compose(&mh);
        let cos = ((e.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let et = e.translation.norm();
        let er = cos.acos().to_degrees();
        assert!((t - (et * et / 9.0).sqrt()).abs() < 1e-9);
        assert!((r - (er * er / 9.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rpe_length_errors() {
        let gt = walk(3, 1);
        assert!(rpe_with_scale(&gt, &gt, 3, 1.0).is_err());
        assert!(rpe_with_scale(&gt, &gt, 0, 1.0).is_err());
        assert!(rpe_with_scale(&walk(4, 1), &gt, 1, 1.0).is_err());
    }
}
