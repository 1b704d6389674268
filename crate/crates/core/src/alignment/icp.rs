use nalgebra::Vector3;
use serde::Serialize;

use super::umeyama;
use crate::error::{Error, Result};
use crate::geometry::Sim3;
use crate::scalar::Real;
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcpConfig<T> {
    pub max_iterations: usize,
    /// Stop once the mean residual drops by less than this between iterations.
    pub convergence_tol: T,
    /// Pairs farther apart than this (meters) are ignored.
    pub max_correspondence_dist: T,
}

impl<T: Real> Default for IcpConfig<T> {
    fn default() -> Self {
        Self { max_iterations: 50, convergence_tol: T::lit(1e-10), max_correspondence_dist: T::lit(0.1) }
    }
}

impl<T: Real> IcpConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || !(self.convergence_tol > T::zero())
            || !(self.max_correspondence_dist > T::zero())
        {
            return Err(Error::InvalidArgument("icp needs max_iterations >= 1 and positive tolerances".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult<T: Real> {
    /// Rigid refinement composed onto the initial transform.
    pub transform: Sim3<T>,
    /// Mean matched-pair distance after each accepted step; element 0 is the initial residual.
    pub residuals: Vec<T>,
    pub converged: bool,
}

struct Matches<T: Real> {
    src: Vec<Vector3<T>>,
    dst: Vec<Vector3<T>>,
    mean: T,
}

fn correspond<T: Real>(
    src: &[Vector3<T>],
    dst: &[Vector3<T>],
    tree: &KdTree<'_, T>,
    t: &Sim3<T>,
    cap: T,
) -> Matches<T> {
    let mut m = Matches { src: Vec::new(), dst: Vec::new(), mean: T::zero() };
    let mut total = T::zero();
    for p in src {
        let q = t.apply(p);
        if let Some((j, _)) = tree.nearest(&q) {
            let d = (dst[j] - q).norm();
            if d <= cap {
                total += d;
                m.src.push(q);
                m.dst.push(dst[j]);
            }
        }
    }
    if !m.src.is_empty() {
        m.mean = total / T::from_count(m.src.len());
    }
    m
}

/// Point-to-point ICP refining `init` with rigid increments.
///
/// A step is accepted only if it does not increase the mean matched residual,
/// so `residuals` is non-increasing.
pub fn icp_refine<T: Real>(
    src: &[Vector3<T>],
    dst: &[Vector3<T>],
    init: &Sim3<T>,
    cfg: &IcpConfig<T>,
) -> Result<IcpResult<T>> {
    cfg.validate()?;
    let tree = KdTree::new(dst);
    let cap = cfg.max_correspondence_dist;
    let mut current = *init;
    let mut matches = correspond(src, dst, &tree, &current, cap);
    if matches.src.is_empty() {
        return Err(Error::NoCorrespondences(cap.as_f64()));
    }
    let mut residuals = vec![matches.mean];
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let step = match umeyama(&matches.src, &matches.dst, false) {
            Ok(step) => step,
            Err(_) => break,
        };
        let candidate = step.compose(&current);
        let next = correspond(src, dst, &tree, &candidate, cap);
        if next.src.is_empty() || next.mean > matches.mean {
            converged = true;
            break;
        }
        let improvement = matches.mean - next.mean;
        current = candidate;
        residuals.push(next.mean);
        matches = next;
        if improvement < cfg.convergence_tol {
            converged = true;
            break;
        }
    }
    debug_assert!(residuals.windows(2).all(|w| w[1] <= w[0]));
    Ok(IcpResult { transform: current, residuals, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_sim3, axis_angle};
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn cloud(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut x = seed.wrapping_add(0x2545_f491_4f6c_dd1d);
        let mut u = move || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n).map(|_| Vector3::new(u(), u(), u())).collect()
    }

    #[test]
    fn identical_sets_stay_at_identity() {
        let p = cloud(200, 1);
        let r = icp_refine(&p, &p, &Sim3::identity(), &IcpConfig::default()).unwrap();
        assert_eq!(r.residuals[0], 0.0);
        assert_abs_diff_eq!(r.transform.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.transform.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn recovers_small_rigid_motion() {
        let src = cloud(500, 2);
        let truth =
            Sim3::new(1.0, axis_angle(&Vector3::new(0.2, 1.0, 0.4), 1f64.to_radians()), Vector3::new(0.01, 0.0, 0.0));
        let dst = apply_sim3(&truth, &src);
        let r = icp_refine(&src, &dst, &Sim3::identity(), &IcpConfig::default()).unwrap();
        assert!(*r.residuals.last().unwrap() < 1e-6, "{:?}", r.residuals);
        assert_abs_diff_eq!(r.transform.rotation, truth.rotation, epsilon = 1e-6);
        assert_abs_diff_eq!(r.transform.translation, truth.translation, epsilon = 1e-6);
    }

    #[test]
    fn partial_overlap_never_increases_residual() {
        let full = cloud(1000, 3);
        let src: Vec<_> = full.iter().copied().filter(|p| p.x < 0.7).collect();
        let motion = Sim3::new(1.0, axis_angle(&Vector3::z(), 0.02), Vector3::new(0.01, 0.02, 0.0));
        let dst: Vec<_> = apply_sim3(&motion, &full).into_iter().filter(|p| p.x > 0.3).collect();
        let cfg = IcpConfig { max_correspondence_dist: 0.05, ..IcpConfig::default() };
        let r = icp_refine(&src, &dst, &Sim3::identity(), &cfg).unwrap();
        assert!(r.residuals.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.residuals.last().unwrap() <= &r.residuals[0]);
    }

    #[test]
    fn keeps_initial_scale() {
        let src = cloud(300, 4);
        let init = Sim3::new(2.0, Matrix3::identity(), Vector3::zeros());
        let dst = apply_sim3(&init, &src);
        let r = icp_refine(&src, &dst, &init, &IcpConfig::default()).unwrap();
        assert_eq!(r.transform.scale, 2.0);
    }

    #[test]
    fn far_apart_sets_have_no_correspondences() {
        let src = cloud(50, 5);
        let dst: Vec<_> = src.iter().map(|p| p + Vector3::new(10.0, 0.0, 0.0)).collect();
        let err = icp_refine(&src, &dst, &Sim3::identity(), &IcpConfig::default());
        assert!(matches!(err, Err(Error::NoCorrespondences(_))));
    }
}
