use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::check_pointmap_pairing;
use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Pointmap};
use crate::scalar::{ordered_sum, Real};

/// Inlier threshold on the relative point error.
pub const DEFAULT_TAU: f64 = 0.25;

const MIN_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointmapMetrics<T> {
    /// Mean relative error, percent.
    pub rel_p: T,
    /// Share of inlier pixels, percent.
    pub delta_p: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthMetrics<T> {
    pub rel_d: T,
    pub delta_d: T,
}

/// Per-pixel `(relative error, inlier)` pairs reduced to percentages.
fn reduce<T: Real>(per_frame: Vec<Vec<(T, bool)>>) -> Result<(T, T)> {
    let all: Vec<(T, bool)> = per_frame.into_iter().flatten().collect();
    if all.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let n = T::from_count(all.len());
    let hundred = T::lit(100.0);
    let rel = ordered_sum(all.iter().map(|e| e.0)) / n * hundred;
    let inliers = T::from_count(all.iter().filter(|e| e.1).count());
    Ok((rel, inliers / n * hundred))
}

fn pixel_error<T: Real>(diff: T, gt_norm: T, pred_norm: T, tau: T) -> (T, bool) {
    let rel = diff / gt_norm;
    let denom = gt_norm.min(pred_norm);
    let inlier = if denom > T::zero() { diff / denom < tau } else { diff == T::zero() };
    (rel, inlier)
}

/// Rel^p and δ^p over the jointly valid pixels of already-aligned pointmaps.
pub fn pointmap_metrics<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>], tau: T) -> Result<PointmapMetrics<T>> {
    check_pointmap_pairing(pred, gt)?;
    let per_frame: Vec<Vec<(T, bool)>> = pred
        .par_iter()
        .zip(gt.par_iter())
        .map(|(p, g)| {
            (0..p.len())
                .filter(|&i| p.mask[i] && g.mask[i])
                .filter_map(|i| {
                    let gn = g.points[i].norm();
                    if gn < T::lit(MIN_NORM) {
                        return None;
                    }
                    Some(pixel_error((p.points[i] - g.points[i]).norm(), gn, p.points[i].norm(), tau))
                })
                .collect()
        })
        .collect();
    let (rel_p, delta_p) = reduce(per_frame)?;
    Ok(PointmapMetrics { rel_p, delta_p })
}

/// Rel^d and δ^d on scalar depth.
pub fn depth_metrics<T: Real>(pred: &[DepthMap<T>], gt: &[DepthMap<T>], tau: T) -> Result<DepthMetrics<T>> {
    if pred.len() != gt.len() {
        return Err(Error::FrameCountMismatch(pred.len(), gt.len()));
    }
    for (p, g) in pred.iter().zip(gt) {
        if !p.same_shape(g) {
            return Err(Error::ShapeMismatch(format!("{}x{} vs {}x{}", p.height, p.width, g.height, g.width)));
        }
    }
    let per_frame: Vec<Vec<(T, bool)>> = pred
        .par_iter()
        .zip(gt.par_iter())
        .map(|(p, g)| {
            (0..p.len())
                .filter(|&i| p.mask[i] && g.mask[i])
                .filter_map(|i| {
                    let gn = g.values[i].abs();
                    if gn < T::lit(MIN_NORM) {
                        return None;
                    }
                    Some(pixel_error((p.values[i] - g.values[i]).abs(), gn, p.values[i].abs(), tau))
                })
                .collect()
        })
        .collect();
    let (rel_d, delta_d) = reduce(per_frame)?;
    Ok(DepthMetrics { rel_d, delta_d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use nalgebra::Vector3;

    fn random_map(seed: u64) -> Pointmap<f64> {
        let mut r = StreamRng::new(seed, 0);
        let pts = (0..64).map(|_| Vector3::new(r.normal(), r.normal(), 2.0 + r.uniform())).collect();
        let mask = (0..64).map(|_| r.uniform() > 0.1).collect();
        Pointmap::new(8, 8, pts, mask, 0).unwrap()
    }

    #[test]
    fn identity_and_uniform_scale() {
        let g = random_map(1);
        let m = pointmap_metrics(std::slice::from_ref(&g), std::slice::from_ref(&g), 0.25).unwrap();
        assert_eq!((m.rel_p, m.delta_p), (0.0, 100.0));
        let m = pointmap_metrics(&[g.scaled(1.2)], &[g], 0.25).unwrap();
        assert!((m.rel_p - 20.0).abs() < 1e-9);
        assert_eq!(m.delta_p, 100.0);
    }

    #[test]
    fn matches_per_pixel_oracle() {
        for seed in 0..5 {
            let (p, g) = (random_map(seed), random_map(seed + 100));
            let (mut rel, mut inl, mut n) = (Vec::new(), 0usize, 0usize);
            for i in 0..64 {
                if p.mask[i] && g.mask[i] {
                    let d = (p.points[i] - g.points[i]).norm();
                    rel.push(d / g.points[i].norm());
                    if d / g.points[i].norm().min(p.points[i].norm()) < 0.25 {
                        inl += 1;
                    }
                    n += 1;
                }
            }
            let m = pointmap_metrics(&[p], &[g], 0.25).unwrap();
            assert_eq!(m.rel_p, rel.iter().fold(0.0, |a, b| a + b) / n as f64 * 100.0);
            assert_eq!(m.delta_p, inl as f64 / n as f64 * 100.0);
        }
    }

    #[test]
    fn delta_monotone_in_tau() {
        let (p, g) = (random_map(3), random_map(4));
        let mut last = 0.0;
        for tau in [0.01, 0.1, 0.25, 0.5, 1.0, 2.0] {
            let d = pointmap_metrics(std::slice::from_ref(&p), std::slice::from_ref(&g), tau).unwrap().delta_p;
            assert!(d >= last);
            last = d;
        }
    }

    #[test]
    fn depth_cases() {
        let g = DepthMap::dense(4, 4, (1..=16).map(|v| v as f64).collect()).unwrap();
        let m = depth_metrics(std::slice::from_ref(&g), std::slice::from_ref(&g), 0.25).unwrap();
        assert_eq!((m.rel_d, m.delta_d), (0.0, 100.0));
        let p = g.map(|v| v * 1.1);
        assert!((depth_metrics(&[p], &[g], 0.25).unwrap().rel_d - 10.0).abs() < 1e-9);
    }

    #[test]
    fn empty_overlap_errors() {
        let mut a = random_map(1);
        a.mask = vec![false; 64];
        assert!(matches!(pointmap_metrics(std::slice::from_ref(&a), &[random_map(2)], 0.25), Err(Error::EmptyOverlap)));
    }
}
