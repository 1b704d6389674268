//! Forward evaluation of the training losses.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::alignment::{check_pointmap_pairing, roe_scale};
use crate::error::{Error, Result};
use crate::geometry::{
    geodesic_angle, pointmap_normals, pointmap_to_inverse_depth, relative_pose, scene_norm, DepthMap, Pointmap,
    Trajectory,
};
use crate::scalar::{ordered_sum, Real};
use crate::toy::TokenGrid;

/// Loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossConfig<T> {
    pub pointmap: T,
    pub camera: T,
    pub translation: T,
    pub rotation: T,
    pub scale: T,
    pub normal: T,
    pub gradient: T,
    pub distill: T,
}

impl<T: Real> Default for LossConfig<T> {
    fn default() -> Self {
        Self {
            pointmap: T::lit(1.0),
            camera: T::lit(0.1),
            translation: T::lit(100.0),
            rotation: T::lit(1.0),
            scale: T::lit(1.0),
            normal: T::lit(1.0),
            gradient: T::lit(0.1),
            distill: T::lit(0.5),
        }
    }
}

impl<T: Real> LossConfig<T> {
    fn weights(&self) -> [T; 8] {
        [
            self.pointmap,
            self.camera,
            self.translation,
            self.rotation,
            self.scale,
            self.normal,
            self.gradient,
            self.distill,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights().iter().all(|w| w.is_finite_value() && *w >= T::zero()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("loss weights must be finite and non-negative".into()))
        }
    }
}

/// Unweighted loss terms; absent terms do not enter the total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossTerms<T> {
    pub pointmap: Option<T>,
    pub camera: Option<T>,
    pub translation: Option<T>,
    pub rotation: Option<T>,
    pub scale: Option<T>,
    pub normal: Option<T>,
    pub gradient: Option<T>,
    pub distill: Option<T>,
}

impl<T: Real> LossTerms<T> {
    fn slots(&self) -> [(Option<T>, &'static str); 8] {
        [
            (self.pointmap, "pointmap"),
            (self.camera, "camera"),
            (self.translation, "translation"),
            (self.rotation, "rotation"),
            (self.scale, "scale"),
            (self.normal, "normal"),
            (self.gradient, "gradient"),
            (self.distill, "distill"),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport<T> {
    pub terms: LossTerms<T>,
    pub weights: LossConfig<T>,
    pub total: T,
}

/// Weighted sum `Σ λ·term` over the present terms, in a fixed order.
pub fn total_loss<T: Real>(terms: &LossTerms<T>, cfg: &LossConfig<T>) -> Result<LossReport<T>> {
    cfg.validate()?;
    let mut weighted = Vec::with_capacity(8);
    for ((term, name), w) in terms.slots().into_iter().zip(cfg.weights()) {
        if let Some(v) = term {
            if !v.is_finite_value() {
                return Err(Error::NonFiniteTerm(name));
            }
            weighted.push(w * v);
        }
    }
    Ok(LossReport { terms: *terms, weights: *cfg, total: ordered_sum(weighted) })
}

/// Scene-normalized copies `P/norm(P)` and the norms used.
fn normalized<T: Real>(maps: &[Pointmap<T>]) -> Result<(Vec<Pointmap<T>>, T)> {
    let n = scene_norm(maps)?;
    Ok((maps.iter().map(|p| p.scaled(T::one() / n)).collect(), n))
}

/// Optimal scale between the normalized maps, plus both norms.
fn normalized_alignment<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>]) -> Result<NormalizedPair<T>> {
    check_pointmap_pairing(pred, gt)?;
    let (pred_n, pred_norm) = normalized(pred)?;
    let (gt_n, gt_norm) = normalized(gt)?;
    let s = roe_scale(&pred_n, &gt_n)?;
    Ok(NormalizedPair { pred: pred_n, gt: gt_n, pred_norm, gt_norm, scale: s })
}

struct NormalizedPair<T: Real> {
    pred: Vec<Pointmap<T>>,
    gt: Vec<Pointmap<T>>,
    pred_norm: T,
    gt_norm: T,
    scale: T,
}

/// Mean over jointly valid pixels of `‖s*·p̂/norm(P̂) − p/norm(P)‖₁`.
///
/// `s*` is the L1-optimal scale between the two normalized pointmap sets, so the
/// value is invariant to any positive rescaling of the prediction.
pub fn pointmap_loss<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>]) -> Result<T> {
    let a = normalized_alignment(pred, gt)?;
    let mut terms = Vec::new();
    for (p, g) in a.pred.iter().zip(&a.gt) {
        for i in 0..p.len() {
            if p.mask[i] && g.mask[i] {
                terms.push((p.points[i] * a.scale - g.points[i]).lp_norm(1));
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let n = T::from_count(terms.len());
    Ok(ordered_sum(terms) / n)
}

/// Mean over ordered pairs `u ≠ v` of `λ_rot·∠(R̂_uv, R_uv) + λ_trans·‖t̂_uv − t_uv‖₁`.
pub fn camera_loss<T: Real>(pred: &Trajectory<T>, gt: &Trajectory<T>, lambda_rot: T, lambda_trans: T) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { expected: gt.len(), got: pred.len() });
    }
    let n = gt.len();
    if n < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: n });
    }
    let mut terms = Vec::with_capacity(n * (n - 1));
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let rp = relative_pose(&pred.poses[u], &pred.poses[v]);
            let rg = relative_pose(&gt.poses[u], &gt.poses[v]);
            let rot = geodesic_angle(&rp.rotation, &rg.rotation);
            let trans = (rp.translation - rg.translation).lp_norm(1);
            terms.push(lambda_rot * rot + lambda_trans * trans);
        }
    }
    Ok(ordered_sum(terms) / T::from_count(n * (n - 1)))
}

/// `|log ŝ − log(s*·norm(P)/norm(P̂))|`.
pub fn scale_loss<T: Real>(pred_scale: T, pred: &[Pointmap<T>], gt: &[Pointmap<T>]) -> Result<T> {
    if !(pred_scale > T::zero()) || !pred_scale.is_finite_value() {
        return Err(Error::NonPositiveScale(pred_scale.as_f64()));
    }
    let a = normalized_alignment(pred, gt)?;
    if !(a.scale > T::zero()) {
        return Err(Error::NonPositiveScale(a.scale.as_f64()));
    }
    let target = a.scale * a.gt_norm / a.pred_norm;
    Ok((pred_scale.ln() - target.ln()).abs())
}

/// Angle between two vectors in `[0, π]`.
fn vector_angle<T: Real>(a: &nalgebra::Vector3<T>, b: &nalgebra::Vector3<T>) -> T {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Mean angle in radians between cross-product normals, over pixels where both are valid.
pub fn normal_loss<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>]) -> Result<T> {
    check_pointmap_pairing(pred, gt)?;
    let mut terms = Vec::new();
    for (p, g) in pred.iter().zip(gt) {
        let (np, ng) = (pointmap_normals(p), pointmap_normals(g));
        for i in 0..np.len() {
            if np.mask[i] && ng.mask[i] {
                terms.push(vector_angle(&np.values[i], &ng.values[i]));
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = T::from_count(terms.len());
    Ok(ordered_sum(terms) / n)
}

/// Default pyramid factors for the gradient loss.
pub const DEFAULT_GRADIENT_SCALES: [usize; 3] = [1, 2, 4];

/// Multi-scale Scharr/Laplacian loss on canonical inverse depth.
///
/// The prediction is aligned with the same scale as [`pointmap_loss`]; both maps are
/// then converted to `norm/z` inverse depth.
pub fn gradient_loss<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>], scales: &[usize]) -> Result<T> {
    let a = normalized_alignment(pred, gt)?;
    if !(a.scale > T::zero()) {
        return Err(Error::NonPositiveScale(a.scale.as_f64()));
    }
    let pd: Vec<DepthMap<T>> = pred.iter().map(|p| pointmap_to_inverse_depth(p, a.pred_norm / a.scale)).collect();
    let gd: Vec<DepthMap<T>> = gt.iter().map(|p| pointmap_to_inverse_depth(p, a.gt_norm)).collect();
    gradient_loss_inverse_depth(&pd, &gd, scales)
}

/// Gradient loss on inverse-depth maps directly.
pub fn gradient_loss_inverse_depth<T: Real>(pred: &[DepthMap<T>], gt: &[DepthMap<T>], scales: &[usize]) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(Error::FrameCountMismatch(pred.len(), gt.len()));
    }
    if scales.is_empty() || scales.iter().any(|s| ![1, 2, 4, 8].contains(s)) {
        return Err(Error::InvalidArgument(format!(
            "gradient scales must be a non-empty subset of {{1,2,4,8}}, got {scales:?}"
        )));
    }
    for (p, g) in pred.iter().zip(gt) {
        if !p.same_shape(g) {
            return Err(Error::ShapeMismatch(format!("{}x{} vs {}x{}", p.height, p.width, g.height, g.width)));
        }
    }
    let mut per_scale = Vec::new();
    for &s in scales {
        let mut terms = Vec::new();
        for (p, g) in pred.iter().zip(gt) {
            let (p, g) = (pool_to_scale(p, s), pool_to_scale(g, s));
            collect_filter_diffs(&p, &g, &mut terms);
        }
        if !terms.is_empty() {
            let n = T::from_count(terms.len());
            per_scale.push(ordered_sum(terms) / n);
        }
    }
    if per_scale.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = T::from_count(per_scale.len());
    Ok(ordered_sum(per_scale) / n)
}

fn pool_to_scale<T: Real>(d: &DepthMap<T>, scale: usize) -> DepthMap<T> {
    let mut cur = d.clone();
    let mut s = 1;
    while s < scale {
        cur = average_pool2(&cur);
        s *= 2;
    }
    cur
}

/// 2×2 average pooling; a pooled cell is valid only when all four children are.
pub fn average_pool2<T: Real>(d: &DepthMap<T>) -> DepthMap<T> {
    let (h, w) = (d.height / 2, d.width / 2);
    let mut values = Vec::with_capacity(h * w);
    let mut mask = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let idx = [
                d.index(2 * r, 2 * c),
                d.index(2 * r, 2 * c + 1),
                d.index(2 * r + 1, 2 * c),
                d.index(2 * r + 1, 2 * c + 1),
            ];
            let ok = idx.iter().all(|&i| d.mask[i]);
            mask.push(ok);
            values.push(if ok { ordered_sum(idx.iter().map(|&i| d.values[i])) * T::lit(0.25) } else { T::zero() });
        }
    }
    DepthMap { height: h, width: w, values, mask }
}

/// Scharr-x, Scharr-y and Laplacian responses at an interior pixel.
pub fn filter_responses<T: Real>(d: &DepthMap<T>, r: usize, c: usize) -> [T; 3] {
    let v = |dr: usize, dc: usize| d.values[d.index(r + dr - 1, c + dc - 1)];
    let (three, ten, inv32) = (T::lit(3.0), T::lit(10.0), T::lit(1.0 / 32.0));
    let sx = (three * (v(0, 2) - v(0, 0)) + ten * (v(1, 2) - v(1, 0)) + three * (v(2, 2) - v(2, 0))) * inv32;
    let sy = (three * (v(2, 0) - v(0, 0)) + ten * (v(2, 1) - v(0, 1)) + three * (v(2, 2) - v(0, 2))) * inv32;
    let lap = v(0, 1) + v(2, 1) + v(1, 0) + v(1, 2) - T::lit(4.0) * v(1, 1);
    [sx, sy, lap]
}

fn support_valid<T: Real>(d: &DepthMap<T>, r: usize, c: usize) -> bool {
    (r - 1..=r + 1).all(|rr| (c - 1..=c + 1).all(|cc| d.is_valid(rr, cc)))
}

fn collect_filter_diffs<T: Real>(p: &DepthMap<T>, g: &DepthMap<T>, out: &mut Vec<T>) {
    if p.height < 3 || p.width < 3 {
        return;
    }
    for r in 1..p.height - 1 {
        for c in 1..p.width - 1 {
            if support_valid(p, r, c) && support_valid(g, r, c) {
                let (a, b) = (filter_responses(p, r, c), filter_responses(g, r, c));
                out.extend((0..3).map(|k| (a[k] - b[k]).abs()));
            }
        }
    }
}

/// `1 − mean cos(student·W, teacher)` over tokens; zero vectors count as similarity 0.
pub fn distill_loss<T: Real>(student: &TokenGrid<T>, teacher: &TokenGrid<T>, projection: &DMatrix<T>) -> Result<T> {
    if projection.nrows() != student.channels
        || projection.ncols() != teacher.channels
        || student.frame_count != teacher.frame_count
        || student.height != teacher.height
        || student.width != teacher.width
    {
        return Err(Error::ShapeMismatch(format!(
            "student {}x{}x{}x{} through {}x{} vs teacher {}x{}x{}x{}",
            student.frame_count,
            student.height,
            student.width,
            student.channels,
            projection.nrows(),
            projection.ncols(),
            teacher.frame_count,
            teacher.height,
            teacher.width,
            teacher.channels
        )));
    }
    let projected = student.as_matrix() * projection;
    let t = teacher.as_matrix();
    let n = projected.nrows();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let sims = (0..n).map(|i| {
        let (a, b) = (projected.row(i), t.row(i));
        let denom = a.norm() * b.norm();
        if denom > T::zero() {
            a.dot(&b) / denom
        } else {
            T::zero()
        }
    });
    Ok(T::one() - ordered_sum(sims) / T::from_count(n))
}
