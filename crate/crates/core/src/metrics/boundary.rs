//! Depth-boundary sharpness: ratio-contour F1 and Canny/chamfer edge error.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DepthMap;
use crate::scalar::{ordered_sum, Real};

/// Depth-ratio thresholds averaged by [`boundary_f1`].
pub const DEFAULT_F1_THRESHOLDS: [f64; 5] = [1.05, 1.10, 1.15, 1.20, 1.25];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryF1<T> {
    pub f1: T,
    pub per_threshold: Vec<T>,
    /// Set when pred or gt has no contour at some threshold.
    pub no_contour: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdbeConfig<T> {
    pub canny_low: T,
    pub canny_high: T,
    pub sigma: T,
}

impl<T: Real> Default for PdbeConfig<T> {
    fn default() -> Self {
        Self { canny_low: T::lit(0.1), canny_high: T::lit(0.2), sigma: T::lit(1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pdbe<T> {
    pub acc: T,
    pub comp: T,
    pub chamfer: T,
    pub pred_edges: usize,
    pub gt_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryMetrics<T> {
    pub f1: T,
    pub pdbe_chamfer: T,
    pub pdbe_acc: T,
    pub pdbe_comp: T,
}

fn check_pair<T: Real>(pred: &DepthMap<T>, gt: &DepthMap<T>) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!("{}x{} vs {}x{}", pred.height, pred.width, gt.height, gt.width)));
    }
    if pred.height < 2 || pred.width < 2 {
        return Err(Error::ShapeMismatch(format!("depth map {}x{} smaller than 2x2", pred.height, pred.width)));
    }
    Ok(())
}

/// Horizontally and vertically adjacent index pairs, row-major.
fn adjacent_pairs(h: usize, w: usize) -> impl Iterator<Item = (usize, usize)> {
    let horiz = (0..h).flat_map(move |r| (0..w - 1).map(move |c| (r * w + c, r * w + c + 1)));
    let vert = (0..h - 1).flat_map(move |r| (0..w).map(move |c| (r * w + c, (r + 1) * w + c)));
    horiz.chain(vert)
}

fn usable<T: Real>(d: &DepthMap<T>, i: usize) -> bool {
    d.mask[i] && d.values[i] > T::zero()
}

fn is_contour<T: Real>(a: T, b: T, t: T) -> bool {
    a.max(b) / a.min(b) > t
}

/// Mean F1 over thresholds of depth-ratio contours on adjacent pixel pairs.
///
/// A pair counts only when both pixels are valid and positive in both maps.
pub fn boundary_f1<T: Real>(pred: &DepthMap<T>, gt: &DepthMap<T>, thresholds: &[T]) -> Result<BoundaryF1<T>> {
    check_pair(pred, gt)?;
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("no F1 thresholds".into()));
    }
    let pairs: Vec<(usize, usize)> = adjacent_pairs(pred.height, pred.width)
        .filter(|&(a, b)| usable(pred, a) && usable(pred, b) && usable(gt, a) && usable(gt, b))
        .collect();
    let mut per_threshold = Vec::with_capacity(thresholds.len());
    let mut no_contour = false;
    for &t in thresholds {
        let (mut np, mut ng, mut both) = (0usize, 0usize, 0usize);
        for &(a, b) in &pairs {
            let p = is_contour(pred.values[a], pred.values[b], t);
            let g = is_contour(gt.values[a], gt.values[b], t);
            np += p as usize;
            ng += g as usize;
            both += (p && g) as usize;
        }
        no_contour |= np == 0 || ng == 0;
        let precision = if np > 0 { T::from_count(both) / T::from_count(np) } else { T::zero() };
        let recall = if ng > 0 { T::from_count(both) / T::from_count(ng) } else { T::zero() };
        let f1 = if precision + recall > T::zero() {
            T::lit(2.0) * precision * recall / (precision + recall)
        } else {
            T::zero()
        };
        per_threshold.push(f1);
    }
    let f1 = ordered_sum(per_threshold.iter().copied()) / T::from_count(per_threshold.len());
    Ok(BoundaryF1 { f1, per_threshold, no_contour })
}

/// Inverse depth min-max normalized to `[0, 1]` over usable pixels; others are 0.
pub fn normalized_inverse_depth<T: Real>(d: &DepthMap<T>) -> Vec<T> {
    let inv: Vec<Option<T>> = (0..d.len()).map(|i| usable(d, i).then(|| T::one() / d.values[i])).collect();
    let (mut lo, mut hi) = (None::<T>, None::<T>);
    for v in inv.iter().flatten() {
        lo = Some(lo.map_or(*v, |l| l.min(*v)));
        hi = Some(hi.map_or(*v, |h| h.max(*v)));
    }
    let (lo, hi) = match (lo, hi) {
        (Some(l), Some(h)) if h > l => (l, h),
        _ => return vec![T::zero(); d.len()],
    };
    inv.iter().map(|v| v.map_or(T::zero(), |x| (x - lo) / (hi - lo))).collect()
}

/// Separable Gaussian blur with radius `⌈3σ⌉` and clamped borders.
pub fn gaussian_blur<T: Real>(img: &[T], h: usize, w: usize, sigma: T) -> Vec<T> {
    if !(sigma > T::zero()) {
        return img.to_vec();
    }
    let radius = (T::lit(3.0) * sigma).ceil().as_f64() as isize;
    let weights: Vec<T> =
        (-radius..=radius).map(|i| (-T::lit((i * i) as f64) / (T::lit(2.0) * sigma * sigma)).exp()).collect();
    let total = ordered_sum(weights.iter().copied());
    let kernel: Vec<T> = weights.iter().map(|k| *k / total).collect();
    let clamp = |x: isize, n: usize| x.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![T::zero(); h * w];
    for r in 0..h {
        for c in 0..w {
            tmp[r * w + c] = ordered_sum(
                kernel.iter().enumerate().map(|(k, wt)| *wt * img[r * w + clamp(c as isize + k as isize - radius, w)]),
            );
        }
    }
    let mut out = vec![T::zero(); h * w];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = ordered_sum(
                kernel.iter().enumerate().map(|(k, wt)| *wt * tmp[clamp(r as isize + k as isize - radius, h) * w + c]),
            );
        }
    }
    out
}

/// Sobel gradients divided by 8, with clamped borders.
pub fn sobel<T: Real>(img: &[T], h: usize, w: usize) -> (Vec<T>, Vec<T>) {
    let at = |r: isize, c: isize| img[r.clamp(0, h as isize - 1) as usize * w + c.clamp(0, w as isize - 1) as usize];
    let two = T::lit(2.0);
    let eighth = T::lit(0.125);
    let mut gx = vec![T::zero(); h * w];
    let mut gy = vec![T::zero(); h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            gx[i] = (at(r - 1, c + 1) + two * at(r, c + 1) + at(r + 1, c + 1)
                - at(r - 1, c - 1)
                - two * at(r, c - 1)
                - at(r + 1, c - 1))
                * eighth;
            gy[i] = (at(r + 1, c - 1) + two * at(r + 1, c) + at(r + 1, c + 1)
                - at(r - 1, c - 1)
                - two * at(r - 1, c)
                - at(r - 1, c + 1))
                * eighth;
        }
    }
    (gx, gy)
}

/// Canny edges: blur, Sobel, non-maximum suppression, hysteresis with 8-connectivity.
///
/// Suppression keeps a pixel when its magnitude is positive, strictly above the
/// neighbour behind it along the gradient and at least the one ahead, which
/// yields single-pixel edges on symmetric ridges. Border pixels are never edges.
pub fn canny<T: Real>(img: &[T], h: usize, w: usize, low: T, high: T, sigma: T) -> Vec<bool> {
    let blurred = gaussian_blur(img, h, w, sigma);
    let (gx, gy) = sobel(&blurred, h, w);
    let mag: Vec<T> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let mut nms = vec![false; h * w];
    for r in 1..h.saturating_sub(1) {
        for c in 1..w.saturating_sub(1) {
            let i = r * w + c;
            if !(mag[i] > T::zero()) {
                continue;
            }
            let mut angle = gy[i].atan2(gx[i]).as_f64().to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (prev, next) = if !(22.5..157.5).contains(&angle) {
                (i - 1, i + 1)
            } else if angle < 67.5 {
                (i - w - 1, i + w + 1)
            } else if angle < 112.5 {
                (i - w, i + w)
            } else {
                (i - w + 1, i + w - 1)
            };
            nms[i] = mag[i] > mag[prev] && mag[i] >= mag[next];
        }
    }
    let mut edges = vec![false; h * w];
    let mut stack: Vec<usize> = (0..h * w).filter(|&i| nms[i] && mag[i] >= high).collect();
    for &i in &stack {
        edges[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                    continue;
                }
                let j = rr as usize * w + cc as usize;
                if !edges[j] && nms[j] && mag[j] >= low {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    edges
}

const FAR: f64 = 1e20;

/// 1-D squared distance transform of a sampled function (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance from every pixel to the nearest `true` pixel.
pub fn distance_transform(edges: &[bool], h: usize, w: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = edges.iter().map(|&e| if e { 0.0 } else { FAR }).collect();
    let mut col = vec![0.0; h];
    let mut out = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = grid[r * w + c];
        }
        edt_1d(&col, &mut out);
        for r in 0..h {
            grid[r * w + c] = out[r];
        }
    }
    let mut row_out = vec![0.0; w];
    for r in 0..h {
        edt_1d(&grid[r * w..(r + 1) * w], &mut row_out);
        grid[r * w..(r + 1) * w].copy_from_slice(&row_out);
    }
    grid.iter().map(|d| d.sqrt()).collect()
}

fn mean_distance<T: Real>(from: &[bool], to_dt: &[f64]) -> T {
    let d: Vec<T> = from.iter().zip(to_dt).filter(|(e, _)| **e).map(|(_, d)| T::lit(*d)).collect();
    let n = T::from_count(d.len());
    ordered_sum(d) / n
}

/// Chamfer distance between Canny edges of the two normalized inverse-depth maps.
pub fn pdbe<T: Real>(pred: &DepthMap<T>, gt: &DepthMap<T>, cfg: &PdbeConfig<T>) -> Result<Pdbe<T>> {
    check_pair(pred, gt)?;
    let (h, w) = (pred.height, pred.width);
    let ep = canny(&normalized_inverse_depth(pred), h, w, cfg.canny_low, cfg.canny_high, cfg.sigma);
    let eg = canny(&normalized_inverse_depth(gt), h, w, cfg.canny_low, cfg.canny_high, cfg.sigma);
    let (np, ng) = (ep.iter().filter(|e| **e).count(), eg.iter().filter(|e| **e).count());
    if np == 0 {
        return Err(Error::NoEdges("prediction"));
    }
    if ng == 0 {
        return Err(Error::NoEdges("ground truth"));
    }
    let acc = mean_distance(&ep, &distance_transform(&eg, h, w));
    let comp = mean_distance(&eg, &distance_transform(&ep, h, w));
    Ok(Pdbe { acc, comp, chamfer: (acc + comp) / T::lit(2.0), pred_edges: np, gt_edges: ng })
}

/// Boundary F1 and PDBE together.
pub fn boundary_metrics<T: Real>(
    pred: &DepthMap<T>,
    gt: &DepthMap<T>,
    thresholds: &[T],
    cfg: &PdbeConfig<T>,
) -> Result<BoundaryMetrics<T>> {
    let f1 = boundary_f1(pred, gt, thresholds)?.f1;
    let p = pdbe(pred, gt, cfg)?;
    Ok(BoundaryMetrics { f1, pdbe_chamfer: p.chamfer, pdbe_acc: p.acc, pdbe_comp: p.comp })
}
