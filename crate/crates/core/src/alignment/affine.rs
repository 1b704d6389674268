use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DepthMap;
use crate::scalar::Real;

const IRLS_ITERATIONS: usize = 50;
const IRLS_WEIGHT_FLOOR: f64 = 1e-6;

/// Scale and shift mapping predicted depth onto ground truth: `scale·d̂ + shift ≈ d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineAlign<T> {
    pub scale: T,
    pub shift: T,
}

impl<T: Real> AffineAlign<T> {
    pub fn apply(&self, d: T) -> T {
        self.scale * d + self.shift
    }
}

fn weighted_fit<T: Real>(pairs: &[(T, T)], weights: Option<&[T]>) -> Result<AffineAlign<T>> {
    let w = |i: usize| weights.map_or(T::one(), |w| w[i]);
    let mut sw = T::zero();
    let (mut mx, mut my) = (T::zero(), T::zero());
    for (i, &(x, y)) in pairs.iter().enumerate() {
        sw += w(i);
        mx += w(i) * x;
        my += w(i) * y;
    }
    mx /= sw;
    my /= sw;
    let (mut sxx, mut sxy) = (T::zero(), T::zero());
    for (i, &(x, y)) in pairs.iter().enumerate() {
        let dx = x - mx;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * (y - my);
    }
    let spread = pairs.iter().fold(T::zero(), |acc, p| acc.max(p.0.abs()));
    if sxx <= T::default_epsilon() * spread * spread * sw {
        return Err(Error::RankDeficient("predicted depths are constant"));
    }
    let scale = sxy / sxx;
    Ok(AffineAlign { scale, shift: my - scale * mx })
}

/// Shared scale and shift over every frame.
///
/// `robust = false` solves least squares; `robust = true` minimizes the L1
/// residual by iteratively reweighted least squares started from that solution.
pub fn affine_align_depth<T: Real>(pred: &[DepthMap<T>], gt: &[DepthMap<T>], robust: bool) -> Result<AffineAlign<T>> {
    if pred.len() != gt.len() {
        return Err(Error::FrameCountMismatch(pred.len(), gt.len()));
    }
    let mut pairs = Vec::new();
    for (a, b) in pred.iter().zip(gt) {
        if !a.same_shape(b) {
            return Err(Error::ShapeMismatch(format!("{}x{} vs {}x{}", a.height, a.width, b.height, b.width)));
        }
        for i in 0..a.len() {
            if a.mask[i] && b.mask[i] {
                pairs.push((a.values[i], b.values[i]));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let g0 = pairs[0].1;
    if pairs.len() < 2 || pairs.iter().all(|p| p.1 == g0) {
        return Err(Error::RankDeficient("need two distinct ground-truth values"));
    }
    let mut fit = weighted_fit(&pairs, None)?;
    if robust {
        let floor = T::lit(IRLS_WEIGHT_FLOOR);
        let mut weights = vec![T::one(); pairs.len()];
        for _ in 0..IRLS_ITERATIONS {
            for (w, &(x, y)) in weights.iter_mut().zip(&pairs) {
                *w = T::one() / (fit.apply(x) - y).abs().max(floor);
            }
            fit = weighted_fit(&pairs, Some(&weights))?;
        }
    }
    Ok(fit)
}
