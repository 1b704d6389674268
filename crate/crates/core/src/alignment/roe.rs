//! Robust single-scale alignment under a coordinate-wise L1 objective.
//!
//! `Σ |s·p̂ᶜ − pᶜ|` is piecewise linear and convex in `s`; rewriting each term as
//! `|p̂ᶜ|·|s − pᶜ/p̂ᶜ|` shows the exact minimizer is the weighted median of the
//! ratios `pᶜ/p̂ᶜ` with weights `|p̂ᶜ|`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::Pointmap;
use crate::scalar::Real;

const MIN_WEIGHT: f64 = 1e-9;

/// Lower weighted median: the smallest value whose cumulative weight reaches half the total.
///
/// Returns `None` for empty input or zero total weight.
pub fn weighted_median<T: Real>(samples: &mut [(T, T)]) -> Option<T> {
    if samples.is_empty() {
        return None;
    }
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let total = samples.iter().fold(T::zero(), |acc, s| acc + s.1);
    if total <= T::zero() {
        return None;
    }
    let half = total / T::lit(2.0);
    let mut cum = T::zero();
    for &(value, weight) in samples.iter() {
        cum += weight;
        if cum >= half {
            return Some(value);
        }
    }
    samples.last().map(|s| s.0)
}

/// Exact minimizer of `Σ |s·pred − gt|` over paired scalars.
///
/// Pairs with `|pred| ≤ 1e-9` carry no information about `s` and are skipped.
pub fn l1_scale<T: Real>(pairs: impl IntoIterator<Item = (T, T)>) -> Result<T> {
    let eps = T::lit(MIN_WEIGHT);
    let mut any = false;
    let mut samples: Vec<(T, T)> = pairs
        .into_iter()
        .inspect(|_| any = true)
        .filter(|(p, _)| p.abs() > eps)
        .map(|(p, g)| (g / p, p.abs()))
        .collect();
    if !any {
        return Err(Error::EmptyOverlap);
    }
    weighted_median(&mut samples).ok_or(Error::AllZeroPrediction)
}

fn check_pairing<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::FrameCountMismatch(pred.len(), gt.len()));
    }
    for (a, b) in pred.iter().zip(gt) {
        if !a.same_shape(b) {
            return Err(Error::ShapeMismatch(format!("{}x{} vs {}x{}", a.height, a.width, b.height, b.width)));
        }
    }
    Ok(())
}

/// Scale `s*` minimizing `Σ ‖s·p̂ − p‖₁` over the pixels valid in both inputs.
pub fn roe_scale<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>]) -> Result<T> {
    check_pairing(pred, gt)?;
    let pairs = pred.iter().zip(gt).flat_map(|(a, b)| {
        a.points
            .iter()
            .zip(&b.points)
            .zip(a.mask.iter().zip(&b.mask))
            .filter(|(_, (&ma, &mb))| ma && mb)
            .flat_map(|((pa, pb), _)| (0..3).map(move |c| (pa[c], pb[c])))
    });
    l1_scale(pairs)
}

pub(crate) fn check_pointmap_pairing<T: Real>(pred: &[Pointmap<T>], gt: &[Pointmap<T>]) -> Result<()> {
    check_pairing(pred, gt)
}
