use nalgebra::DMatrix;

use super::rope::{rope_apply, RopeConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-wise softmax of `QKᵀ/√d`, with the row maximum subtracted first.
pub fn attention_probabilities<T: Real>(q: &DMatrix<T>, k: &DMatrix<T>) -> Result<DMatrix<T>> {
    if q.ncols() != k.ncols() {
        return Err(Error::ShapeMismatch(format!("query dim {} vs key dim {}", q.ncols(), k.ncols())));
    }
    if k.nrows() == 0 {
        return Err(Error::ShapeMismatch("attention over zero keys".into()));
    }
    let scale = T::one() / T::from_count(q.ncols()).sqrt();
    let mut logits = q * k.transpose() * scale;
    for mut row in logits.row_iter_mut() {
        let max = row.iter().fold(row[0], |m, &v| m.max(v));
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(logits)
}

/// `softmax(R(Q)R(K)ᵀ/√d)·V` with RoPE applied to queries and keys at their positions.
pub fn attention<T: Real>(
    q: &DMatrix<T>,
    k: &DMatrix<T>,
    v: &DMatrix<T>,
    positions_q: &[[T; 2]],
    positions_k: &[[T; 2]],
    cfg: &RopeConfig<T>,
) -> Result<DMatrix<T>> {
    if k.nrows() != v.nrows() {
        return Err(Error::ShapeMismatch(format!("{} keys vs {} values", k.nrows(), v.nrows())));
    }
    let qr = rope_apply(q, positions_q, cfg)?;
    let kr = rope_apply(k, positions_k, cfg)?;
    Ok(attention_probabilities(&qr, &kr)? * v)
}
