//! Axial 2-D rotary positional encoding.
//!
//! Channel pair `p` (channels `2p, 2p+1`) rotates with the row coordinate when
//! `p` is even and the column coordinate when `p` is odd, at angular frequency
//! `base^(−⌊p/2⌋ / F)` where `F = ⌈(C/2)/2⌉` frequencies per axis.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RopeConfig<T> {
    pub base_frequency: T,
    /// Fixed maximum patch length that interpolated positions are rescaled to.
    pub l_max: usize,
    pub head_dim: usize,
}

impl<T: Real> RopeConfig<T> {
    pub fn new(base_frequency: T, l_max: usize, head_dim: usize) -> Result<Self> {
        let cfg = Self { base_frequency, l_max, head_dim };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.head_dim == 0 || !self.head_dim.is_multiple_of(2) {
            return Err(Error::InvalidHeadDim(self.head_dim));
        }
        if self.l_max == 0 || !(self.base_frequency > T::one()) {
            return Err(Error::InvalidArgument("rope needs l_max >= 1 and base_frequency > 1".into()));
        }
        Ok(())
    }

    fn frequencies(&self) -> Vec<T> {
        let pairs = self.head_dim / 2;
        let per_axis = T::from_count(pairs.div_ceil(2));
        (0..pairs).map(|p| self.base_frequency.powf(-T::from_count(p / 2) / per_axis)).collect()
    }
}

/// Rotation angle of every channel pair for a token at `position = (row, col)`.
pub fn rope_angles<T: Real>(position: [T; 2], cfg: &RopeConfig<T>) -> Vec<T> {
    cfg.frequencies().into_iter().enumerate().map(|(p, w)| position[p % 2] * w).collect()
}

/// Rotates each row of `x` by the RoPE angles of its position.
pub fn rope_apply<T: Real>(x: &DMatrix<T>, positions: &[[T; 2]], cfg: &RopeConfig<T>) -> Result<DMatrix<T>> {
    cfg.validate()?;
    if x.ncols() != cfg.head_dim || x.nrows() != positions.len() {
        return Err(Error::ShapeMismatch(format!(
            "rope on {}x{} with {} positions and head_dim {}",
            x.nrows(),
            x.ncols(),
            positions.len(),
            cfg.head_dim
        )));
    }
    let freqs = cfg.frequencies();
    let mut out = x.clone();
    for (r, pos) in positions.iter().enumerate() {
        for (p, w) in freqs.iter().enumerate() {
            let theta = pos[p % 2] * *w;
            let (s, c) = theta.sin_cos();
            let (a, b) = (x[(r, 2 * p)], x[(r, 2 * p + 1)]);
            out[(r, 2 * p)] = a * c - b * s;
            out[(r, 2 * p + 1)] = a * s + b * c;
        }
    }
    Ok(out)
}

/// Integer lattice positions as scalars.
pub fn standard_positions<T: Real>(positions: &[[usize; 2]]) -> Vec<[T; 2]> {
    positions.iter().map(|m| [T::from_count(m[0]), T::from_count(m[1])]).collect()
}

/// Effective positions `m · l_max / l_cur`.
pub fn interp_positions<T: Real>(positions: &[[usize; 2]], l_max: usize, l_cur: usize) -> Result<Vec<[T; 2]>> {
    if l_cur == 0 {
        return Err(Error::InvalidArgument("l_cur must be >= 1".into()));
    }
    let (lm, lc) = (T::from_count(l_max), T::from_count(l_cur));
    Ok(positions.iter().map(|m| [T::from_count(m[0]) * lm / lc, T::from_count(m[1]) * lm / lc]).collect())
}

/// RoPE at positions rescaled from an `l_cur`-long grid to the fixed `l_max`.
pub fn interp_rope_apply<T: Real>(
    tokens: &DMatrix<T>,
    positions: &[[usize; 2]],
    cfg: &RopeConfig<T>,
    l_cur: usize,
) -> Result<DMatrix<T>> {
    rope_apply(tokens, &interp_positions(positions, cfg.l_max, l_cur)?, cfg)
}

/// Nearest low-resolution cell of each high-resolution coordinate, aligning cell centers.
///
/// Per axis: `round((m + 0.5)·lr/hr − 0.5)` clamped to `[0, lr − 1]`; halves round away from zero.
pub fn snap_positions(
    hr_positions: &[[usize; 2]],
    lr_shape: (usize, usize),
    hr_shape: (usize, usize),
) -> Vec<[usize; 2]> {
    let snap = |m: usize, lr: usize, hr: usize| -> usize {
        let x = ((m as f64 + 0.5) * lr as f64 / hr as f64 - 0.5).round();
        x.clamp(0.0, (lr - 1) as f64) as usize
    };
    hr_positions.iter().map(|m| [snap(m[0], lr_shape.0, hr_shape.0), snap(m[1], lr_shape.1, hr_shape.1)]).collect()
}
