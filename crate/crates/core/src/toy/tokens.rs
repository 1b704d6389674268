use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// N frames of h×w tokens with C channels, on an integer (row, col) lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid<T: Real> {
    pub frame_count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Frame-major, then row, then column, then channel.
    pub tokens: Vec<T>,
}

impl<T: Real> TokenGrid<T> {
    pub fn new(frame_count: usize, height: usize, width: usize, channels: usize, tokens: Vec<T>) -> Result<Self> {
        if tokens.len() != frame_count * height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "token grid {frame_count}x{height}x{width}x{channels} with {} values",
                tokens.len()
            )));
        }
        Ok(Self { frame_count, height, width, channels, tokens })
    }

    pub fn zeros(frame_count: usize, height: usize, width: usize, channels: usize) -> Self {
        Self { frame_count, height, width, channels, tokens: vec![T::zero(); frame_count * height * width * channels] }
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.height * self.width
    }

    /// Lattice coordinates `(row, col)` of the tokens of one frame.
    pub fn positions(&self) -> Vec<[usize; 2]> {
        lattice(self.height, self.width)
    }

    pub fn frame(&self, i: usize) -> &[T] {
        let n = self.tokens_per_frame() * self.channels;
        &self.tokens[i * n..(i + 1) * n]
    }

    /// One frame as a (h·w)×C matrix.
    pub fn frame_matrix(&self, i: usize) -> DMatrix<T> {
        DMatrix::from_row_slice(self.tokens_per_frame(), self.channels, self.frame(i))
    }

    /// All frames stacked as an (N·h·w)×C matrix.
    pub fn as_matrix(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.frame_count * self.tokens_per_frame(), self.channels, &self.tokens)
    }

    /// Inverse of [`as_matrix`](Self::as_matrix).
    pub fn with_matrix(&self, m: &DMatrix<T>) -> Result<Self> {
        if m.nrows() != self.frame_count * self.tokens_per_frame() {
            return Err(Error::ShapeMismatch(format!("{} rows for {} tokens", m.nrows(), self.tokens.len())));
        }
        let mut tokens = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            tokens.extend(m.row(r).iter().copied());
        }
        Self::new(self.frame_count, self.height, self.width, m.ncols(), tokens)
    }

    /// Frame `k` of the result is frame `perm[k]` of `self`.
    pub fn permute_frames(&self, perm: &[usize]) -> Self {
        let mut tokens = Vec::with_capacity(self.tokens.len());
        for &p in perm {
            tokens.extend_from_slice(self.frame(p));
        }
        Self { tokens, ..self.clone() }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.tokens.iter().zip(&other.tokens).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

/// Row-major `(row, col)` lattice for an h×w grid.
pub fn lattice(height: usize, width: usize) -> Vec<[usize; 2]> {
    (0..height).flat_map(|r| (0..width).map(move |c| [r, c])).collect()
}
