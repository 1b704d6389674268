use nalgebra::{DMatrix, RowDVector};

use super::attention::attention;
use super::rope::{interp_positions, snap_positions, standard_positions, RopeConfig};
use super::tokens::{lattice, TokenGrid};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::scalar::Real;

/// Number of [CrossAttn → SelfAttn] adapter blocks in the fusion stack.
pub const ADAPTER_DEPTH: usize = 5;
/// Number of [FrameAttn → GlobalAttn] pairs in the low-resolution stream.
pub const LR_PAIRS: usize = 2;

const LN_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T: Real> {
    pub gamma: RowDVector<T>,
    pub beta: RowDVector<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn identity(c: usize) -> Self {
        Self { gamma: RowDVector::from_element(c, T::one()), beta: RowDVector::zeros(c) }
    }

    fn random(c: usize, rng: &mut StreamRng) -> Self {
        Self {
            gamma: RowDVector::from_fn(c, |_, _| T::lit(1.0 + 0.1 * rng.normal())),
            beta: RowDVector::from_fn(c, |_, _| T::lit(0.1 * rng.normal())),
        }
    }

    pub fn forward(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let c = T::from_count(x.ncols());
        let mut out = x.clone();
        for mut row in out.row_iter_mut() {
            let mean = row.iter().fold(T::zero(), |a, &v| a + v) / c;
            let var = row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / c;
            let inv = T::one() / (var + T::lit(LN_EPS)).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv * self.gamma[j] + self.beta[j];
            }
        }
        out
    }
}

/// Projections of one single-head attention layer; tokens are row vectors (`x·W`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T: Real> {
    pub wq: DMatrix<T>,
    pub wk: DMatrix<T>,
    pub wv: DMatrix<T>,
    pub wo: DMatrix<T>,
}

impl<T: Real> AttentionWeights<T> {
    fn random(c: usize, rng: &mut StreamRng) -> Self {
        Self {
            wq: random_matrix(c, c, rng),
            wk: random_matrix(c, c, rng),
            wv: random_matrix(c, c, rng),
            wo: random_matrix(c, c, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights<T: Real> {
    pub w1: DMatrix<T>,
    pub b1: RowDVector<T>,
    pub w2: DMatrix<T>,
    pub b2: RowDVector<T>,
}

impl<T: Real> MlpWeights<T> {
    fn random(c: usize, hidden: usize, rng: &mut StreamRng, zero_output: bool) -> Self {
        let w1 = random_matrix(c, hidden, rng);
        let b1 = RowDVector::from_fn(hidden, |_, _| T::lit(0.1 * rng.normal()));
        let (w2, b2) = if zero_output {
            (DMatrix::zeros(hidden, c), RowDVector::zeros(c))
        } else {
            (random_matrix(hidden, c, rng), RowDVector::from_fn(c, |_, _| T::lit(0.1 * rng.normal())))
        };
        Self { w1, b1, w2, b2 }
    }

    pub fn forward(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut h = x * &self.w1;
        for mut row in h.row_iter_mut() {
            row += &self.b1;
            row.apply(|v| *v = gelu(*v));
        }
        let mut out = h * &self.w2;
        for mut row in out.row_iter_mut() {
            row += &self.b2;
        }
        out
    }
}

/// Pre-norm transformer block: `x + Attn(LN₁ x)`, then `+ MLP(LN₂ ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights<T: Real> {
    pub norm_attn: LayerNorm<T>,
    pub attn: AttentionWeights<T>,
    pub norm_mlp: LayerNorm<T>,
    pub mlp: MlpWeights<T>,
}

impl<T: Real> BlockWeights<T> {
    pub fn random(c: usize, hidden: usize, rng: &mut StreamRng) -> Self {
        Self {
            norm_attn: LayerNorm::random(c, rng),
            attn: AttentionWeights::random(c, rng),
            norm_mlp: LayerNorm::random(c, rng),
            mlp: MlpWeights::random(c, hidden, rng, false),
        }
    }
}

/// One adapter block: cross-attention from HR queries to LR keys/values, then
/// self-attention on the fused tokens and a residual MLP back onto the HR input.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterWeights<T: Real> {
    pub norm_hr: LayerNorm<T>,
    pub norm_lr: LayerNorm<T>,
    pub cross: AttentionWeights<T>,
    pub norm_self: LayerNorm<T>,
    pub self_attn: AttentionWeights<T>,
    pub norm_mlp: LayerNorm<T>,
    pub mlp: MlpWeights<T>,
}

impl<T: Real> AdapterWeights<T> {
    /// Random weights; `zero_output` zeroes the MLP's final projection and bias.
    pub fn random(c: usize, hidden: usize, rng: &mut StreamRng, zero_output: bool) -> Self {
        Self {
            norm_hr: LayerNorm::random(c, rng),
            norm_lr: LayerNorm::random(c, rng),
            cross: AttentionWeights::random(c, rng),
            norm_self: LayerNorm::random(c, rng),
            self_attn: AttentionWeights::random(c, rng),
            norm_mlp: LayerNorm::random(c, rng),
            mlp: MlpWeights::random(c, hidden, rng, zero_output),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseWeights<T: Real> {
    /// `(frame, global)` block pairs of the LR stream.
    pub lr_stream: Vec<(BlockWeights<T>, BlockWeights<T>)>,
    pub adapter: Vec<AdapterWeights<T>>,
}

impl<T: Real> FuseWeights<T> {
    /// Toy-sized weights drawn from `seed`; adapter outputs start at zero when `zero_init`.
    pub fn random(channels: usize, seed: u64, zero_init: bool) -> Self {
        let hidden = 2 * channels;
        let mut rng = StreamRng::new(seed, 0);
        let lr_stream = (0..LR_PAIRS)
            .map(|_| {
                (BlockWeights::random(channels, hidden, &mut rng), BlockWeights::random(channels, hidden, &mut rng))
            })
            .collect();
        let adapter =
            (0..ADAPTER_DEPTH).map(|_| AdapterWeights::random(channels, hidden, &mut rng, zero_init)).collect();
        Self { lr_stream, adapter }
    }

    /// Every parameter as a matrix, in a fixed order (row vectors become 1×C).
    pub fn to_matrices(&self) -> Vec<DMatrix<T>> {
        let mut out = Vec::new();
        for (f, g) in &self.lr_stream {
            push_block(&mut out, f);
            push_block(&mut out, g);
        }
        for a in &self.adapter {
            push_norm(&mut out, &a.norm_hr);
            push_norm(&mut out, &a.norm_lr);
            push_attn(&mut out, &a.cross);
            push_norm(&mut out, &a.norm_self);
            push_attn(&mut out, &a.self_attn);
            push_norm(&mut out, &a.norm_mlp);
            push_mlp(&mut out, &a.mlp);
        }
        out
    }

    /// Inverse of [`to_matrices`](Self::to_matrices).
    pub fn from_matrices(mats: Vec<DMatrix<T>>) -> Result<Self> {
        let per_block = 12;
        let per_adapter = 20;
        let expected = LR_PAIRS * 2 * per_block + ADAPTER_DEPTH * per_adapter;
        if mats.len() != expected {
            return Err(Error::LengthMismatch { expected, got: mats.len() });
        }
        let c = mats[0].ncols();
        let mut it = mats.into_iter();
        let mut lr_stream = Vec::new();
        for _ in 0..LR_PAIRS {
            let f = take_block(&mut it)?;
            let g = take_block(&mut it)?;
            lr_stream.push((f, g));
        }
        let mut adapter = Vec::new();
        for _ in 0..ADAPTER_DEPTH {
            adapter.push(AdapterWeights {
                norm_hr: take_norm(&mut it)?,
                norm_lr: take_norm(&mut it)?,
                cross: take_attn(&mut it)?,
                norm_self: take_norm(&mut it)?,
                self_attn: take_attn(&mut it)?,
                norm_mlp: take_norm(&mut it)?,
                mlp: take_mlp(&mut it)?,
            });
        }
        let w = Self { lr_stream, adapter };
        w.check_channels(c)?;
        Ok(w)
    }

    pub fn channels(&self) -> usize {
        self.adapter.first().map_or(0, |a| a.cross.wq.nrows())
    }

    fn check_channels(&self, c: usize) -> Result<()> {
        let ok = self.to_matrices().iter().all(|m| m.nrows() == c || m.ncols() == c || m.nrows() == 1);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("inconsistent weight shapes".into()))
        }
    }
}

fn push_norm<T: Real>(out: &mut Vec<DMatrix<T>>, n: &LayerNorm<T>) {
    out.push(row_matrix(&n.gamma));
    out.push(row_matrix(&n.beta));
}

fn push_attn<T: Real>(out: &mut Vec<DMatrix<T>>, a: &AttentionWeights<T>) {
    out.extend([a.wq.clone(), a.wk.clone(), a.wv.clone(), a.wo.clone()]);
}

fn push_mlp<T: Real>(out: &mut Vec<DMatrix<T>>, m: &MlpWeights<T>) {
    out.extend([m.w1.clone(), row_matrix(&m.b1), m.w2.clone(), row_matrix(&m.b2)]);
}

fn push_block<T: Real>(out: &mut Vec<DMatrix<T>>, b: &BlockWeights<T>) {
    push_norm(out, &b.norm_attn);
    push_attn(out, &b.attn);
    push_norm(out, &b.norm_mlp);
    push_mlp(out, &b.mlp);
}

fn row_matrix<T: Real>(v: &RowDVector<T>) -> DMatrix<T> {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

fn next<T: Real>(it: &mut impl Iterator<Item = DMatrix<T>>) -> Result<DMatrix<T>> {
    it.next().ok_or_else(|| Error::Format("truncated weight list".into()))
}

fn next_row<T: Real>(it: &mut impl Iterator<Item = DMatrix<T>>) -> Result<RowDVector<T>> {
    let m = next(it)?;
    if m.nrows() != 1 {
        return Err(Error::ShapeMismatch(format!("expected a row vector, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(RowDVector::from_row_slice(m.as_slice()))
}

fn take_norm<T: Real>(it: &mut impl Iterator<Item = DMatrix<T>>) -> Result<LayerNorm<T>> {
    Ok(LayerNorm { gamma: next_row(it)?, beta: next_row(it)? })
}

fn take_attn<T: Real>(it: &mut impl Iterator<Item = DMatrix<T>>) -> Result<AttentionWeights<T>> {
    Ok(AttentionWeights { wq: next(it)?, wk: next(it)?, wv: next(it)?, wo: next(it)? })
}

fn take_mlp<T: Real>(it: &mut impl Iterator<Item = DMatrix<T>>) -> Result<MlpWeights<T>> {
    Ok(MlpWeights { w1: next(it)?, b1: next_row(it)?, w2: next(it)?, b2: next_row(it)? })
}

fn take_block<T: Real>(it: &mut impl Iterator<Item = DMatrix<T>>) -> Result<BlockWeights<T>> {
    Ok(BlockWeights { norm_attn: take_norm(it)?, attn: take_attn(it)?, norm_mlp: take_norm(it)?, mlp: take_mlp(it)? })
}

fn random_matrix<T: Real>(rows: usize, cols: usize, rng: &mut StreamRng) -> DMatrix<T> {
    let std = 1.0 / (rows as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| T::lit(std * rng.normal()))
}

/// GELU, tanh approximation.
pub fn gelu<T: Real>(x: T) -> T {
    let k = T::lit((2.0 / std::f64::consts::PI).sqrt());
    T::lit(0.5) * x * (T::one() + (k * (x + T::lit(0.044715) * x * x * x)).tanh())
}

fn check_grid<T: Real>(x: &TokenGrid<T>, rope: &RopeConfig<T>) -> Result<()> {
    rope.validate()?;
    if x.channels != rope.head_dim {
        return Err(Error::ShapeMismatch(format!("{} channels vs head_dim {}", x.channels, rope.head_dim)));
    }
    if x.height == 0 || x.width == 0 || x.frame_count == 0 {
        return Err(Error::ShapeMismatch("empty token grid".into()));
    }
    Ok(())
}

/// Pre-norm self-attention block where each query group attends to the keys in `key_span(group)`.
fn self_attention_block<T: Real>(
    x: &TokenGrid<T>,
    w: &BlockWeights<T>,
    rope: &RopeConfig<T>,
    joint: bool,
) -> Result<TokenGrid<T>> {
    check_grid(x, rope)?;
    let l_cur = x.height.max(x.width);
    let frame_pos = interp_positions(&x.positions(), rope.l_max, l_cur)?;
    let all = x.as_matrix();
    let y = w.norm_attn.forward(&all);
    let (q, k, v) = (&y * &w.attn.wq, &y * &w.attn.wk, &y * &w.attn.wv);
    let n = x.tokens_per_frame();
    let mut attended = DMatrix::zeros(all.nrows(), all.ncols());
    if joint {
        let pos: Vec<[T; 2]> = (0..x.frame_count).flat_map(|_| frame_pos.iter().copied()).collect();
        attended = attention(&q, &k, &v, &pos, &pos, rope)?;
    } else {
        for f in 0..x.frame_count {
            let (qf, kf, vf) =
                (q.rows(f * n, n).into_owned(), k.rows(f * n, n).into_owned(), v.rows(f * n, n).into_owned());
            let a = attention(&qf, &kf, &vf, &frame_pos, &frame_pos, rope)?;
            attended.rows_mut(f * n, n).copy_from(&a);
        }
    }
    let x1 = all + attended * &w.attn.wo;
    let x2 = &x1 + w.mlp.forward(&w.norm_mlp.forward(&x1));
    x.with_matrix(&x2)
}

/// Self-attention within each frame independently, with interpolated RoPE.
pub fn frame_attention<T: Real>(x: &TokenGrid<T>, w: &BlockWeights<T>, rope: &RopeConfig<T>) -> Result<TokenGrid<T>> {
    self_attention_block(x, w, rope, false)
}

/// Self-attention over all tokens of all frames; positions carry no frame index.
pub fn global_attention<T: Real>(x: &TokenGrid<T>, w: &BlockWeights<T>, rope: &RopeConfig<T>) -> Result<TokenGrid<T>> {
    self_attention_block(x, w, rope, true)
}

/// Alternating [FrameAttn → GlobalAttn] pairs.
pub fn lr_stream_forward<T: Real>(
    x: &TokenGrid<T>,
    weights: &[(BlockWeights<T>, BlockWeights<T>)],
    rope: &RopeConfig<T>,
) -> Result<TokenGrid<T>> {
    let mut cur = x.clone();
    for (f, g) in weights {
        cur = frame_attention(&cur, f, rope)?;
        cur = global_attention(&cur, g, rope)?;
    }
    Ok(cur)
}

/// `F^fuse = CrossAttn(HR, LR)`, then `HR + MLP(SelfAttn(F^fuse))`, frame by frame.
pub fn adapter_block<T: Real>(
    f_hr: &TokenGrid<T>,
    f_lr: &TokenGrid<T>,
    w: &AdapterWeights<T>,
    rope: &RopeConfig<T>,
) -> Result<TokenGrid<T>> {
    check_grid(f_hr, rope)?;
    check_grid(f_lr, rope)?;
    if f_hr.frame_count != f_lr.frame_count {
        return Err(Error::FrameCountMismatch(f_hr.frame_count, f_lr.frame_count));
    }
    let hr_lattice = f_hr.positions();
    let q_pos =
        standard_positions::<T>(&snap_positions(&hr_lattice, (f_lr.height, f_lr.width), (f_hr.height, f_hr.width)));
    let k_pos = standard_positions::<T>(&lattice(f_lr.height, f_lr.width));
    let self_pos = interp_positions::<T>(&hr_lattice, rope.l_max, f_hr.height.max(f_hr.width))?;

    let mut out = Vec::with_capacity(f_hr.tokens.len());
    for i in 0..f_hr.frame_count {
        let hr = f_hr.frame_matrix(i);
        let qn = w.norm_hr.forward(&hr);
        let kn = w.norm_lr.forward(&f_lr.frame_matrix(i));
        let fuse = attention(&(&qn * &w.cross.wq), &(&kn * &w.cross.wk), &(&kn * &w.cross.wv), &q_pos, &k_pos, rope)?
            * &w.cross.wo;
        let sn = w.norm_self.forward(&fuse);
        let s = attention(
            &(&sn * &w.self_attn.wq),
            &(&sn * &w.self_attn.wk),
            &(&sn * &w.self_attn.wv),
            &self_pos,
            &self_pos,
            rope,
        )? * &w.self_attn.wo;
        let y = hr + w.mlp.forward(&w.norm_mlp.forward(&s));
        for r in 0..y.nrows() {
            out.extend(y.row(r).iter().copied());
        }
    }
    TokenGrid::new(f_hr.frame_count, f_hr.height, f_hr.width, f_hr.channels, out)
}

/// LR stream followed by the adapter stack; returns the fused HR tokens.
pub fn fuse_forward<T: Real>(
    lr: &TokenGrid<T>,
    hr: &TokenGrid<T>,
    weights: &FuseWeights<T>,
    rope: &RopeConfig<T>,
) -> Result<TokenGrid<T>> {
    if lr.frame_count != hr.frame_count {
        return Err(Error::FrameCountMismatch(hr.frame_count, lr.frame_count));
    }
    let lr_out = lr_stream_forward(lr, &weights.lr_stream, rope)?;
    let mut cur = hr.clone();
    for a in &weights.adapter {
        cur = adapter_block(&cur, &lr_out, a, rope)?;
    }
    Ok(cur)
}

/// Random token grid with standard-normal entries.
pub fn random_tokens<T: Real>(frames: usize, height: usize, width: usize, channels: usize, seed: u64) -> TokenGrid<T> {
    let mut rng = StreamRng::new(seed, 1);
    let tokens = (0..frames * height * width * channels).map(|_| T::lit(rng.normal())).collect();
    TokenGrid { frame_count: frames, height, width, channels, tokens }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: usize = 8;

    fn rope() -> RopeConfig<f64> {
        RopeConfig::new(100.0, 8, C).unwrap()
    }

    fn block(seed: u64) -> BlockWeights<f64> {
        BlockWeights::random(C, 2 * C, &mut StreamRng::new(seed, 0))
    }

    #[test]
    fn single_frame_global_equals_frame() {
        let x = random_tokens(1, 3, 4, C, 1);
        let w = block(2);
        assert_eq!(frame_attention(&x, &w, &rope()).unwrap(), global_attention(&x, &w, &rope()).unwrap());
    }

    #[test]
    fn frame_attention_isolates_frames() {
        let x = random_tokens(3, 3, 3, C, 3);
        let mut y = x.clone();
        let n = 9 * C;
        for v in &mut y.tokens[2 * n..3 * n] {
            *v += 1.0;
        }
        let w = block(4);
        let (a, b) = (frame_attention(&x, &w, &rope()).unwrap(), frame_attention(&y, &w, &rope()).unwrap());
        assert_eq!(a.frame(0), b.frame(0));
        assert_eq!(a.frame(1), b.frame(1));
        assert_ne!(a.frame(2), b.frame(2));
    }

    #[test]
    fn identical_frames_identical_outputs() {
        let one = random_tokens(1, 2, 3, C, 5);
        let x = TokenGrid::new(2, 2, 3, C, one.tokens.repeat(2)).unwrap();
        let out = frame_attention(&x, &block(6), &rope()).unwrap();
        assert_eq!(out.frame(0), out.frame(1));
    }

    #[test]
    fn layer_norm_standardizes() {
        let x = DMatrix::from_fn(3, C, |r, c| (r * C + c) as f64 * 0.7 - 2.0);
        let y = LayerNorm::<f64>::identity(C).forward(&x);
        for row in y.row_iter() {
            assert!(row.mean().abs() < 1e-12);
            assert!((row.variance() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_output_mlp_is_zero() {
        let mut rng = StreamRng::new(9, 0);
        let m = MlpWeights::<f64>::random(C, 2 * C, &mut rng, true);
        let x = DMatrix::from_fn(4, C, |r, c| (r + c) as f64);
        assert!(m.forward(&x).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn weights_round_trip_through_matrices() {
        let w = FuseWeights::<f64>::random(C, 11, false);
        let back = FuseWeights::from_matrices(w.to_matrices()).unwrap();
        assert_eq!(w, back);
        assert_eq!(back.channels(), C);
        let mut short = w.to_matrices();
        short.pop();
        assert!(FuseWeights::from_matrices(short).is_err());
    }

    #[test]
    fn adapter_rejects_frame_mismatch() {
        let hr = random_tokens(2, 4, 4, C, 1);
        let lr = random_tokens(3, 2, 2, C, 2);
        let w = AdapterWeights::random(C, 2 * C, &mut StreamRng::new(1, 0), true);
        assert!(matches!(adapter_block(&hr, &lr, &w, &rope()), Err(Error::FrameCountMismatch(2, 3))));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let x = random_tokens(1, 2, 2, 6, 1);
        assert!(frame_attention(&x, &block(1), &rope()).is_err());
    }
}
