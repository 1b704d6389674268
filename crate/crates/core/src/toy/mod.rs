//! Forward-only toy replica of the dual-stream encoder: an LR stream of
//! alternating frame/global attention and an adapter stack fusing HR tokens.

mod attention;
mod blocks;
mod rope;
mod tokens;

pub use attention::{attention, attention_probabilities};
pub use blocks::{
    adapter_block, frame_attention, fuse_forward, gelu, global_attention, lr_stream_forward, random_tokens,
    AdapterWeights, AttentionWeights, BlockWeights, FuseWeights, LayerNorm, MlpWeights, ADAPTER_DEPTH, LR_PAIRS,
};
pub use rope::{
    interp_positions, interp_rope_apply, rope_angles, rope_apply, snap_positions, standard_positions, RopeConfig,
};
pub use tokens::{lattice, TokenGrid};

/// Channel width of the toy model.
pub const TOY_CHANNELS: usize = 32;
