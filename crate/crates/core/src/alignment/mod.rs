//! Registration of predicted geometry to ground truth.

mod affine;
mod icp;
mod roe;
mod umeyama;

pub use affine::{affine_align_depth, AffineAlign};
pub use icp::{icp_refine, IcpConfig, IcpResult};
pub use roe::{l1_scale, roe_scale, weighted_median};
pub use umeyama::umeyama;

pub(crate) use roe::check_pointmap_pairing;
