//! Evaluation metrics.

mod boundary;
mod pointmap;
mod recon;
mod trajectory;

pub use boundary::{
    boundary_f1, boundary_metrics, canny, distance_transform, gaussian_blur, normalized_inverse_depth, pdbe, sobel,
    BoundaryF1, BoundaryMetrics, Pdbe, PdbeConfig, DEFAULT_F1_THRESHOLDS,
};
pub use pointmap::{depth_metrics, pointmap_metrics, DepthMetrics, PointmapMetrics, DEFAULT_TAU};
pub use recon::{estimate_normals, recon_metrics, ReconMetrics, DEFAULT_K_NORMALS};
pub use trajectory::{ate, rpe, rpe_with_scale, trajectory_metrics, TrajectoryMetrics};
