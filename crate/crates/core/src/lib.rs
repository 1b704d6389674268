#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod spatial;
pub mod synth;
pub mod toy;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Pointmapd = geometry::Pointmap<f64>;
pub type Pointmapf = geometry::Pointmap<f32>;
pub type DepthMapd = geometry::DepthMap<f64>;
pub type DepthMapf = geometry::DepthMap<f32>;
pub type Posed = geometry::Pose<f64>;
pub type Posef = geometry::Pose<f32>;
pub type Sim3d = geometry::Sim3<f64>;
pub type Sim3f = geometry::Sim3<f32>;
pub type Trajectoryd = geometry::Trajectory<f64>;
pub type Trajectoryf = geometry::Trajectory<f32>;
