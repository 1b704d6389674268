//! Text trajectories: one `index tx ty tz qx qy qz qw` line per pose, `#` comments.

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Trajectory};

const QUAT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub translation: [f64; 3],
    /// Scalar-last `(qx, qy, qz, qw)`.
    pub quaternion: [f64; 4],
}

impl TrajectoryRecord {
    pub fn from_pose(index: u64, pose: &Pose<f64>) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(pose.rotation));
        let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
        let t = pose.translation;
        Self { index, translation: [t.x, t.y, t.z], quaternion: [q.i, q.j, q.k, q.w] }
    }

    pub fn to_pose(&self) -> Pose<f64> {
        let [x, y, z, w] = self.quaternion;
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
        let [tx, ty, tz] = self.translation;
        Pose::new(q.to_rotation_matrix().into_inner(), Vector3::new(tx, ty, tz))
    }
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryRecord>> {
    let mut out: Vec<TrajectoryRecord> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(Error::Format(format!("line {}: expected 8 fields, got {}", ln + 1, fields.len())));
        }
        let index: u64 =
            fields[0].parse().map_err(|_| Error::Format(format!("line {}: bad index {:?}", ln + 1, fields[0])))?;
        let mut v = [0.0f64; 7];
        for (k, f) in fields[1..].iter().enumerate() {
            v[k] = f.parse().map_err(|_| Error::Format(format!("line {}: bad number {f:?}", ln + 1)))?;
            if !v[k].is_finite() {
                return Err(Error::Format(format!("line {}: non-finite value", ln + 1)));
            }
        }
        let quaternion = [v[3], v[4], v[5], v[6]];
        let norm = quaternion.iter().map(|q| q * q).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(Error::Format(format!("line {}: quaternion norm {norm}", ln + 1)));
        }
        if let Some(prev) = out.last() {
            if index <= prev.index {
                return Err(Error::Format(format!("line {}: index {index} not increasing", ln + 1)));
            }
        }
        out.push(TrajectoryRecord { index, translation: [v[0], v[1], v[2]], quaternion });
    }
    Ok(out)
}

pub fn format_trajectory(records: &[TrajectoryRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let [tx, ty, tz] = r.translation;
        let [qx, qy, qz, qw] = r.quaternion;
        s.push_str(&format!("{} {tx:?} {ty:?} {tz:?} {qx:?} {qy:?} {qz:?} {qw:?}\n", r.index));
    }
    s
}

pub fn records_to_trajectory(records: &[TrajectoryRecord]) -> Result<Trajectory<f64>> {
    Trajectory::new(records.iter().map(|r| r.to_pose()).collect(), records.iter().map(|r| r.index).collect())
}

pub fn trajectory_to_records(t: &Trajectory<f64>) -> Vec<TrajectoryRecord> {
    t.poses.iter().zip(&t.frame_indices).map(|(p, &i)| TrajectoryRecord::from_pose(i, p)).collect()
}
