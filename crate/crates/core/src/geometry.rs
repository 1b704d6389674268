//! Core 3-D types and closed-form geometry shared by every other module.
//!
//! Poses are stored camera-to-world. Pointmaps hold per-pixel points in the
//! camera frame, row-major, together with a validity mask.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::{ordered_sum, Real};

/// Row-major H×W grid of values with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<V> {
    pub height: usize,
    pub width: usize,
    pub values: Vec<V>,
    pub mask: Vec<bool>,
}

impl<V: Clone> Grid<V> {
    pub fn new(height: usize, width: usize, values: Vec<V>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != height * width || mask.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "grid {height}x{width} with {} values and {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        Ok(Self { height, width, values, mask })
    }

    /// Grid with every pixel valid.
    pub fn dense(height: usize, width: usize, values: Vec<V>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(height, width, values, mask)
    }

    pub fn filled(height: usize, width: usize, value: V) -> Self {
        Self { height, width, values: vec![value; height * width], mask: vec![true; height * width] }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &V {
        &self.values[row * self.width + col]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn same_shape<W>(&self, other: &Grid<W>) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn map<U, F: FnMut(&V) -> U>(&self, f: F) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(f).collect(),
            mask: self.mask.clone(),
        }
    }
}

/// Scalar depth (or inverse depth) map.
pub type DepthMap<T> = Grid<T>;

/// Per-pixel unit normals.
pub type NormalMap<T> = Grid<Vector3<T>>;

/// Per-frame grid of camera-frame 3-D points.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointmap<T: Real> {
    pub height: usize,
    pub width: usize,
    pub points: Vec<Vector3<T>>,
    pub mask: Vec<bool>,
    pub frame_index: usize,
}

impl<T: Real> Pointmap<T> {
    /// Builds a pointmap, checking the H,W ≥ 2 bound and that valid points are finite.
    pub fn new(
        height: usize,
        width: usize,
        points: Vec<Vector3<T>>,
        mask: Vec<bool>,
        frame_index: usize,
    ) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::ShapeMismatch(format!("pointmap must be at least 2x2, got {height}x{width}")));
        }
        if points.len() != height * width || mask.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "pointmap {height}x{width} with {} points and {} mask entries",
                points.len(),
                mask.len()
            )));
        }
        let bad = points
            .iter()
            .zip(&mask)
            .any(|(p, &m)| m && !(p.x.is_finite_value() && p.y.is_finite_value() && p.z.is_finite_value()));
        if bad {
            return Err(Error::InvalidArgument("non-finite coordinates in a valid pixel".into()));
        }
        Ok(Self { height, width, points, mask, frame_index })
    }

    /// Pointmap with every pixel valid.
    pub fn dense(height: usize, width: usize, points: Vec<Vector3<T>>) -> Result<Self> {
        let mask = vec![true; points.len()];
        Self::new(height, width, points, mask, 0)
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &Vector3<T> {
        &self.points[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn valid_points(&self) -> impl Iterator<Item = &Vector3<T>> + '_ {
        self.points.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(p, _)| p)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn same_shape(&self, other: &Pointmap<T>) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Multiplies every point by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self { points: self.points.iter().map(|p| p * factor).collect(), ..self.clone() }
    }

    /// Depth channel (z) as a grid sharing this pointmap's mask.
    pub fn depth(&self) -> DepthMap<T> {
        Grid {
            height: self.height,
            width: self.width,
            values: self.points.iter().map(|p| p.z).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> Pointmap<U> {
        Pointmap {
            height: self.height,
            width: self.width,
            points: self
                .points
                .iter()
                .map(|p| Vector3::new(U::lit(p.x.as_f64()), U::lit(p.y.as_f64()), U::lit(p.z.as_f64())))
                .collect(),
            mask: self.mask.clone(),
            frame_index: self.frame_index,
        }
    }
}

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose<T> {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    /// Orthonormality and det = +1 within `tol`.
    pub fn is_valid(&self, tol: T) -> bool {
        is_rotation(&self.rotation, tol)
    }
}

/// Similarity transform `p ↦ scale·R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3<T: Real> {
    pub scale: T,
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Sim3<T> {
    pub fn new(scale: T, rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self { scale, rotation, translation }
    }

    pub fn identity() -> Self {
        Self { scale: T::one(), rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_pose(pose: &Pose<T>) -> Self {
        Self { scale: T::one(), rotation: pose.rotation, translation: pose.translation }
    }

    /// Drops the scale.
    pub fn rigid_part(&self) -> Pose<T> {
        Pose { rotation: self.rotation, translation: self.translation }
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p * self.scale + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Sim3<T>) -> Sim3<T> {
        Sim3 {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
        }
    }

    pub fn inverse(&self) -> Sim3<T> {
        let rt = self.rotation.transpose();
        let inv_s = T::one() / self.scale;
        Sim3 { scale: inv_s, rotation: rt, translation: -(rt * self.translation) * inv_s }
    }

    /// Re-expresses a camera-to-world pose in the gauge defined by this transform.
    ///
    /// The camera-frame geometry observed by that pose is scaled by `scale`.
    pub fn transform_pose(&self, pose: &Pose<T>) -> Pose<T> {
        Pose { rotation: self.rotation * pose.rotation, translation: self.apply(&pose.translation) }
    }

    pub fn is_valid(&self, tol: T) -> bool {
        self.scale > T::zero() && is_rotation(&self.rotation, tol)
    }
}

/// Applies `t` to every point.
pub fn apply_sim3<T: Real>(t: &Sim3<T>, points: &[Vector3<T>]) -> Vec<Vector3<T>> {
    points.iter().map(|p| t.apply(p)).collect()
}

/// Ordered sequence of camera-to-world poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub poses: Vec<Pose<T>>,
    pub frame_indices: Vec<u64>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(poses: Vec<Pose<T>>, frame_indices: Vec<u64>) -> Result<Self> {
        if poses.len() != frame_indices.len() {
            return Err(Error::LengthMismatch { expected: poses.len(), got: frame_indices.len() });
        }
        if frame_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("frame indices must be strictly increasing".into()));
        }
        Ok(Self { poses, frame_indices })
    }

    /// Frame indices 0..n.
    pub fn from_poses(poses: Vec<Pose<T>>) -> Self {
        let frame_indices = (0..poses.len() as u64).collect();
        Self { poses, frame_indices }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Camera centers in world coordinates.
    pub fn positions(&self) -> Vec<Vector3<T>> {
        self.poses.iter().map(|p| p.translation).collect()
    }

    /// Applies a global gauge to every pose.
    pub fn transformed(&self, gauge: &Sim3<T>) -> Self {
        Self {
            poses: self.poses.iter().map(|p| gauge.transform_pose(p)).collect(),
            frame_indices: self.frame_indices.clone(),
        }
    }
}

pub(crate) fn is_rotation<T: Real>(r: &Matrix3<T>, tol: T) -> bool {
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    err <= tol && (r.determinant() - T::one()).abs() <= tol
}

/// Decodes an unconstrained 3×3 matrix into the Frobenius-nearest rotation.
///
/// With `m = UΣVᵀ` this returns `U·diag(1, 1, det(UVᵀ))·Vᵀ`.
pub fn rot9d_to_rotation<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let d = if (u * v_t).determinant() < T::zero() { -T::one() } else { T::one() };
    u * Matrix3::from_diagonal(&Vector3::new(T::one(), T::one(), d)) * v_t
}

pub fn pose_inverse<T: Real>(g: &Pose<T>) -> Pose<T> {
    g.inverse()
}

/// `g_u⁻¹ ∘ g_v`: maps view v's frame into view u's frame.
pub fn relative_pose<T: Real>(g_u: &Pose<T>, g_v: &Pose<T>) -> Pose<T> {
    g_u.inverse().compose(g_v)
}

/// Rotation angle of `r1ᵀ r2`, in radians, via `atan2(sin θ, cos θ)`.
pub fn geodesic_angle<T: Real>(r1: &Matrix3<T>, r2: &Matrix3<T>) -> T {
    let m = r1.transpose() * r2;
    let v = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    v.norm().atan2(m.trace() - T::one())
}

/// Mean distance to the origin of every valid point of every frame.
pub fn scene_norm<T: Real>(pointmaps: &[Pointmap<T>]) -> Result<T> {
    let mut count = 0usize;
    let total = ordered_sum(pointmaps.iter().flat_map(|pm| pm.valid_points()).map(|p| {
        count += 1;
        p.norm()
    }));
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total / T::from_count(count))
}

/// Normals from forward-difference cross products, oriented toward the camera.
///
/// The last row and column are always invalid.
pub fn pointmap_normals<T: Real>(p: &Pointmap<T>) -> NormalMap<T> {
    let (h, w) = (p.height, p.width);
    let mut values = vec![Vector3::zeros(); h * w];
    let mut mask = vec![false; h * w];
    let eps = T::lit(1e-12);
    for i in 0..h.saturating_sub(1) {
        for j in 0..w.saturating_sub(1) {
            let c = p.index(i, j);
            let r = p.index(i, j + 1);
            let d = p.index(i + 1, j);
            if !(p.mask[c] && p.mask[r] && p.mask[d]) {
                continue;
            }
            let n = (p.points[r] - p.points[c]).cross(&(p.points[d] - p.points[c]));
            let len = n.norm();
            if len <= eps {
                continue;
            }
            let mut n = n / len;
            if n.dot(&p.points[c]) > T::zero() {
                n = -n;
            }
            values[c] = n;
            mask[c] = true;
        }
    }
    Grid { height: h, width: w, values, mask }
}

/// `normalizer / z` per valid pixel; pixels with `z ≤ 1e-9` become invalid.
pub fn pointmap_to_inverse_depth<T: Real>(p: &Pointmap<T>, normalizer: T) -> DepthMap<T> {
    let eps = T::lit(1e-9);
    let mut values = Vec::with_capacity(p.len());
    let mut mask = Vec::with_capacity(p.len());
    for (pt, &m) in p.points.iter().zip(&p.mask) {
        if m && pt.z > eps {
            values.push(normalizer / pt.z);
            mask.push(true);
        } else {
            values.push(T::zero());
            mask.push(false);
        }
    }
    Grid { height: p.height, width: p.width, values, mask }
}

/// Rotation about a unit axis by `angle` radians (Rodrigues).
pub fn axis_angle<T: Real>(axis: &Vector3<T>, angle: T) -> Matrix3<T> {
    let a = axis.normalize();
    let k = Matrix3::new(T::zero(), -a.z, a.y, a.z, T::zero(), -a.x, -a.y, a.x, T::zero());
    Matrix3::identity() + k * angle.sin() + k * k * (T::one() - angle.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plane(h: usize, w: usize, f: impl Fn(f64, f64) -> Vector3<f64>) -> Pointmap<f64> {
        let pts = (0..h).flat_map(|i| (0..w).map(move |j| (i as f64, j as f64))).map(|(i, j)| f(i, j)).collect();
        Pointmap::dense(h, w, pts).unwrap()
    }

    #[test]
    fn rot9d_identity_and_scaled_identity() {
        let i = Matrix3::<f64>::identity();
        assert_abs_diff_eq!(rot9d_to_rotation(&i), i, epsilon = 1e-15);
        assert_abs_diff_eq!(rot9d_to_rotation(&(i * 2.0)), i, epsilon = 1e-15);
    }

    #[test]
    fn rot9d_reflection_is_corrected() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let r = rot9d_to_rotation(&m);
        assert!(is_rotation(&r, 1e-12));
    }

    #[test]
    fn pose_inverse_cases() {
        assert_eq!(pose_inverse(&Pose::<f64>::identity()), Pose::identity());
        let t = Pose::from_translation(Vector3::new(1.0, -2.0, 3.0));
        assert_eq!(pose_inverse(&t).translation, Vector3::new(-1.0, 2.0, -3.0));
    }

    #[test]
    fn relative_pose_cases() {
        let g = Pose::new(axis_angle(&Vector3::new(0.3, 1.0, -0.2), 0.7), Vector3::new(1.0, 2.0, 3.0));
        let rel = relative_pose(&g, &g);
        assert_abs_diff_eq!(rel.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(rel.translation, Vector3::zeros(), epsilon = 1e-12);
        assert_eq!(relative_pose(&Pose::identity(), &g), g);
    }

    #[test]
    fn geodesic_about_z() {
        let r = axis_angle(&Vector3::z(), 0.3);
        assert_abs_diff_eq!(geodesic_angle(&Matrix3::identity(), &r), 0.3, epsilon = 1e-12);
        assert_eq!(geodesic_angle(&r, &r), 0.0);
    }

    #[test]
    fn scene_norm_cases() {
        let mut pm = plane(2, 2, |_, _| Vector3::new(0.0, 0.0, 2.0));
        pm.mask = vec![true, false, false, false];
        assert_eq!(scene_norm(std::slice::from_ref(&pm)).unwrap(), 2.0);
        pm.points[1] = Vector3::new(0.0, 3.0, 0.0);
        pm.points[0] = Vector3::new(1.0, 0.0, 0.0);
        pm.mask = vec![true, true, false, false];
        assert_eq!(scene_norm(std::slice::from_ref(&pm)).unwrap(), 2.0);
        pm.mask = vec![false; 4];
        assert!(matches!(scene_norm(&[pm]), Err(Error::EmptyMask)));
    }

    #[test]
    fn frontal_plane_normals_face_camera() {
        let pm = plane(4, 5, |i, j| Vector3::new(j * 0.1, i * 0.1, 5.0));
        let n = pointmap_normals(&pm);
        for i in 0..4 {
            for j in 0..5 {
                let valid = i < 3 && j < 4;
                assert_eq!(n.is_valid(i, j), valid);
                if valid {
                    assert_abs_diff_eq!(*n.get(i, j), Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn tilted_plane_normals() {
        // x + z = 4
        let pm = plane(4, 4, |i, j| {
            let x = j * 0.1 - 0.2;
            Vector3::new(x, i * 0.1, 4.0 - x)
        });
        let n = pointmap_normals(&pm);
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(*n.get(0, 0), Vector3::new(-s, 0.0, -s), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_normals_are_masked() {
        let pm = plane(3, 3, |_, _| Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(pointmap_normals(&pm).valid_count(), 0);
    }

    #[test]
    fn inverse_depth_cases() {
        let pm = plane(3, 3, |_, _| Vector3::new(0.1, 0.2, 2.0));
        let d = pointmap_to_inverse_depth(&pm, 1.0);
        assert!(d.values.iter().all(|&v| v == 0.5));
        let d = pointmap_to_inverse_depth(&pm, 2.0);
        assert!(d.values.iter().all(|&v| v == 1.0));
        let neg = plane(2, 2, |_, _| Vector3::new(0.0, 0.0, 1e-10));
        assert_eq!(pointmap_to_inverse_depth(&neg, 1.0).valid_count(), 0);
    }

    #[test]
    fn sim3_apply_and_compose() {
        let s = Sim3::new(2.0, Matrix3::identity(), Vector3::zeros());
        assert_eq!(s.apply(&Vector3::new(1.0, 1.0, 1.0)), Vector3::new(2.0, 2.0, 2.0));
        let p = Vector3::new(0.3, -0.2, 1.0);
        assert_eq!(Sim3::<f64>::identity().apply(&p), p);
    }

    #[test]
    fn pointmap_rejects_small_or_nonfinite() {
        assert!(Pointmap::<f64>::dense(1, 4, vec![Vector3::zeros(); 4]).is_err());
        let mut pts = vec![Vector3::zeros(); 4];
        pts[2].x = f64::NAN;
        assert!(Pointmap::dense(2, 2, pts.clone()).is_err());
        assert!(Pointmap::new(2, 2, pts, vec![true, true, false, true], 0).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let r = axis_angle(&Vector3::<f32>::new(0.0, 1.0, 0.0), 0.5);
        let g = Pose::new(r, Vector3::new(1.0f32, 0.0, 0.0));
        let rel = relative_pose(&g, &g);
        assert!(geodesic_angle(&rel.rotation, &Matrix3::identity()) < 1e-3);
        assert!(rot9d_to_rotation(&(r * 3.0f32)).relative_eq(&r, 1e-5, 1e-5));
    }
}
