use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Sim3;
use crate::scalar::Real;

/// Relative eigenvalue floor below which the source covariance counts as rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// Closed-form least-squares similarity (or rigid) transform mapping `src` onto `dst`.
///
/// Reflections are excluded by flipping the axis of the smallest singular value
/// when `det(U)·det(V) < 0`. With `with_scale = false` the scale is fixed at 1.
pub fn umeyama<T: Real>(src: &[Vector3<T>], dst: &[Vector3<T>], with_scale: bool) -> Result<Sim3<T>> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch { expected: src.len(), got: dst.len() });
    }
    if src.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: src.len() });
    }
    let n = T::from_count(src.len());
    let mu_s = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mu_d = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;

    let mut cov_src = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let cs = s - mu_s;
        cov_src += cs * cs.transpose();
        cross += (d - mu_d) * cs.transpose();
    }
    cov_src /= n;
    cross /= n;

    let eig = cov_src.symmetric_eigenvalues();
    let mut ev = [eig[0], eig[1], eig[2]];
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if ev[0] <= T::zero() || ev[1] <= T::lit(RANK_TOL) * ev[0] {
        return Err(Error::DegenerateConfiguration);
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sv = svd.singular_values;
    let mut diag = Vector3::repeat(T::one());
    if u.determinant() * v_t.determinant() < T::zero() {
        diag[sv.imin()] = -T::one();
    }
    let rotation = u * Matrix3::from_diagonal(&diag) * v_t;
    let scale = if with_scale {
        let var_src = cov_src.trace();
        sv.component_mul(&diag).sum() / var_src
    } else {
        T::one()
    };
    let translation = mu_d - rotation * mu_s * scale;
    Ok(Sim3 { scale, rotation, translation })
}
