//! Plane-induced homographies between two pinhole cameras, their robust
//! estimation from pixel correspondences, closed-form decomposition back
//! to a camera pose, and the iterative pose-refinement loop.
//!
//! Conventions: world→camera poses, `x_cam = R·X + t`; pixel axes x right,
//! y down, optical axis +z. A plane is stored in the frame of the camera
//! it is used with, as `nᵀ·x = d` with `d > 0`.

mod estimate;
mod refine;

pub use estimate::{estimate_homography, ransac_homography, symmetric_transfer_error, Correspondence, RansacParams, RansacResult};
pub use refine::{
    refine_pose, reprojection_jacobian, reprojection_residuals, CorrespondenceSource, GaussNewtonParams, IterationRecord,
    PlaneMatch, RefineParams, Refinement, SceneConfig, ScenePoint, SyntheticScene,
};

use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Intrinsics> {
        Intrinsics { fx, fy, cx, cy, skew: 0.0 }.validated()
    }

    pub fn validated(self) -> Result<Intrinsics> {
        if !(self.fx > 0.0 && self.fy > 0.0) || ![self.fx, self.fy, self.cx, self.cy, self.skew].iter().all(|v| v.is_finite()) {
            return Err(Error::param(format!("focal lengths must be positive and finite, got fx {} fy {}", self.fx, self.fy)));
        }
        Ok(self)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse(&self) -> Matrix3<f64> {
        let (fx, fy, s, cx, cy) = (self.fx, self.fy, self.skew, self.cx, self.cy);
        Matrix3::new(
            1.0 / fx,
            -s / (fx * fy),
            (s * cy - cx * fy) / (fx * fy),
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// World→camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    /// Row-major.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> PoseRepr {
        let m = p.rotation.matrix();
        PoseRepr {
            rotation: [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]]),
            translation: p.translation.into(),
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Pose> {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        Pose::from_matrix(&m, Vector3::from(r.translation))
    }
}

const ORTHO_TOL: f64 = 1e-9;

impl Pose {
    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Pose {
        Pose { rotation, translation }
    }

    pub fn identity() -> Pose {
        Pose::new(Rotation3::identity(), Vector3::zeros())
    }

    /// Checks `RᵀR = I` and `det R = +1` to 1e-9.
    pub fn from_matrix(r: &Matrix3<f64>, translation: Vector3<f64>) -> Result<Pose> {
        let drift = (r.transpose() * r - Matrix3::identity()).abs().max();
        if !(drift <= ORTHO_TOL) || (r.determinant() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::param(format!("not a rotation matrix (orthogonality drift {drift:e}, det {})", r.determinant())));
        }
        Ok(Pose::new(Rotation3::from_matrix_unchecked(*r), translation))
    }

    /// Camera at `center` looking at `target`, image x axis along
    /// `forward × up`.
    pub fn look_at(center: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Pose> {
        let z = (target - center)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::param("camera target coincides with its centre"))?;
        let x = z.cross(&up).try_normalize(1e-12).ok_or_else(|| Error::param("view direction parallel to up vector"))?;
        let y = z.cross(&x);
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let rotation = Rotation3::from_matrix_unchecked(r);
        Ok(Pose::new(rotation, -(rotation * center)))
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// `(axis·angle, t)`.
    pub fn params(&self) -> [f64; 6] {
        let w = self.rotation.scaled_axis();
        [w.x, w.y, w.z, self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn from_params(p: &[f64; 6]) -> Pose {
        Pose::new(
            Rotation3::from_scaled_axis(Vector3::new(p[0], p[1], p[2])),
            Vector3::new(p[3], p[4], p[5]),
        )
    }

    /// Transform from this camera's frame into `other`'s.
    pub fn relative_to(&self, other: &Pose) -> (Rotation3<f64>, Vector3<f64>) {
        let r = other.rotation * self.rotation.inverse();
        (r, other.translation - r * self.translation)
    }
}

/// Angle (rad) of the rotation taking `a` to `b`.
pub fn rotation_error(a: &Pose, b: &Pose) -> f64 {
    // atan2 keeps full precision near zero, where acos of the trace does not.
    let m = (a.rotation.inverse() * b.rotation).into_inner();
    let sin = 0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
    let cos = 0.5 * (m.trace() - 1.0);
    sin.atan2(cos)
}

/// Distance (m) between the two camera centres.
pub fn translation_error(a: &Pose, b: &Pose) -> f64 {
    (a.center() - b.center()).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneRepr", into = "PlaneRepr")]
pub struct Plane {
    pub normal: Unit<Vector3<f64>>,
    pub d: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaneRepr {
    normal: [f64; 3],
    d: f64,
}

impl From<Plane> for PlaneRepr {
    fn from(p: Plane) -> PlaneRepr {
        PlaneRepr { normal: p.normal.into_inner().into(), d: p.d }
    }
}

impl TryFrom<PlaneRepr> for Plane {
    type Error = Error;

    fn try_from(r: PlaneRepr) -> Result<Plane> {
        Plane::new(Vector3::from(r.normal), r.d)
    }
}

impl Plane {
    /// `nᵀ·x = d`; `n` is normalized here, `d` must be positive.
    pub fn new(normal: Vector3<f64>, d: f64) -> Result<Plane> {
        let normal = Unit::try_new(normal, 1e-12).ok_or_else(|| Error::param("plane normal has zero length"))?;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::param(format!("plane distance must be positive, got {d}")));
        }
        Ok(Plane { normal, d })
    }

    /// The world plane `nᵀ·X = d_world` seen from the camera at `pose`,
    /// oriented so that `d > 0`.
    pub fn world_in_camera(normal: Vector3<f64>, d_world: f64, pose: &Pose) -> Result<Plane> {
        let n = pose.rotation * normal.try_normalize(1e-12).ok_or_else(|| Error::param("plane normal has zero length"))?;
        let d = d_world + n.dot(&pose.translation);
        if d.abs() < 1e-12 {
            return Err(Error::degenerate("camera centre lies on the plane"));
        }
        Plane::new(n * d.signum(), d.abs())
    }
}

/// Projects world point `x` to pixels.
pub fn project(x: &Vector3<f64>, k: &Intrinsics, pose: &Pose) -> Result<Vector2<f64>> {
    let xc = pose.transform(x);
    if xc.z <= 0.0 {
        return Err(Error::BehindCamera { z: xc.z });
    }
    let h = k.matrix() * xc;
    Ok(Vector2::new(h.x / h.z, h.y / h.z))
}

/// 3×3 projective map, stored with unit Frobenius norm and its
/// largest-magnitude entry positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Homography> {
        let norm = m.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::degenerate("homography matrix is zero or not finite"));
        }
        let mut m = m / norm;
        let mut pivot = 0;
        for i in 1..9 {
            if m[i].abs() > m[pivot].abs() {
                pivot = i;
            }
        }
        if m[pivot] < 0.0 {
            m = -m;
        }
        Ok(Homography(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let h = self.0 * Vector3::new(p.x, p.y, 1.0);
        Vector2::new(h.x / h.z, h.y / h.z)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self.0.try_inverse().ok_or_else(|| Error::degenerate("homography is singular"))?;
        Homography::from_matrix(inv)
    }

    /// Largest absolute entry difference.
    pub fn max_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).abs().max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeMode {
    /// `K2·(R_rel + t_rel·nᵀ/d)·K1⁻¹`, mapping view-1 pixels of plane
    /// points onto their view-2 pixels.
    #[default]
    Consistent,
    /// `K2·R2·(I − (t1 − t2)·nᵀ/d)·R1ᵀ·K1ᵀ`, the textbook-looking form with
    /// `K1` transposed rather than inverted. Kept for comparison only; it
    /// does not transfer points.
    Verbatim,
}

/// Homography induced by `plane` (in camera-1 coordinates) from camera 1
/// to camera 2.
pub fn compose_homography(
    k1: &Intrinsics,
    k2: &Intrinsics,
    pose1: &Pose,
    pose2: &Pose,
    plane: &Plane,
    mode: ComposeMode,
) -> Result<Homography> {
    if !(plane.d > 0.0) {
        return Err(Error::param(format!("plane distance must be positive, got {}", plane.d)));
    }
    let n = plane.normal.into_inner();
    let m = match mode {
        ComposeMode::Consistent => {
            let (r, t) = pose1.relative_to(pose2);
            k2.matrix() * (r.matrix() + t * n.transpose() / plane.d) * k1.inverse()
        }
        ComposeMode::Verbatim => {
            let dt = pose1.translation - pose2.translation;
            k2.matrix()
                * pose2.rotation.matrix()
                * (Matrix3::identity() - dt * n.transpose() / plane.d)
                * pose1.rotation.matrix().transpose()
                * k1.matrix().transpose()
        }
    };
    Homography::from_matrix(m)
}

/// Relative scale mismatch of the in-plane columns beyond which a
/// homography is not a plane-induced map for the given intrinsics.
const SCALE_CONSISTENCY: f64 = 0.01;

/// Recovers camera 2 from a consistent-mode homography, given camera 1,
/// both intrinsics and the plane in camera-1 coordinates.
///
/// The overall sign of `H` is fixed by requiring `det(K2⁻¹·H·K1) > 0`,
/// which holds whenever both cameras see the plane from the same side.
pub fn decompose_homography(
    h: &Homography,
    k1: &Intrinsics,
    k2: &Intrinsics,
    pose1: &Pose,
    plane: &Plane,
) -> Result<Pose> {
    let n = plane.normal.into_inner();
    let mut m = k2.inverse() * h.matrix() * k1.matrix();

    // Orthonormal basis of the plane directions, v1 × v2 = n.
    let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let v1 = (seed - n * n.dot(&seed)).normalize();
    let v2 = n.cross(&v1);

    let (s1, s2) = ((m * v1).norm(), (m * v2).norm());
    let scale = 0.5 * (s1 + s2);
    if !(scale > 0.0) || (s1 - s2).abs() > SCALE_CONSISTENCY * scale {
        return Err(Error::InconsistentHomography(format!(
            "in-plane scales {s1:.6e} and {s2:.6e} differ by more than {}%",
            SCALE_CONSISTENCY * 100.0
        )));
    }
    m /= scale;
    if m.determinant() < 0.0 {
        m = -m;
    }

    let (a, b) = (m * v1, m * v2);
    let image = Matrix3::from_columns(&[a, b, a.cross(&b)]);
    let basis = Matrix3::from_columns(&[v1, v2, n]);
    let r_rel = nearest_rotation(&(image * basis.transpose()))?;
    let t_rel = (m - r_rel.matrix()) * n * plane.d;

    let rotation = r_rel * pose1.rotation;
    Ok(Pose::new(rotation, t_rel + r_rel * pose1.translation))
}

/// Closest rotation in the Frobenius sense.
pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Result<Rotation3<f64>> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        let weakest = svd.singular_values.imin();
        d[(weakest, weakest)] = -1.0;
    }
    let r = u * d * v_t;
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::degenerate("rotation estimate is not finite"));
    }
    Ok(Rotation3::from_matrix_unchecked(r))
}

#[cfg(test)]
mod tests;
