//! Pinhole camera with zero roll: pose transforms, co-linearity projection,
//! field-of-view test and the analytic projection Jacobian.
//!
//! Angle convention: pitch is measured from the horizontal plane (−π/2 looks
//! straight down), yaw from the global +X axis towards +Y. The local frame has
//! +Z along the viewing direction, +X horizontal to the right and +Y = Z × X.

use nalgebra::{Matrix2x3, Matrix3, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};
use crate::scalar::Real;

/// Points closer than this along the optical axis do not project.
pub const Z_NEAR: f64 = 0.01;

/// Focal length and image-plane half extents, in the same units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics<T: Real> {
    pub focal: T,
    pub half_width: T,
    pub half_height: T,
}

impl<T: Real> Intrinsics<T> {
    pub fn new(focal: T, half_width: T, half_height: T) -> Result<Self> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if !(ok(focal) && ok(half_width) && ok(half_height)) {
            return Err(NbvError::InvalidCamera(format!(
                "focal length and image extents must be positive (f={}, W/2={}, H/2={})",
                focal.as_f64(),
                half_width.as_f64(),
                half_height.as_f64()
            )));
        }
        Ok(Intrinsics {
            focal,
            half_width,
            half_height,
        })
    }

    /// Extents from full horizontal and vertical field-of-view angles in radians.
    pub fn from_fov(focal: T, hfov: T, vfov: T) -> Result<Self> {
        let half = T::lit(0.5);
        let limit = T::pi();
        if !(hfov > T::zero() && hfov < limit && vfov > T::zero() && vfov < limit) {
            return Err(NbvError::InvalidCamera(format!(
                "field of view must lie in (0, 180) degrees (h={}, v={})",
                hfov.as_f64().to_degrees(),
                vfov.as_f64().to_degrees()
            )));
        }
        Self::new(focal, focal * (hfov * half).tan(), focal * (vfov * half).tan())
    }

    pub fn hfov(&self) -> T {
        T::lit(2.0) * (self.half_width / self.focal).atan()
    }

    pub fn vfov(&self) -> T {
        T::lit(2.0) * (self.half_height / self.focal).atan()
    }
}

impl<T: Real> Default for Intrinsics<T> {
    /// Unit focal length, 84° × 62° field of view.
    fn default() -> Self {
        Self::from_fov(
            T::one(),
            T::lit(84f64.to_radians()),
            T::lit(62f64.to_radians()),
        )
        .expect("valid default intrinsics")
    }
}

/// A camera pose plus intrinsics. Yaw is stored normalized to (−π, π].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraView<T: Real> {
    position: Point3<T>,
    pitch: T,
    yaw: T,
    intrinsics: Intrinsics<T>,
    rotation: Matrix3<T>,
}

/// Image-plane coordinates of a projected point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pixel<T> {
    pub u: T,
    pub v: T,
}

impl<T: Real> CameraView<T> {
    pub fn new(position: Point3<T>, pitch: T, yaw: T, intrinsics: Intrinsics<T>) -> Result<Self> {
        if !position.iter().all(|c| c.is_finite()) || !pitch.is_finite() || !yaw.is_finite() {
            return Err(NbvError::InvalidCamera("non-finite pose".into()));
        }
        let half_pi = T::frac_pi_2();
        // tolerate rounding from degree conversion
        let slack = T::lit(1e-12).max(T::lit(4.0) * T::eps());
        if pitch.abs() > half_pi + slack {
            return Err(NbvError::InvalidCamera(format!(
                "pitch {} rad outside [-pi/2, pi/2]",
                pitch.as_f64()
            )));
        }
        let pitch = pitch.max(-half_pi).min(half_pi);
        let yaw = normalize_angle(yaw);
        Ok(CameraView {
            position,
            pitch,
            yaw,
            intrinsics,
            rotation: rotation_from_angles(pitch, yaw),
        })
    }

    pub fn position(&self) -> Point3<T> {
        self.position
    }

    pub fn pitch(&self) -> T {
        self.pitch
    }

    pub fn yaw(&self) -> T {
        self.yaw
    }

    pub fn intrinsics(&self) -> &Intrinsics<T> {
        &self.intrinsics
    }

    /// Local-to-global rotation; its columns are the local axes.
    pub fn rotation(&self) -> &Matrix3<T> {
        &self.rotation
    }

    pub fn view_direction(&self) -> Vector3<T> {
        self.rotation.column(2).into_owned()
    }

    /// `n′ = Rᵀ (n − o)`.
    #[inline]
    pub fn to_local(&self, n: &Point3<T>) -> Vector3<T> {
        self.rotation.tr_mul(&(n - self.position))
    }

    /// `n = o + R n′`.
    #[inline]
    pub fn to_global(&self, local: &Vector3<T>) -> Point3<T> {
        self.position + self.rotation * local
    }

    /// Frustum test on a point already in the local frame.
    #[inline]
    pub fn local_in_frustum(&self, local: &Vector3<T>) -> bool {
        let z = local.z;
        if !(z > T::lit(Z_NEAR)) {
            return false;
        }
        let f = self.intrinsics.focal;
        // |f x / z| ≤ W/2 without dividing
        (f * local.x).abs() <= self.intrinsics.half_width * z
            && (f * local.y).abs() <= self.intrinsics.half_height * z
    }

    /// Co-linearity projection `u = f x′/z′`, `v = f y′/z′`, or `None` when
    /// the point is behind the near plane or outside the image.
    pub fn project(&self, n: &Point3<T>) -> Option<Pixel<T>> {
        let local = self.to_local(n);
        if !self.local_in_frustum(&local) {
            return None;
        }
        let f = self.intrinsics.focal;
        Some(Pixel {
            u: f * local.x / local.z,
            v: f * local.y / local.z,
        })
    }

    /// Projection without the image-extent check; only the near plane applies.
    pub fn project_unbounded(&self, n: &Point3<T>) -> Option<Vector2<T>> {
        let local = self.to_local(n);
        if !(local.z > T::lit(Z_NEAR)) {
            return None;
        }
        let f = self.intrinsics.focal;
        Some(Vector2::new(f * local.x / local.z, f * local.y / local.z))
    }

    /// Jacobian of `(u, v)` with respect to the global point coordinates.
    pub fn colinearity_jacobian(&self, n: &Point3<T>) -> Result<Matrix2x3<T>> {
        let local = self.to_local(n);
        if !(local.z > T::lit(Z_NEAR)) {
            return Err(NbvError::BehindCamera(local.z.as_f64()));
        }
        Ok(self.jacobian_from_local(&local))
    }

    /// Jacobian for a point whose local coordinates are known; `local.z` must
    /// be positive.
    #[inline]
    pub fn jacobian_from_local(&self, local: &Vector3<T>) -> Matrix2x3<T> {
        let r = &self.rotation;
        let (x, y, z) = (local.x, local.y, local.z);
        let s = self.intrinsics.focal / (z * z);
        let mut a = Matrix2x3::zeros();
        for j in 0..3 {
            a[(0, j)] = s * (z * r[(j, 0)] - x * r[(j, 2)]);
            a[(1, j)] = s * (z * r[(j, 1)] - y * r[(j, 2)]);
        }
        a
    }
}

/// Rotation whose columns are the camera's local X, Y, Z axes in the global
/// frame, for pitch `θ` and yaw `γ` at zero roll.
pub fn rotation_from_angles<T: Real>(pitch: T, yaw: T) -> Matrix3<T> {
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let z = Vector3::new(cp * cy, cp * sy, sp);
    let x = Vector3::new(sy, -cy, T::zero());
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// Wraps an angle to (−π, π].
pub fn normalize_angle<T: Real>(a: T) -> T {
    let two_pi = T::two_pi();
    let mut r = a % two_pi;
    if r <= -T::pi() {
        r += two_pi;
    } else if r > T::pi() {
        r -= two_pi;
    }
    r
}

/// Row of the camera pose CSV: `id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRow {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub f: f64,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
}

pub const POSE_HEADER: [&str; 9] = [
    "id",
    "x",
    "y",
    "z",
    "pitch_deg",
    "yaw_deg",
    "f",
    "hfov_deg",
    "vfov_deg",
];

impl PoseRow {
    pub fn from_camera(id: u64, cam: &CameraView<f64>) -> Self {
        let p = cam.position();
        PoseRow {
            id,
            x: p.x,
            y: p.y,
            z: p.z,
            pitch_deg: cam.pitch().to_degrees(),
            yaw_deg: cam.yaw().to_degrees(),
            f: cam.intrinsics().focal,
            hfov_deg: cam.intrinsics().hfov().to_degrees(),
            vfov_deg: cam.intrinsics().vfov().to_degrees(),
        }
    }

    pub fn to_camera(&self) -> Result<CameraView<f64>> {
        let intr = Intrinsics::from_fov(self.f, self.hfov_deg.to_radians(), self.vfov_deg.to_radians())?;
        CameraView::new(
            Point3::new(self.x, self.y, self.z),
            self.pitch_deg.to_radians(),
            self.yaw_deg.to_radians(),
            intr,
        )
    }
}

pub fn write_pose_csv(path: &std::path::Path, cams: &[(u64, CameraView<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (id, cam) in cams {
        w.serialize(PoseRow::from_camera(*id, cam))?;
    }
    w.flush().map_err(|e| NbvError::io(path, e))
}

/// Reads a pose CSV; errors name the 1-based file line.
pub fn read_pose_csv(path: &std::path::Path) -> Result<Vec<(u64, CameraView<f64>)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<PoseRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| NbvError::parse(path, line, e.to_string()))?;
        let cam = row
            .to_camera()
            .map_err(|e| NbvError::parse(path, line, e.to_string()))?;
        out.push((row.id, cam));
    }
    Ok(out)
}
