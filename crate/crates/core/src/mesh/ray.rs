use nalgebra::{Point3, Vector3};

use crate::error::{NbvError, Result};
use crate::scalar::Real;

/// Relative parametric guard applied at both ends of a segment query.
pub const SEGMENT_EPS: f64 = 1e-6;

/// Absolute guard `ε_t` for a segment of parametric length `t_max`.
#[inline]
pub fn segment_epsilon<T: Real>(t_max: T) -> T {
    T::lit(SEGMENT_EPS) * t_max
}

/// A half-open ray segment `origin + t·direction`, `t ∈ (0, t_max]`.
///
/// Shear constants for the watertight triangle test are precomputed.
#[derive(Clone, Copy, Debug)]
pub struct Ray<T: Real> {
    origin: Point3<T>,
    direction: Vector3<T>,
    t_max: T,
    inv_dir: Vector3<T>,
    axes: [usize; 3],
    shear: [T; 3],
}

impl<T: Real> Ray<T> {
    /// `direction` must have unit norm (to 1e-9 in f64, a few ulps in f32).
    pub fn new(origin: Point3<T>, direction: Vector3<T>, t_max: T) -> Result<Self> {
        let tol = T::lit(1e-9).max(T::lit(16.0) * T::eps());
        if !origin.iter().all(|c| c.is_finite()) || !direction.iter().all(|c| c.is_finite()) {
            return Err(NbvError::InvalidRay("non-finite component"));
        }
        if (direction.norm() - T::one()).abs() > tol {
            return Err(NbvError::InvalidRay("direction is not unit length"));
        }
        if !(t_max > T::zero()) {
            return Err(NbvError::InvalidRay("t_max must be positive"));
        }
        Ok(Self::new_unchecked(origin, direction, t_max))
    }

    /// Segment from `from` to `to`; `None` when the two points coincide.
    pub fn segment(from: Point3<T>, to: Point3<T>) -> Option<Self> {
        let d = to - from;
        let len = d.norm();
        if !(len > T::zero()) || !len.is_finite() {
            return None;
        }
        Some(Self::new_unchecked(from, d / len, len))
    }

    pub(crate) fn new_unchecked(origin: Point3<T>, direction: Vector3<T>, t_max: T) -> Self {
        let abs = direction.abs();
        let kz = if abs.x >= abs.y && abs.x >= abs.z {
            0
        } else if abs.y >= abs.z {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if direction[kz] < T::zero() {
            std::mem::swap(&mut kx, &mut ky);
        }
        let dz = direction[kz];
        Ray {
            origin,
            direction,
            t_max,
            inv_dir: direction.map(|c| T::one() / c),
            axes: [kx, ky, kz],
            shear: [direction[kx] / dz, direction[ky] / dz, T::one() / dz],
        }
    }

    pub fn origin(&self) -> Point3<T> {
        self.origin
    }

    pub fn direction(&self) -> Vector3<T> {
        self.direction
    }

    pub fn t_max(&self) -> T {
        self.t_max
    }

    pub fn at(&self, t: T) -> Point3<T> {
        self.origin + self.direction * t
    }

    /// Same ray with a different extent.
    pub fn with_t_max(&self, t_max: T) -> Self {
        Ray { t_max, ..*self }
    }

    #[inline]
    pub(crate) fn inv_dir(&self) -> &Vector3<T> {
        &self.inv_dir
    }
}

/// A ray–triangle intersection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit<T: Real> {
    pub t: T,
    pub face: u32,
    /// Weights of the triangle's three corners at the hit point.
    pub barycentric: [T; 3],
}

/// Watertight ray–triangle test (Woop, Benthin & Wald 2013), two-sided.
///
/// Returns the ray parameter and barycentric weights, without range checks on
/// `t`. Rays passing exactly through a shared edge hit both neighbours.
#[inline]
pub fn intersect_triangle<T: Real>(ray: &Ray<T>, tri: &[Point3<T>; 3]) -> Option<(T, [T; 3])> {
    let [kx, ky, kz] = ray.axes;
    let [sx, sy, sz] = ray.shear;
    let a = tri[0] - ray.origin;
    let b = tri[1] - ray.origin;
    let c = tri[2] - ray.origin;

    let ax = a[kx] - sx * a[kz];
    let ay = a[ky] - sy * a[kz];
    let bx = b[kx] - sx * b[kz];
    let by = b[ky] - sy * b[kz];
    let cx = c[kx] - sx * c[kz];
    let cy = c[ky] - sy * c[kz];

    let mut u = cx * by - cy * bx;
    let mut v = ax * cy - ay * cx;
    let mut w = bx * ay - by * ax;

    // an exact zero may be a rounding artefact in low precision
    if u == T::zero() || v == T::zero() || w == T::zero() {
        let f = |x: T| x.as_f64();
        u = T::lit(f(cx) * f(by) - f(cy) * f(bx));
        v = T::lit(f(ax) * f(cy) - f(ay) * f(cx));
        w = T::lit(f(bx) * f(ay) - f(by) * f(ax));
    }

    let zero = T::zero();
    if (u < zero || v < zero || w < zero) && (u > zero || v > zero || w > zero) {
        return None;
    }
    let det = u + v + w;
    if det == zero {
        return None;
    }
    let az = sz * a[kz];
    let bz = sz * b[kz];
    let cz = sz * c[kz];
    let t_scaled = u * az + v * bz + w * cz;
    let inv = T::one() / det;
    Some((t_scaled * inv, [u * inv, v * inv, w * inv]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tri() -> [Point3<f64>; 3] {
        [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn axis_aligned_hit() {
        let ray = Ray::new(Point3::new(0.25, 0.25, 1.0), -Vector3::z(), 2.0).unwrap();
        let (t, bary) = intersect_triangle(&ray, &unit_tri()).unwrap();
        assert_eq!(t, 1.0);
        let tri = unit_tri();
        let p = tri[0].coords * bary[0] + tri[1].coords * bary[1] + tri[2].coords * bary[2];
        assert!((p - Vector3::new(0.25, 0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn miss_outside() {
        let ray = Ray::new(Point3::new(2.0, 2.0, 1.0), -Vector3::z(), 2.0).unwrap();
        assert!(intersect_triangle(&ray, &unit_tri()).is_none());
    }

    #[test]
    fn parallel_ray_misses() {
        let ray = Ray::new(Point3::new(-1.0, 0.2, 1.0), Vector3::x(), 5.0).unwrap();
        assert!(intersect_triangle(&ray, &unit_tri()).is_none());
        let in_plane = Ray::new(Point3::new(-1.0, 0.2, 0.0), Vector3::x(), 5.0).unwrap();
        assert!(intersect_triangle(&in_plane, &unit_tri()).is_none());
    }

    #[test]
    fn rejects_bad_rays() {
        let o = Point3::origin();
        assert!(Ray::new(o, Vector3::new(1.0, 1.0, 0.0), 1.0).is_err());
        assert!(Ray::new(o, Vector3::x(), 0.0).is_err());
        assert!(Ray::new(o, Vector3::x(), -1.0).is_err());
        assert!(Ray::<f64>::segment(o, o).is_none());
    }

    #[test]
    fn shared_edge_is_not_a_gap() {
        // two triangles sharing the diagonal of the unit square
        let t1 = unit_tri();
        let t2 = [
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let ray = Ray::new(Point3::new(s, 1.0 - s, 3.0), -Vector3::z(), 5.0).unwrap();
            assert!(
                intersect_triangle(&ray, &t1).is_some() || intersect_triangle(&ray, &t2).is_some()
            );
        }
    }
}
