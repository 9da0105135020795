use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Manikin;
use crate::camera::CameraView;
use crate::error::{NbvError, Result};
use crate::mesh::{intersect_triangle, AccelIndex, Ray};

/// Primary rays end here (meters).
pub const FAR_PLANE: f64 = 1.0e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

impl Resolution {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(NbvError::InvalidConfig("resolution must be positive".into()));
        }
        Ok(Resolution { width, height })
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            width: 160,
            height: 120,
        }
    }
}

/// Ray through the center of pixel `(i, j)`; column `i` spans `u`, row `j`
/// spans `v`, both from negative to positive.
pub fn pixel_ray(cam: &CameraView<f64>, res: Resolution, i: u32, j: u32) -> Ray<f64> {
    let intr = cam.intrinsics();
    let u = intr.half_width * ((2 * i + 1) as f64 / res.width as f64 - 1.0);
    let v = intr.half_height * ((2 * j + 1) as f64 / res.height as f64 - 1.0);
    let local = Vector3::new(u, v, intr.focal).normalize();
    Ray::new_unchecked(cam.position(), cam.rotation() * local, FAR_PLANE)
}

/// Pixel window `[i0, i1) × [j0, j1)` that can contain the manikin.
fn footprint_window(cam: &CameraView<f64>, manikin: &Manikin, res: Resolution) -> (u32, u32, u32, u32) {
    let full = (0, res.width, 0, res.height);
    let (lo, hi) = manikin.bounds();
    let intr = cam.intrinsics();
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for k in 0..8 {
        let corner = nalgebra::Point3::new(
            if k & 1 == 0 { lo.x } else { hi.x },
            if k & 2 == 0 { lo.y } else { hi.y },
            if k & 4 == 0 { lo.z } else { hi.z },
        );
        // a corner near or behind the camera makes the projection unbounded
        let Some(uv) = cam.project_unbounded(&corner) else {
            return full;
        };
        umin = umin.min(uv.x);
        umax = umax.max(uv.x);
        vmin = vmin.min(uv.y);
        vmax = vmax.max(uv.y);
    }
    let to_px = |val: f64, half: f64, n: u32| (val / half + 1.0) * 0.5 * n as f64 - 0.5;
    let span = |lo: f64, hi: f64, half: f64, n: u32| {
        let a = (to_px(lo, half, n).floor() - 1.0).max(0.0);
        let b = (to_px(hi, half, n).ceil() + 2.0).min(n as f64);
        if b <= a {
            (0, 0)
        } else {
            (a as u32, b as u32)
        }
    };
    let (i0, i1) = span(umin, umax, intr.half_width, res.width);
    let (j0, j1) = span(vmin, vmax, intr.half_height, res.height);
    (i0, i1, j0, j1)
}

/// Number of pixels whose primary ray hits `manikin` before any scene face,
/// as if the scene were rendered with only this manikin inserted. Equal
/// distances count as occluded.
pub fn render_count_target_pixels(
    scene: &AccelIndex<f64>,
    manikin: &Manikin,
    cam: &CameraView<f64>,
    res: Resolution,
) -> u32 {
    let tris: Vec<_> = (0..manikin.mesh.face_count()).map(|f| manikin.mesh.triangle(f)).collect();
    let (i0, i1, j0, j1) = footprint_window(cam, manikin, res);
    let mut count = 0;
    for j in j0..j1 {
        for i in i0..i1 {
            let ray = pixel_ray(cam, res, i, j);
            let nearest = tris
                .iter()
                .filter_map(|tri| intersect_triangle(&ray, tri).map(|(t, _)| t))
                .filter(|&t| t > 0.0 && t <= FAR_PLANE)
                .fold(f64::INFINITY, f64::min);
            if nearest.is_finite() && scene.intersect_first(&ray.with_t_max(nearest)).is_none() {
                count += 1;
            }
        }
    }
    count
}

/// Rendered target pixels for every (manikin, camera) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionTable {
    manikins: usize,
    cameras: usize,
    /// Row-major, one row per manikin.
    pixels: Vec<u32>,
}

impl DetectionTable {
    pub fn from_pixels(manikins: usize, cameras: usize, pixels: Vec<u32>) -> Result<Self> {
        if pixels.len() != manikins * cameras {
            return Err(NbvError::LengthMismatch {
                expected: manikins * cameras,
                actual: pixels.len(),
            });
        }
        Ok(DetectionTable {
            manikins,
            cameras,
            pixels,
        })
    }

    pub fn manikin_count(&self) -> usize {
        self.manikins
    }

    pub fn camera_count(&self) -> usize {
        self.cameras
    }

    pub fn pixels(&self, manikin: usize, camera: usize) -> u32 {
        self.pixels[manikin * self.cameras + camera]
    }

    /// A manikin counts as detected by a camera when at least one pixel shows it.
    pub fn visible(&self, manikin: usize, camera: usize) -> bool {
        self.pixels(manikin, camera) > 0
    }

    pub fn seen_by_any(&self) -> Vec<bool> {
        (0..self.manikins)
            .map(|m| (0..self.cameras).any(|c| self.visible(m, c)))
            .collect()
    }

    pub fn seen_count(&self) -> usize {
        self.seen_by_any().iter().filter(|&&s| s).count()
    }

    pub fn total_pixels(&self) -> u64 {
        self.pixels.iter().map(|&p| u64::from(p)).sum()
    }

    /// Entry `k`: manikins seen by at least one of the first `k + 1` cameras.
    pub fn visible_curve(&self) -> Vec<usize> {
        let mut seen = vec![false; self.manikins];
        let mut n = 0;
        (0..self.cameras)
            .map(|c| {
                for (m, s) in seen.iter_mut().enumerate() {
                    if !*s && self.visible(m, c) {
                        *s = true;
                        n += 1;
                    }
                }
                n
            })
            .collect()
    }

    /// Entry `k`: target pixels summed over all manikins and the first `k + 1` cameras.
    pub fn pixel_curve(&self) -> Vec<u64> {
        let mut total = 0u64;
        (0..self.cameras)
            .map(|c| {
                total += (0..self.manikins).map(|m| u64::from(self.pixels(m, c))).sum::<u64>();
                total
            })
            .collect()
    }

    /// CSV `manikin_id,camera_id,pixels`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["manikin_id", "camera_id", "pixels"])?;
        for m in 0..self.manikins {
            for c in 0..self.cameras {
                w.write_record([m.to_string(), c.to_string(), self.pixels(m, c).to_string()])?;
            }
        }
        w.flush().map_err(|e| NbvError::io(path, e))
    }
}

/// Renders every manikin in every camera.
pub fn detection_table(
    scene: &AccelIndex<f64>,
    manikins: &[Manikin],
    cams: &[CameraView<f64>],
    res: Resolution,
) -> DetectionTable {
    let n_cam = cams.len();
    let pixels: Vec<u32> = (0..manikins.len() * n_cam)
        .into_par_iter()
        .map(|k| render_count_target_pixels(scene, &manikins[k / n_cam], &cams[k % n_cam], res))
        .collect();
    DetectionTable {
        manikins: manikins.len(),
        cameras: n_cam,
        pixels,
    }
}
