//! Procedural forest scenes with hidden box-shaped manikins, and a ray-cast
//! renderer counting how many pixels of a manikin a camera sees.

mod manikin;
mod render;

use std::f64::consts::TAU;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};
use crate::mesh::{tags, TriangleMesh};

pub use manikin::{place_manikins, write_manikins_csv, Manikin, ManikinParams, MANIKIN_SIZE};
pub use render::{
    detection_table, pixel_ray, render_count_target_pixels, DetectionTable, Resolution, FAR_PLANE,
};

/// Scenario parameters. Ranges are `[min, max]`, sampled uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    /// Width (x) and depth (y) in meters; the scene spans `[0, w] × [0, d]`.
    pub extent: [f64; 2],
    /// Trees per square meter.
    pub density: f64,
    pub trunk_radius: [f64; 2],
    pub trunk_height: [f64; 2],
    pub canopy_radius: [f64; 2],
    pub canopy_height: [f64; 2],
    /// Maximum spacing of the ground grid in meters.
    pub ground_spacing: f64,
    /// Vertices around a canopy ring.
    pub canopy_segments: usize,
    /// Latitude rings of an ellipsoidal canopy.
    pub canopy_rings: usize,
    /// Relative radial jitter of canopy vertices.
    pub canopy_jitter: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            extent: [30.0, 30.0],
            density: 0.35,
            trunk_radius: [0.15, 0.4],
            trunk_height: [2.0, 5.0],
            canopy_radius: [1.0, 3.0],
            canopy_height: [2.0, 6.0],
            ground_spacing: 1.0,
            canopy_segments: 8,
            canopy_rings: 3,
            canopy_jitter: 0.15,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, r: [f64; 2]| {
            if r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite() {
                Ok(())
            } else {
                Err(NbvError::InvalidConfig(format!("{name} range {r:?} must be positive and ordered")))
            }
        };
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(NbvError::InvalidConfig("extent must be positive".into()));
        }
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(NbvError::InvalidConfig("density must be non-negative".into()));
        }
        range("trunk_radius", self.trunk_radius)?;
        range("trunk_height", self.trunk_height)?;
        range("canopy_radius", self.canopy_radius)?;
        range("canopy_height", self.canopy_height)?;
        if !(self.ground_spacing > 0.0) {
            return Err(NbvError::InvalidConfig("ground_spacing must be positive".into()));
        }
        if self.canopy_segments < 3 || self.canopy_rings < 1 {
            return Err(NbvError::InvalidConfig("canopy needs >= 3 segments and >= 1 ring".into()));
        }
        if !(0.0..0.9).contains(&self.canopy_jitter) {
            return Err(NbvError::InvalidConfig("canopy_jitter must lie in [0, 0.9)".into()));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.extent[0] * self.extent[1]
    }

    pub fn tree_count(&self) -> usize {
        (self.density * self.area()).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanopyShape {
    Ellipsoid,
    Cone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDesc {
    pub position: [f64; 2],
    pub trunk_radius: f64,
    pub trunk_height: f64,
    pub canopy_radius: f64,
    pub canopy_height: f64,
    pub shape: CanopyShape,
    pub shape_seed: u64,
}

impl TreeDesc {
    /// Horizontal distance from the trunk axis to `(x, y)`.
    pub fn horizontal_distance(&self, x: f64, y: f64) -> f64 {
        (x - self.position[0]).hypot(y - self.position[1])
    }

    pub fn top(&self) -> f64 {
        self.trunk_height + self.canopy_height
    }
}

pub struct ForestScene {
    pub params: SceneParams,
    pub seed: u64,
    pub trees: Vec<TreeDesc>,
    /// Ground, trunks and canopies merged, tagged `ground` / `tree`.
    pub mesh: TriangleMesh<f64>,
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Generates a forest; identical seeds give identical scenes.
pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<ForestScene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [w, d] = params.extent;
    let trees: Vec<TreeDesc> = (0..params.tree_count())
        .map(|_| TreeDesc {
            position: [rng.random_range(0.0..w), rng.random_range(0.0..d)],
            trunk_radius: uniform(&mut rng, params.trunk_radius),
            trunk_height: uniform(&mut rng, params.trunk_height),
            canopy_radius: uniform(&mut rng, params.canopy_radius),
            canopy_height: uniform(&mut rng, params.canopy_height),
            shape: if rng.random_bool(0.5) {
                CanopyShape::Ellipsoid
            } else {
                CanopyShape::Cone
            },
            shape_seed: rng.random(),
        })
        .collect();

    let mut builder = MeshBuilder::default();
    builder.ground(params);
    for tree in &trees {
        builder.trunk(tree);
        builder.canopy(tree, params);
    }
    let mesh = builder.finish()?;
    Ok(ForestScene {
        params: params.clone(),
        seed,
        trees,
        mesh,
    })
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    tags: Vec<&'static str>,
}

impl MeshBuilder {
    fn vertex(&mut self, x: f64, y: f64, z: f64) -> u32 {
        self.vertices.push(Point3::new(x, y, z));
        (self.vertices.len() - 1) as u32
    }

    fn tri(&mut self, f: [u32; 3], tag: &'static str) {
        self.faces.push(f);
        self.tags.push(tag);
    }

    fn ground(&mut self, p: &SceneParams) {
        let [w, d] = p.extent;
        let nx = (w / p.ground_spacing).ceil().max(1.0) as usize;
        let ny = (d / p.ground_spacing).ceil().max(1.0) as usize;
        let base = self.vertices.len() as u32;
        for j in 0..=ny {
            for i in 0..=nx {
                self.vertex(w * i as f64 / nx as f64, d * j as f64 / ny as f64, 0.0);
            }
        }
        let at = |i: usize, j: usize| base + (j * (nx + 1) + i) as u32;
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, e) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                self.tri([a, b, c], tags::GROUND);
                self.tri([a, c, e], tags::GROUND);
            }
        }
    }

    fn trunk(&mut self, t: &TreeDesc) {
        const SIDES: usize = 8;
        let [cx, cy] = t.position;
        // reaches into the canopy so no gap shows between the two
        let top = t.trunk_height + 0.25 * t.canopy_height;
        let base = self.vertices.len() as u32;
        for k in 0..SIDES {
            let a = TAU * k as f64 / SIDES as f64;
            let (s, c) = a.sin_cos();
            self.vertex(cx + t.trunk_radius * c, cy + t.trunk_radius * s, 0.0);
            self.vertex(cx + t.trunk_radius * c, cy + t.trunk_radius * s, top);
        }
        for k in 0..SIDES {
            let n = (k + 1) % SIDES;
            let (b0, t0, b1, t1) = (
                base + 2 * k as u32,
                base + 2 * k as u32 + 1,
                base + 2 * n as u32,
                base + 2 * n as u32 + 1,
            );
            self.tri([b0, b1, t1], tags::TREE);
            self.tri([b0, t1, t0], tags::TREE);
        }
    }

    fn canopy(&mut self, t: &TreeDesc, p: &SceneParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(t.shape_seed);
        let [cx, cy] = t.position;
        let seg = p.canopy_segments;
        let jitter = |rng: &mut ChaCha8Rng| 1.0 + p.canopy_jitter * (2.0 * rng.random::<f64>() - 1.0);
        let phase = rng.random::<f64>() * TAU / seg as f64;
        let z0 = t.trunk_height;
        let h = t.canopy_height;

        // rings from bottom to top as (height, radius) pairs
        let rings: Vec<(f64, f64)> = match t.shape {
            CanopyShape::Ellipsoid => (1..=p.canopy_rings)
                .map(|r| {
                    let polar = std::f64::consts::PI * r as f64 / (p.canopy_rings + 1) as f64;
                    (z0 + h * 0.5 * (1.0 - polar.cos()), t.canopy_radius * polar.sin())
                })
                .collect(),
            CanopyShape::Cone => (0..p.canopy_rings)
                .map(|r| {
                    let f = r as f64 / p.canopy_rings as f64;
                    (z0 + 0.15 * h + 0.85 * h * f, t.canopy_radius * (1.0 - f))
                })
                .collect(),
        };

        let bottom = self.vertex(cx, cy, z0);
        let mut ring_ids = Vec::with_capacity(rings.len());
        for &(z, r) in &rings {
            let ids: Vec<u32> = (0..seg)
                .map(|k| {
                    let a = phase + TAU * k as f64 / seg as f64;
                    let rr = r * jitter(&mut rng);
                    let zz = z + 0.05 * h * (2.0 * rng.random::<f64>() - 1.0);
                    self.vertex(cx + rr * a.cos(), cy + rr * a.sin(), zz)
                })
                .collect();
            ring_ids.push(ids);
        }
        let top = self.vertex(cx, cy, z0 + h);

        let first = &ring_ids[0].clone();
        for k in 0..seg {
            self.tri([bottom, first[(k + 1) % seg], first[k]], tags::TREE);
        }
        for r in 0..ring_ids.len() - 1 {
            let (lo, hi) = (ring_ids[r].clone(), ring_ids[r + 1].clone());
            for k in 0..seg {
                let n = (k + 1) % seg;
                self.tri([lo[k], lo[n], hi[n]], tags::TREE);
                self.tri([lo[k], hi[n], hi[k]], tags::TREE);
            }
        }
        let last = ring_ids.last().unwrap().clone();
        for k in 0..seg {
            self.tri([last[k], last[(k + 1) % seg], top], tags::TREE);
        }
    }

    fn finish(self) -> Result<TriangleMesh<f64>> {
        TriangleMesh::with_tags(self.vertices, self.faces, &self.tags)
    }
}
