use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ForestScene;
use crate::error::{NbvError, Result};
use crate::mesh::{tags, TriangleMesh};

/// Length, width and height of the prone box body in meters.
pub const MANIKIN_SIZE: [f64; 3] = [1.7, 0.5, 0.3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManikinParams {
    pub count: usize,
    /// Only accept positions inside some canopy footprint.
    pub under_canopy: bool,
    /// Rejection-sampling budget per manikin.
    pub max_attempts: usize,
}

impl Default for ManikinParams {
    fn default() -> Self {
        ManikinParams {
            count: 100,
            under_canopy: true,
            max_attempts: 10_000,
        }
    }
}

/// A hidden target lying on the ground; all faces are tagged `target`.
#[derive(Clone, Debug)]
pub struct Manikin {
    pub id: usize,
    pub position: [f64; 2],
    pub yaw: f64,
    pub mesh: TriangleMesh<f64>,
}

impl Manikin {
    pub fn new(id: usize, position: [f64; 2], yaw: f64) -> Self {
        Manikin {
            id,
            position,
            yaw,
            mesh: box_mesh(position, yaw),
        }
    }

    /// Radius of the circle circumscribing the body footprint.
    pub fn footprint_radius() -> f64 {
        0.5 * MANIKIN_SIZE[0].hypot(MANIKIN_SIZE[1])
    }

    /// Footprint corners in counter-clockwise order.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        footprint(self.position, self.yaw)
    }

    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        self.mesh.bounds().expect("manikin mesh has vertices")
    }
}

/// `manikin_id,x,y,yaw_deg` rows.
pub fn write_manikins_csv(path: &std::path::Path, manikins: &[Manikin]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["manikin_id", "x", "y", "yaw_deg"])?;
    for m in manikins {
        w.write_record([
            m.id.to_string(),
            m.position[0].to_string(),
            m.position[1].to_string(),
            m.yaw.to_degrees().to_string(),
        ])?;
    }
    w.flush().map_err(|e| NbvError::io(path, e))
}

fn footprint(c: [f64; 2], yaw: f64) -> [[f64; 2]; 4] {
    let (s, co) = yaw.sin_cos();
    let (hl, hw) = (MANIKIN_SIZE[0] / 2.0, MANIKIN_SIZE[1] / 2.0);
    [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)].map(|(a, b)| [c[0] + a * co - b * s, c[1] + a * s + b * co])
}

fn box_mesh(c: [f64; 2], yaw: f64) -> TriangleMesh<f64> {
    let h = MANIKIN_SIZE[2];
    let fp = footprint(c, yaw);
    let mut v = Vec::with_capacity(8);
    for z in [0.0, h] {
        for p in &fp {
            v.push(Point3::new(p[0], p[1], z));
        }
    }
    // 0..4 bottom, 4..8 top, both counter-clockwise seen from above
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    let t = [tags::TARGET; 12];
    TriangleMesh::with_tags(v, faces, &t).expect("valid box")
}

/// Places manikins by rejection sampling: fully inside the extent, clear of
/// every trunk and of each other (circumscribed footprint circles disjoint),
/// and optionally inside a canopy footprint.
pub fn place_manikins(scene: &ForestScene, params: &ManikinParams, seed: u64) -> Result<Vec<Manikin>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = Manikin::footprint_radius();
    let [w, d] = scene.params.extent;
    if w <= 2.0 * r || d <= 2.0 * r {
        return Err(NbvError::InvalidConfig("extent too small for a manikin".into()));
    }
    let mut placed: Vec<Manikin> = Vec::with_capacity(params.count);
    for index in 0..params.count {
        let mut attempt = 0;
        loop {
            if attempt == params.max_attempts {
                return Err(NbvError::PlacementFailed {
                    index,
                    attempts: attempt,
                });
            }
            attempt += 1;
            let x = rng.random_range(r..w - r);
            let y = rng.random_range(r..d - r);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let hits_trunk = scene
                .trees
                .iter()
                .any(|t| t.horizontal_distance(x, y) <= t.trunk_radius + r);
            if hits_trunk {
                continue;
            }
            if params.under_canopy
                && !scene.trees.iter().any(|t| t.horizontal_distance(x, y) <= t.canopy_radius)
            {
                continue;
            }
            let overlaps = placed
                .iter()
                .any(|m| (m.position[0] - x).hypot(m.position[1] - y) < 2.0 * r);
            if overlaps {
                continue;
            }
            placed.push(Manikin::new(index, [x, y], yaw));
            break;
        }
    }
    Ok(placed)
}
