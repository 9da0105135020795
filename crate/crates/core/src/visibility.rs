//! Per-vertex visibility of the surface model from camera views.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::camera::CameraView;
use crate::error::{NbvError, Result};
use crate::mesh::{io::write_ply_quality, AccelIndex, Ray, TriangleMesh, VertexFaces, SEGMENT_EPS};
use crate::scalar::Real;

/// A mesh with its acceleration index and the vertex subset that visibility
/// and fitness are evaluated on.
///
/// Occlusion always uses every face; only the evaluated vertices may be
/// thinned out.
pub struct SurfaceModel<T: Real> {
    mesh: TriangleMesh<T>,
    index: AccelIndex<T>,
    incident: VertexFaces,
    samples: Vec<u32>,
}

impl<T: Real> SurfaceModel<T> {
    /// Evaluates every vertex.
    pub fn new(mesh: TriangleMesh<T>) -> Result<Self> {
        let samples = (0..mesh.vertex_count() as u32).collect();
        Self::with_samples(mesh, samples)
    }

    /// Keeps at most `cap` vertices, taken at a uniform stride.
    pub fn with_vertex_cap(mesh: TriangleMesh<T>, cap: Option<usize>) -> Result<Self> {
        let n = mesh.vertex_count();
        let samples = match cap {
            Some(cap) if cap < n => decimate(n, cap),
            _ => (0..n as u32).collect(),
        };
        Self::with_samples(mesh, samples)
    }

    pub fn with_samples(mesh: TriangleMesh<T>, samples: Vec<u32>) -> Result<Self> {
        if let Some(&bad) = samples.iter().find(|&&s| s as usize >= mesh.vertex_count()) {
            return Err(NbvError::InvalidConfig(format!(
                "sample vertex {bad} out of range ({} vertices)",
                mesh.vertex_count()
            )));
        }
        let index = AccelIndex::build(&mesh)?;
        let incident = mesh.vertex_faces();
        Ok(SurfaceModel {
            mesh,
            index,
            incident,
            samples,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh<T> {
        &self.mesh
    }

    pub fn index(&self) -> &AccelIndex<T> {
        &self.index
    }

    /// Mesh vertex ids of the evaluated vertices.
    pub fn samples(&self) -> &[u32] {
        &self.samples
    }

    /// Number of evaluated vertices `N`.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Whether mesh vertex `vertex` is inside the frustum of `cam` with an
    /// unobstructed line of sight. The vertex's own faces never occlude it.
    #[inline]
    pub fn vertex_visible(&self, cam: &CameraView<T>, vertex: u32) -> bool {
        let p = self.mesh.vertices()[vertex as usize];
        let local = cam.to_local(&p);
        if !cam.local_in_frustum(&local) {
            return false;
        }
        self.line_of_sight(cam, vertex, local.norm())
    }

    /// Occlusion part of [`SurfaceModel::vertex_visible`], for callers that
    /// already ran the frustum test.
    #[inline]
    pub(crate) fn line_of_sight(&self, cam: &CameraView<T>, vertex: u32, dist: T) -> bool {
        let p = self.mesh.vertices()[vertex as usize];
        let o = cam.position();
        let dir = (p - o) / dist;
        let t_max = dist - T::lit(SEGMENT_EPS) * dist;
        let ray = Ray::new_unchecked(o, dir, t_max);
        !self
            .index
            .any_hit_excluding(&ray, self.incident.of(vertex as usize))
    }

    /// Binary visibility vector `w` over the evaluated vertices.
    pub fn visibility_vector(&self, cam: &CameraView<T>) -> Vec<bool> {
        self.samples
            .par_iter()
            .map(|&v| self.vertex_visible(cam, v))
            .collect()
    }

    /// Visibility matrix `M` (one column per camera) and row sums `m`.
    pub fn visibility_matrix(&self, cams: &[CameraView<T>]) -> VisibilityRecord {
        let mut record = VisibilityRecord::empty(self.len());
        for cam in cams {
            record.push(self.visibility_vector(cam));
        }
        record
    }
}

/// `cap` indices spread uniformly over `0..n`.
fn decimate(n: usize, cap: usize) -> Vec<u32> {
    if cap == 0 {
        return Vec::new();
    }
    (0..cap).map(|k| ((k * n) / cap) as u32).collect()
}

/// Visibility matrix for placed cameras plus per-vertex view counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityRecord {
    n: usize,
    columns: Vec<Vec<bool>>,
    counts: Vec<u32>,
}

impl VisibilityRecord {
    pub fn empty(n: usize) -> Self {
        VisibilityRecord {
            n,
            columns: Vec::new(),
            counts: vec![0; n],
        }
    }

    /// Adds one camera column.
    pub fn push(&mut self, column: Vec<bool>) {
        assert_eq!(column.len(), self.n, "visibility column length");
        for (c, &w) in self.counts.iter_mut().zip(&column) {
            *c += u32::from(w);
        }
        self.columns.push(column);
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn camera_count(&self) -> usize {
        self.columns.len()
    }

    /// `M[i, k]`.
    pub fn get(&self, vertex: usize, camera: usize) -> bool {
        self.columns[camera][vertex]
    }

    pub fn column(&self, camera: usize) -> &[bool] {
        &self.columns[camera]
    }

    /// Row sums `m_i`.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

/// Writes the mesh as PLY with `counts[i]` as the quality of vertex `i`.
pub fn coverage_export<T: Real + std::fmt::Display>(
    mesh: &TriangleMesh<T>,
    counts: &[u32],
    path: &Path,
) -> Result<()> {
    let q: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();
    write_ply_quality(mesh, &q, path)
}

/// `vertex_id,count` rows.
pub fn write_counts_csv(vertex_ids: &[u32], counts: &[u32], path: &Path) -> Result<()> {
    if vertex_ids.len() != counts.len() {
        return Err(NbvError::LengthMismatch {
            expected: vertex_ids.len(),
            actual: counts.len(),
        });
    }
    let file = std::fs::File::create(path).map_err(|e| NbvError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "vertex_id,count")?;
        for (v, c) in vertex_ids.iter().zip(counts) {
            writeln!(w, "{v},{c}")?;
        }
        w.flush()
    })();
    res.map_err(|e| NbvError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use nalgebra::Point3;
    use std::f64::consts::FRAC_PI_2;

    fn nadir(x: f64, y: f64, z: f64) -> CameraView<f64> {
        CameraView::new(Point3::new(x, y, z), -FRAC_PI_2, 0.0, Intrinsics::default()).unwrap()
    }

    /// A small ground triangle plus a large occluder at height 5.
    fn scene(with_occluder: bool) -> SurfaceModel<f64> {
        let mut v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.2, 0.0, 0.0),
            Point3::new(0.0, 0.2, 0.0),
        ];
        let mut f = vec![[0, 1, 2]];
        if with_occluder {
            v.extend([
                Point3::new(-5.0, -5.0, 5.0),
                Point3::new(5.0, -5.0, 5.0),
                Point3::new(0.0, 5.0, 5.0),
            ]);
            f.push([3, 4, 5]);
        }
        SurfaceModel::with_samples(TriangleMesh::new(v, f).unwrap(), vec![0]).unwrap()
    }

    #[test]
    fn unobstructed_vertex_is_visible() {
        assert_eq!(scene(false).visibility_vector(&nadir(0.0, 0.0, 10.0)), vec![true]);
    }

    #[test]
    fn vertex_behind_camera_is_not() {
        let cam = CameraView::new(Point3::new(0.0, 0.0, 10.0), FRAC_PI_2, 0.0, Intrinsics::default())
            .unwrap();
        assert_eq!(scene(false).visibility_vector(&cam), vec![false]);
    }

    #[test]
    fn occluder_blocks() {
        assert_eq!(scene(true).visibility_vector(&nadir(0.0, 0.0, 10.0)), vec![false]);
    }

    #[test]
    fn no_cameras_means_zero_counts() {
        let m = scene(false).visibility_matrix(&[]);
        assert_eq!(m.counts(), &[0]);
        assert_eq!(m.camera_count(), 0);
    }

    #[test]
    fn duplicate_cameras_give_equal_columns() {
        let model = scene(false);
        let cams = [nadir(0.0, 0.0, 10.0), nadir(0.0, 0.0, 10.0), nadir(100.0, 0.0, 1.0)];
        let m = model.visibility_matrix(&cams);
        assert_eq!(m.column(0), m.column(1));
        assert_eq!(m.counts(), &[2]);
    }

    #[test]
    fn decimation_is_uniform() {
        assert_eq!(decimate(10, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(decimate(10, 0), Vec::<u32>::new());
        assert_eq!(decimate(3, 3), vec![0, 1, 2]);
    }
}
