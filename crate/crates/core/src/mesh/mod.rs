//! Triangle surface model and ray queries against it.

mod bvh;
pub mod io;
mod ray;

use nalgebra::{Point3, Vector3};

use crate::error::{NbvError, Result};
use crate::scalar::Real;

pub use bvh::{AccelIndex, BvhStats};
pub use ray::{intersect_triangle, segment_epsilon, Hit, Ray, SEGMENT_EPS};

/// Well-known face tags.
pub mod tags {
    pub const GROUND: &str = "ground";
    pub const TREE: &str = "tree";
    pub const TARGET: &str = "target";
}

/// Vertices plus triangular faces, with optional per-face labels.
///
/// Faces always reference existing vertices and never repeat an index.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh<T: Real> {
    vertices: Vec<Point3<T>>,
    faces: Vec<[u32; 3]>,
    tag_names: Vec<String>,
    // index into `tag_names` per face, or `None` for an untagged mesh
    face_tags: Option<Vec<u16>>,
}

impl<T: Real> TriangleMesh<T> {
    /// Builds a mesh, dropping degenerate (zero-area or repeated-index) faces
    /// with a warning.
    pub fn new(vertices: Vec<Point3<T>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        Self::build(vertices, faces, None)
    }

    /// Like [`TriangleMesh::new`] but with one tag per face.
    pub fn with_tags<S: AsRef<str>>(
        vertices: Vec<Point3<T>>,
        faces: Vec<[u32; 3]>,
        tags: &[S],
    ) -> Result<Self> {
        if tags.len() != faces.len() {
            return Err(NbvError::LengthMismatch {
                expected: faces.len(),
                actual: tags.len(),
            });
        }
        let tags = tags.iter().map(|s| s.as_ref().to_owned()).collect();
        Self::build(vertices, faces, Some(tags))
    }

    fn build(
        vertices: Vec<Point3<T>>,
        faces: Vec<[u32; 3]>,
        tags: Option<Vec<String>>,
    ) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(NbvError::NonFiniteVertex(i));
            }
        }
        let count = vertices.len();
        for (f, face) in faces.iter().enumerate() {
            if let Some(&index) = face.iter().find(|&&i| i as usize >= count) {
                return Err(NbvError::FaceIndexOutOfRange { face: f, index, count });
            }
        }

        let mut mesh = TriangleMesh {
            vertices,
            faces: Vec::with_capacity(faces.len()),
            tag_names: Vec::new(),
            face_tags: tags.as_ref().map(|_| Vec::with_capacity(faces.len())),
        };
        let mut dropped = 0usize;
        for (f, face) in faces.into_iter().enumerate() {
            if mesh.is_degenerate(face) {
                dropped += 1;
                continue;
            }
            mesh.faces.push(face);
            if let Some(tags) = &tags {
                let id = mesh.intern(&tags[f]);
                mesh.face_tags.as_mut().unwrap().push(id);
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangle(s)");
        }
        Ok(mesh)
    }

    fn is_degenerate(&self, [a, b, c]: [u32; 3]) -> bool {
        if a == b || b == c || a == c {
            return true;
        }
        let (pa, pb, pc) = (
            &self.vertices[a as usize],
            &self.vertices[b as usize],
            &self.vertices[c as usize],
        );
        (pb - pa).cross(&(pc - pa)).norm_squared() == T::zero()
    }

    fn intern(&mut self, name: &str) -> u16 {
        if let Some(i) = self.tag_names.iter().position(|t| t == name) {
            return i as u16;
        }
        self.tag_names.push(name.to_owned());
        (self.tag_names.len() - 1) as u16
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_tagged(&self) -> bool {
        self.face_tags.is_some()
    }

    pub fn face_tag(&self, face: usize) -> Option<&str> {
        self.face_tags
            .as_ref()
            .map(|t| self.tag_names[t[face] as usize].as_str())
    }

    /// Corner positions of face `face`.
    #[inline]
    pub fn triangle(&self, face: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Appends `other`, re-indexing its faces. Tags are kept when both sides
    /// are tagged; an untagged side contributes faces labelled `untagged`.
    pub fn append(&mut self, other: &TriangleMesh<T>) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        let any_tags = self.face_tags.is_some() || other.face_tags.is_some();
        if any_tags && self.face_tags.is_none() {
            let id = self.intern("untagged");
            self.face_tags = Some(vec![id; self.faces.len()]);
        }
        for (f, face) in other.faces.iter().enumerate() {
            self.faces.push(face.map(|i| i + offset));
            if any_tags {
                let name = other.face_tag(f).unwrap_or("untagged").to_owned();
                let id = self.intern(&name);
                self.face_tags.as_mut().unwrap().push(id);
            }
        }
    }

    /// Faces incident to each vertex in compressed-row form.
    pub fn vertex_faces(&self) -> VertexFaces {
        let n = self.vertices.len();
        let mut offsets = vec![0u32; n + 1];
        for face in &self.faces {
            for &v in face {
                offsets[v as usize + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut faces = vec![0u32; offsets[n] as usize];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in face {
                faces[fill[v as usize] as usize] = f as u32;
                fill[v as usize] += 1;
            }
        }
        VertexFaces { offsets, faces }
    }

    /// Axis-aligned bounds of all vertices, `None` for an empty vertex list.
    pub fn bounds(&self) -> Option<(Point3<T>, Point3<T>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    /// Unit normal of face `face`.
    pub fn face_normal(&self, face: usize) -> Vector3<T> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|p| p.map(|c| U::lit(c.as_f64())))
                .collect(),
            faces: self.faces.clone(),
            tag_names: self.tag_names.clone(),
            face_tags: self.face_tags.clone(),
        }
    }
}

/// Vertex → incident face lookup.
#[derive(Clone, Debug)]
pub struct VertexFaces {
    offsets: Vec<u32>,
    faces: Vec<u32>,
}

impl VertexFaces {
    #[inline]
    pub fn of(&self, vertex: usize) -> &[u32] {
        &self.faces[self.offsets[vertex] as usize..self.offsets[vertex + 1] as usize]
    }
}
