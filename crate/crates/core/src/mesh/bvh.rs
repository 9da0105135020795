//! Bounding volume hierarchy over mesh faces.
//!
//! Nodes split at the midpoint of the centroid bounds along their widest
//! axis, falling back to a median split when the midpoint separates nothing.
//! Builds are deterministic for a given mesh.

use nalgebra::Point3;

use super::ray::{intersect_triangle, segment_epsilon, Hit, Ray};
use super::TriangleMesh;
use crate::error::{NbvError, Result};
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;
// beyond this depth nodes are split at the median, bounding the traversal stack
const MAX_DEPTH: usize = 60;
const MEDIAN_DEPTH: usize = 40;

#[derive(Clone, Debug)]
struct Node<T: Real> {
    lo: Point3<T>,
    hi: Point3<T>,
    /// Leaf: first primitive. Interior: index of the second child (the first
    /// child directly follows its parent).
    index: u32,
    /// Primitive count, zero for interior nodes.
    count: u16,
    axis: u8,
}

/// Immutable acceleration structure answering nearest-hit and occlusion
/// queries. Results are identical to an exhaustive scan over all faces.
#[derive(Clone, Debug)]
pub struct AccelIndex<T: Real> {
    nodes: Vec<Node<T>>,
    triangles: Vec<[Point3<T>; 3]>,
    face_ids: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BvhStats {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
    pub primitives: usize,
}

struct PrimRef<T: Real> {
    face: u32,
    centroid: Point3<T>,
    lo: Point3<T>,
    hi: Point3<T>,
}

impl<T: Real> AccelIndex<T> {
    pub fn build(mesh: &TriangleMesh<T>) -> Result<Self> {
        if mesh.face_count() == 0 {
            return Err(NbvError::EmptyMesh);
        }
        let third = T::one() / T::lit(3.0);
        let mut prims: Vec<PrimRef<T>> = (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                PrimRef {
                    face: f as u32,
                    centroid: Point3::from((a.coords + b.coords + c.coords) * third),
                    lo: a.inf(&b).inf(&c),
                    hi: a.sup(&b).sup(&c),
                }
            })
            .collect();

        let mut nodes = Vec::with_capacity(2 * prims.len() / LEAF_SIZE + 1);
        build_recursive(&mut prims, 0, 0, &mut nodes);

        let triangles = prims.iter().map(|p| mesh.triangle(p.face as usize)).collect();
        let face_ids = prims.iter().map(|p| p.face).collect();
        Ok(AccelIndex {
            nodes,
            triangles,
            face_ids,
        })
    }

    pub fn stats(&self) -> BvhStats {
        fn walk<T: Real>(nodes: &[Node<T>], i: usize, depth: usize, s: &mut BvhStats) {
            s.depth = s.depth.max(depth);
            let n = &nodes[i];
            if n.count > 0 {
                s.leaves += 1;
                s.primitives += n.count as usize;
            } else {
                walk(nodes, i + 1, depth + 1, s);
                walk(nodes, n.index as usize, depth + 1, s);
            }
        }
        let mut s = BvhStats {
            nodes: self.nodes.len(),
            leaves: 0,
            depth: 0,
            primitives: 0,
        };
        walk(&self.nodes, 0, 1, &mut s);
        s
    }

    /// Face ids in leaf order; every face appears exactly once.
    pub fn face_order(&self) -> &[u32] {
        &self.face_ids
    }

    /// Nearest intersection with `t ∈ (0, t_max]`. Equal distances resolve to
    /// the lowest face id.
    pub fn intersect_first(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        let mut best: Option<Hit<T>> = None;
        let mut stack = [0u32; 2 * MAX_DEPTH + 2];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let idx = stack[sp];
            let node = &self.nodes[idx as usize];
            let limit = best.map_or(ray.t_max(), |h| h.t);
            if !slab(node, ray, limit) {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for k in start..start + node.count as usize {
                    let Some((t, barycentric)) = intersect_triangle(ray, &self.triangles[k]) else {
                        continue;
                    };
                    if !(t > T::zero() && t <= ray.t_max()) {
                        continue;
                    }
                    let face = self.face_ids[k];
                    let better = match best {
                        None => true,
                        Some(b) => t < b.t || (t == b.t && face < b.face),
                    };
                    if better {
                        best = Some(Hit { t, face, barycentric });
                    }
                }
            } else {
                let (first, second) = if ray.direction()[node.axis as usize] >= T::zero() {
                    (idx + 1, node.index)
                } else {
                    (node.index, idx + 1)
                };
                stack[sp] = second;
                stack[sp + 1] = first;
                sp += 2;
            }
        }
        best
    }

    /// Whether anything blocks the ray strictly inside `(ε_t, t_max − ε_t)`.
    pub fn any_hit(&self, ray: &Ray<T>) -> bool {
        self.any_hit_excluding(ray, &[])
    }

    /// [`AccelIndex::any_hit`] ignoring the listed faces.
    pub fn any_hit_excluding(&self, ray: &Ray<T>, excluded: &[u32]) -> bool {
        let eps = segment_epsilon(ray.t_max());
        let (t_lo, t_hi) = (eps, ray.t_max() - eps);
        let mut stack = [0u32; 2 * MAX_DEPTH + 2];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let idx = stack[sp];
            let node = &self.nodes[idx as usize];
            if !slab(node, ray, ray.t_max()) {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for k in start..start + node.count as usize {
                    if let Some((t, _)) = intersect_triangle(ray, &self.triangles[k]) {
                        if t > t_lo && t < t_hi && !excluded.contains(&self.face_ids[k]) {
                            return true;
                        }
                    }
                }
            } else {
                stack[sp] = node.index;
                stack[sp + 1] = idx + 1;
                sp += 2;
            }
        }
        false
    }
}

fn build_recursive<T: Real>(
    prims: &mut [PrimRef<T>],
    offset: usize,
    depth: usize,
    nodes: &mut Vec<Node<T>>,
) {
    let (lo, hi) = prims
        .iter()
        .fold((prims[0].lo, prims[0].hi), |(lo, hi), p| (lo.inf(&p.lo), hi.sup(&p.hi)));
    let (lo, hi) = pad(lo, hi);
    let me = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        index: offset as u32,
        count: prims.len() as u16,
        axis: 0,
    });
    if prims.len() <= LEAF_SIZE {
        return;
    }

    let (clo, chi) = prims.iter().fold((prims[0].centroid, prims[0].centroid), |(l, h), p| {
        (l.inf(&p.centroid), h.sup(&p.centroid))
    });
    let extent = chi - clo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };

    let mid = (clo[axis] + chi[axis]) * T::lit(0.5);
    let mut split = if depth < MEDIAN_DEPTH {
        partition(prims, |p| p.centroid[axis] < mid)
    } else {
        0
    };
    if split == 0 || split == prims.len() {
        prims.sort_by(|a, b| {
            a.centroid[axis]
                .partial_cmp(&b.centroid[axis])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.face.cmp(&b.face))
        });
        split = prims.len() / 2;
    }

    nodes[me].count = 0;
    nodes[me].axis = axis as u8;
    let (left, right) = prims.split_at_mut(split);
    build_recursive(left, offset, depth + 1, nodes);
    nodes[me].index = nodes.len() as u32;
    build_recursive(right, offset + split, depth + 1, nodes);
}

/// Stable in-place partition; returns the number of elements satisfying `pred`.
fn partition<T: Real>(prims: &mut [PrimRef<T>], pred: impl Fn(&PrimRef<T>) -> bool) -> usize {
    let mut i = 0;
    for j in 0..prims.len() {
        if pred(&prims[j]) {
            prims.swap(i, j);
            i += 1;
        }
    }
    i
}

fn pad<T: Real>(lo: Point3<T>, hi: Point3<T>) -> (Point3<T>, Point3<T>) {
    let scale = lo.coords.amax().max(hi.coords.amax()).max(T::one());
    let d = scale * T::eps() * T::lit(64.0);
    (lo.map(|c| c - d), hi.map(|c| c + d))
}

#[inline(always)]
fn slab<T: Real>(node: &Node<T>, ray: &Ray<T>, t_max: T) -> bool {
    let o = ray.origin();
    let inv = ray.inv_dir();
    let mut t0 = T::zero();
    let mut t1 = t_max;
    for k in 0..3 {
        if !inv[k].is_finite() {
            if o[k] < node.lo[k] || o[k] > node.hi[k] {
                return false;
            }
            continue;
        }
        let a = (node.lo[k] - o[k]) * inv[k];
        let b = (node.hi[k] - o[k]) * inv[k];
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        if near > t0 {
            t0 = near;
        }
        if far < t1 {
            t1 = far;
        }
    }
    t0 <= t1 * (T::one() + T::lit(4.0) * T::eps())
}
