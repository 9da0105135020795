//! Wavefront OBJ (ASCII), face-tag sidecar CSV and PLY with a per-vertex
//! `quality` scalar.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use super::TriangleMesh;
use crate::error::{NbvError, Result};
use crate::scalar::Real;

pub fn write_obj<T: Real + std::fmt::Display>(mesh: &TriangleMesh<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| NbvError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_obj_to(mesh, &mut w).map_err(|e| NbvError::io(path, e))
}

pub fn write_obj_to<T: Real + std::fmt::Display, W: Write>(
    mesh: &TriangleMesh<T>,
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "# {} vertices, {} faces", mesh.vertex_count(), mesh.face_count())?;
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()
}

/// Writes `face_id,tag` lines for a tagged mesh.
pub fn write_tags<T: Real>(mesh: &TriangleMesh<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| NbvError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "face_id,tag")?;
        for f in 0..mesh.face_count() {
            writeln!(w, "{},{}", f, mesh.face_tag(f).unwrap_or("untagged"))?;
        }
        w.flush()
    })();
    res.map_err(|e| NbvError::io(path, e))
}

/// Reads an OBJ file, optionally with its tag sidecar. Polygons are fan
/// triangulated; texture and normal references are ignored.
pub fn read_obj<T: Real>(path: &Path, tags: Option<&Path>) -> Result<TriangleMesh<T>> {
    let file = File::open(path).map_err(|e| NbvError::io(path, e))?;
    let mut vertices = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| NbvError::io(path, e))?;
        let lineno = n + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [T::zero(); 3];
                for slot in &mut c {
                    let tok = it
                        .next()
                        .ok_or_else(|| NbvError::parse(path, lineno, "vertex needs 3 coordinates"))?;
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| NbvError::parse(path, lineno, format!("bad number {tok:?}")))?;
                    *slot = T::lit(v);
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in it {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| NbvError::parse(path, lineno, format!("bad index {tok:?}")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(NbvError::parse(path, lineno, "OBJ indices are 1-based"));
                    };
                    if resolved < 0 {
                        return Err(NbvError::parse(path, lineno, "index before first vertex"));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(NbvError::parse(path, lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    match tags {
        None => TriangleMesh::new(vertices, faces),
        Some(tag_path) => {
            let tags = read_tags(tag_path, faces.len())?;
            TriangleMesh::with_tags(vertices, faces, &tags)
        }
    }
}

fn read_tags(path: &Path, face_count: usize) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| NbvError::io(path, e))?;
    let mut tags = vec![String::from("untagged"); face_count];
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| NbvError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line == "face_id,tag") {
            continue;
        }
        let (id, tag) = line
            .split_once(',')
            .ok_or_else(|| NbvError::parse(path, n + 1, "expected face_id,tag"))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| NbvError::parse(path, n + 1, format!("bad face id {id:?}")))?;
        if id >= face_count {
            return Err(NbvError::parse(
                path,
                n + 1,
                format!("face id {id} out of range ({face_count} faces)"),
            ));
        }
        tags[id] = tag.trim().to_owned();
    }
    Ok(tags)
}

/// ASCII PLY with a `quality` scalar per vertex.
pub fn write_ply_quality<T: Real + std::fmt::Display>(
    mesh: &TriangleMesh<T>,
    quality: &[f64],
    path: &Path,
) -> Result<()> {
    if quality.len() != mesh.vertex_count() {
        return Err(NbvError::LengthMismatch {
            expected: mesh.vertex_count(),
            actual: quality.len(),
        });
    }
    let file = File::create(path).map_err(|e| NbvError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", mesh.vertex_count())?;
        for p in ["x", "y", "z", "quality"] {
            writeln!(w, "property double {p}")?;
        }
        writeln!(w, "element face {}", mesh.face_count())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "end_header")?;
        for (v, q) in mesh.vertices().iter().zip(quality) {
            writeln!(w, "{} {} {} {}", v.x, v.y, v.z, q)?;
        }
        for f in mesh.faces() {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
        w.flush()
    })();
    res.map_err(|e| NbvError::io(path, e))
}

/// Reads back a PLY written by [`write_ply_quality`].
pub fn read_ply_quality(path: &Path) -> Result<(TriangleMesh<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| NbvError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let mut n_vert = None;
    let mut n_face = None;
    let mut props = Vec::new();
    for (n, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["element", "vertex", c] => {
                n_vert = Some(c.parse::<usize>().map_err(|_| NbvError::parse(path, n + 1, "bad count"))?)
            }
            ["element", "face", c] => {
                n_face = Some(c.parse::<usize>().map_err(|_| NbvError::parse(path, n + 1, "bad count"))?)
            }
            ["property", _, name] if n_face.is_none() => props.push(name.to_string()),
            _ => {}
        }
    }
    let (n_vert, n_face) = match (n_vert, n_face) {
        (Some(v), Some(f)) => (v, f),
        _ => return Err(NbvError::parse(path, 0, "missing vertex or face element")),
    };
    let col = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| NbvError::parse(path, 0, format!("missing property {name}")))
    };
    let (cx, cy, cz, cq) = (col("x")?, col("y")?, col("z")?, col("quality")?);
    let mut vertices = Vec::with_capacity(n_vert);
    let mut quality = Vec::with_capacity(n_vert);
    let num = |tok: Option<&&str>, n: usize| -> Result<f64> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| NbvError::parse(path, n + 1, "bad vertex row"))
    };
    for _ in 0..n_vert {
        let (n, line) = lines.next().ok_or_else(|| NbvError::parse(path, 0, "truncated"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        vertices.push(Point3::new(
            num(toks.get(cx), n)?,
            num(toks.get(cy), n)?,
            num(toks.get(cz), n)?,
        ));
        quality.push(num(toks.get(cq), n)?);
    }
    let mut faces = Vec::with_capacity(n_face);
    for _ in 0..n_face {
        let (n, line) = lines.next().ok_or_else(|| NbvError::parse(path, 0, "truncated"))?;
        let idx: Vec<u32> = line
            .split_whitespace()
            .skip(1)
            .map(|t| t.parse().map_err(|_| NbvError::parse(path, n + 1, "bad face row")))
            .collect::<Result<_>>()?;
        for k in 1..idx.len().saturating_sub(1) {
            faces.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    Ok((TriangleMesh::new(vertices, faces)?, quality))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> TriangleMesh<f64> {
        TriangleMesh::with_tags(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.5, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.1),
                Point3::new(1.0, 1.0, -0.3),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
            &["ground", "target"],
        )
        .unwrap()
    }

    #[test]
    fn obj_and_tags_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (obj, tags) = (dir.path().join("m.obj"), dir.path().join("m.csv"));
        let mesh = quad();
        write_obj(&mesh, &obj).unwrap();
        write_tags(&mesh, &tags).unwrap();
        let back: TriangleMesh<f64> = read_obj(&obj, Some(&tags)).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn obj_polygons_are_fanned() {
        let dir = tempfile::tempdir().unwrap();
        let obj = dir.path().join("p.obj");
        std::fs::write(&obj, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 -1\n").unwrap();
        let mesh: TriangleMesh<f64> = read_obj(&obj, None).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_parse_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let obj = dir.path().join("bad.obj");
        std::fs::write(&obj, "v 0 0 0\nv 1 zero 0\n").unwrap();
        let err = read_obj::<f64>(&obj, None).unwrap_err();
        assert!(matches!(err, NbvError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn ply_quality_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ply = dir.path().join("c.ply");
        let mesh = quad();
        let q = [0.0, 3.0, 17.0, 1.0e6];
        write_ply_quality(&mesh, &q, &ply).unwrap();
        let (back, qb) = read_ply_quality(&ply).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.faces(), mesh.faces());
        assert_eq!(qb, q);
    }
}
