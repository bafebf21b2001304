//! Plain-text mesh files.
//!
//! ```text
//! # optional comments
//! nv nt
//! x y        (nv lines)
//! i j k      (nt lines, 0-based)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rstgam_core::mesh::TriMesh;

use crate::error::FormatError;

/// Cells per axis of the point-location grid attached to loaded meshes.
const GRID_CELLS: usize = 16;

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn fields<T: std::str::FromStr>(line: usize, text: &str, want: usize) -> Result<Vec<T>, FormatError> {
    let v: Vec<T> = text
        .split_whitespace()
        .map(|t| t.parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| FormatError::parse("mesh", line, format!("cannot parse `{text}`")))?;
    if v.len() != want {
        return Err(FormatError::parse("mesh", line, format!("expected {want} fields, found {}", v.len())));
    }
    Ok(v)
}

pub fn parse_mesh(text: &str) -> Result<TriMesh, FormatError> {
    let mut lines = data_lines(text);
    let (l, header) = lines.next().ok_or_else(|| FormatError::parse("mesh", 1, "empty file"))?;
    let h: Vec<usize> = fields(l, header, 2)?;
    let (nv, nt) = (h[0], h[1]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| FormatError::parse("mesh", 0, "missing vertex lines"))?;
        let v: Vec<f64> = fields(l, s, 2)?;
        if !v.iter().all(|x| x.is_finite()) {
            return Err(FormatError::parse("mesh", l, "non-finite coordinate"));
        }
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (l, s) = lines.next().ok_or_else(|| FormatError::parse("mesh", 0, "missing triangle lines"))?;
        let t: Vec<usize> = fields(l, s, 3)?;
        triangles.push([t[0], t[1], t[2]]);
    }
    if let Some((l, _)) = lines.next() {
        return Err(FormatError::parse("mesh", l, "unexpected trailing data"));
    }
    Ok(TriMesh::new(vertices, triangles)?.with_grid_index(GRID_CELLS))
}

pub fn read_mesh(path: &Path) -> Result<TriMesh, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_mesh(&text)
}

/// Renders a mesh; coordinates use the shortest round-trip decimal form.
pub fn mesh_to_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", mesh.vertices().len(), mesh.triangles().len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_mesh(path: &Path, mesh: &TriMesh) -> Result<(), FormatError> {
    std::fs::write(path, mesh_to_string(mesh)).map_err(|e| FormatError::io(path, e))
}
