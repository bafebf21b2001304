//! Triangulated planar domains: topology, validation and point location.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::MeshError;

/// Barycentric inside tolerance used by [`TriMesh::locate`].
pub const DEFAULT_INSIDE_TOL: f64 = 1e-10;

pub type Point = [f64; 2];

/// An edge of the triangulation with its incident triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints, smaller vertex index first.
    pub vertices: [usize; 2],
    pub first: usize,
    pub second: Option<usize>,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.second.is_some()
    }
}

/// Triangle containing a point plus its barycentric coordinates there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaryCoord {
    pub triangle: usize,
    pub b: [f64; 3],
}

#[derive(Debug, Clone)]
struct GridIndex {
    origin: Point,
    cell: Point,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

/// A conforming triangulation with counterclockwise triangles. Immutable once built.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    inside_tol: f64,
    grid: Option<GridIndex>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

impl TriMesh {
    /// Validates and builds a mesh; clockwise triangles are flipped.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let scale = bbox_diameter(&vertices);
        let mut tris = triangles;
        for (t, tri) in tris.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= vertices.len() {
                    return Err(MeshError::VertexIndex { triangle: t, vertex: v });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::Degenerate { triangle: t });
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area.abs() <= 1e-14 * scale * scale {
                return Err(MeshError::Degenerate { triangle: t });
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut table: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                table.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut edges = Vec::with_capacity(table.len());
        for ((a, b), inc) in table {
            if inc.len() > 2 {
                return Err(MeshError::NonConforming { triangle_a: inc[0], triangle_b: inc[2] });
            }
            edges.push(Edge { vertices: [a, b], first: inc[0], second: inc.get(1).copied() });
        }

        let mesh = Self { vertices, triangles: tris, edges, inside_tol: DEFAULT_INSIDE_TOL, grid: None };
        mesh.check_conforming(scale)?;
        Ok(mesh)
    }

    /// Builds a uniform bucket grid to speed up [`TriMesh::locate`].
    pub fn with_grid_index(mut self, cells_per_axis: usize) -> Self {
        let n = cells_per_axis.max(1);
        let (lo, hi) = self.bounding_box();
        let cell = [((hi[0] - lo[0]) / n as f64).max(1e-300), ((hi[1] - lo[1]) / n as f64).max(1e-300)];
        let mut buckets = vec![Vec::new(); n * n];
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for &v in tri {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(self.vertices[v][d]);
                    thi[d] = thi[d].max(self.vertices[v][d]);
                }
            }
            let cx = |x: f64, d: usize| -> usize {
                let k = crate::math::floor((x - lo[d]) / cell[d]);
                (k.max(0.0) as usize).min(n - 1)
            };
            // pad by one cell so points within tolerance of the box still hit
            let (x0, x1) = (cx(tlo[0], 0).saturating_sub(1), (cx(thi[0], 0) + 1).min(n - 1));
            let (y0, y1) = (cx(tlo[1], 1).saturating_sub(1), (cx(thi[1], 1) + 1).min(n - 1));
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    buckets[iy * n + ix].push(t);
                }
            }
        }
        self.grid = Some(GridIndex { origin: lo, cell, nx: n, ny: n, buckets });
        self
    }

    pub fn with_inside_tol(mut self, tol: f64) -> Self {
        self.inside_tol = tol;
        self
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_interior())
    }

    pub fn n_interior_edges(&self) -> usize {
        self.interior_edges().count()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edges.len() - self.n_interior_edges()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Barycentric coordinates of `u` relative to triangle `t` (no inside test).
    pub fn barycentric(&self, t: usize, u: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_vertices(t);
        let det = orient(a, b, c);
        let b1 = orient(u, b, c) / det;
        let b2 = orient(a, u, c) / det;
        [b1, b2, 1.0 - b1 - b2]
    }

    /// Point in the plane from barycentric coordinates relative to triangle `t`.
    pub fn from_barycentric(&self, t: usize, b: [f64; 3]) -> Point {
        let [p, q, r] = self.triangle_vertices(t);
        [
            b[0] * p[0] + b[1] * q[0] + b[2] * r[0],
            b[0] * p[1] + b[1] * q[1] + b[2] * r[1],
        ]
    }

    fn test_triangle(&self, t: usize, u: Point) -> Option<BaryCoord> {
        let b = self.barycentric(t, u);
        if b.iter().all(|&x| x >= -self.inside_tol) {
            Some(BaryCoord { triangle: t, b })
        } else {
            None
        }
    }

    /// Finds the lowest-index triangle containing `u` (within tolerance).
    pub fn locate(&self, u: Point) -> Option<BaryCoord> {
        match &self.grid {
            Some(g) => {
                let ix = crate::math::floor((u[0] - g.origin[0]) / g.cell[0]);
                let iy = crate::math::floor((u[1] - g.origin[1]) / g.cell[1]);
                if ix < -1.0 || iy < -1.0 || ix > g.nx as f64 || iy > g.ny as f64 {
                    return None;
                }
                let ix = (ix.max(0.0) as usize).min(g.nx - 1);
                let iy = (iy.max(0.0) as usize).min(g.ny - 1);
                // bucket lists are in ascending triangle order
                g.buckets[iy * g.nx + ix].iter().find_map(|&t| self.test_triangle(t, u))
            }
            None => (0..self.triangles.len()).find_map(|t| self.test_triangle(t, u)),
        }
    }

    /// Rejects overlapping triangles and hanging vertices.
    fn check_conforming(&self, scale: f64) -> Result<(), MeshError> {
        let eps = 1e-12 * scale;
        let nt = self.triangles.len();
        let boxes: Vec<(Point, Point)> = (0..nt)
            .map(|t| {
                let vs = self.triangle_vertices(t);
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vs {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d]);
                        hi[d] = hi[d].max(v[d]);
                    }
                }
                (lo, hi)
            })
            .collect();

        // hanging vertex: a mesh vertex strictly inside some edge or triangle
        for (vi, &p) in self.vertices.iter().enumerate() {
            for t in 0..nt {
                let tri = self.triangles[t];
                if tri.contains(&vi) {
                    continue;
                }
                let (lo, hi) = boxes[t];
                if p[0] < lo[0] - eps || p[0] > hi[0] + eps || p[1] < lo[1] - eps || p[1] > hi[1] + eps {
                    continue;
                }
                let b = self.barycentric(t, p);
                if b.iter().all(|&x| x > -1e-12) {
                    let owner = self.triangles.iter().position(|tr| tr.contains(&vi)).unwrap_or(t);
                    return Err(MeshError::NonConforming { triangle_a: t.min(owner), triangle_b: t.max(owner) });
                }
            }
        }

        for s in 0..nt {
            for t in s + 1..nt {
                let (alo, ahi) = boxes[s];
                let (blo, bhi) = boxes[t];
                if alo[0] > bhi[0] + eps || blo[0] > ahi[0] + eps || alo[1] > bhi[1] + eps || blo[1] > ahi[1] + eps {
                    continue;
                }
                if self.triangles_overlap(s, t) {
                    return Err(MeshError::NonConforming { triangle_a: s, triangle_b: t });
                }
            }
        }
        Ok(())
    }

    fn triangles_overlap(&self, s: usize, t: usize) -> bool {
        let ts = self.triangles[s];
        let tt = self.triangles[t];
        let mut sorted_s = ts;
        let mut sorted_t = tt;
        sorted_s.sort_unstable();
        sorted_t.sort_unstable();
        if sorted_s == sorted_t {
            return true;
        }
        let ps = self.triangle_vertices(s);
        let pt = self.triangle_vertices(t);
        // proper crossings between edges with no shared endpoint
        for i in 0..3 {
            let (a0, a1) = (ts[i], ts[(i + 1) % 3]);
            for j in 0..3 {
                let (b0, b1) = (tt[j], tt[(j + 1) % 3]);
                if a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1 {
                    continue;
                }
                if segments_cross(ps[i], ps[(i + 1) % 3], pt[j], pt[(j + 1) % 3]) {
                    return true;
                }
            }
        }
        // triangles sharing an edge must lie on opposite sides of it
        let shared: Vec<usize> = ts.iter().copied().filter(|v| tt.contains(v)).collect();
        if shared.len() == 2 {
            let a = self.vertices[shared[0]];
            let b = self.vertices[shared[1]];
            let os = ts.iter().copied().find(|v| !shared.contains(v)).unwrap();
            let ot = tt.iter().copied().find(|v| !shared.contains(v)).unwrap();
            let so = orient(a, b, self.vertices[os]);
            let to = orient(a, b, self.vertices[ot]);
            if so * to > 0.0 {
                return true;
            }
        }
        // centroid containment catches nesting
        let cs = centroid(ps);
        let ct = centroid(pt);
        let inside = |tri: usize, p: Point| self.barycentric(tri, p).iter().all(|&x| x > 1e-12);
        inside(t, cs) || inside(s, ct)
    }
}

fn centroid(p: [Point; 3]) -> Point {
    [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    let scale = (p2[0] - p1[0]).abs() + (p2[1] - p1[1]).abs() + (q2[0] - q1[0]).abs() + (q2[1] - q1[1]).abs();
    let tol = 1e-12 * scale * scale;
    ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
}

fn bbox_diameter(v: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in v {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let d = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if d.is_finite() && d > 0.0 {
        d
    } else {
        1.0
    }
}

/// Area of a simple polygon given by its vertices in order (shoelace formula, signed).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Boundary loop(s) extracted from the boundary edges, each oriented
/// counterclockwise with respect to the mesh interior.
pub fn boundary_loops(mesh: &TriMesh) -> Vec<Vec<usize>> {
    // directed boundary edges follow the CCW triangle orientation
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for e in mesh.edges().iter().filter(|e| !e.is_interior()) {
        let tri = mesh.triangles()[e.first];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if (a.min(b), a.max(b)) == (e.vertices[0], e.vertices[1]) {
                next.insert(a, b);
            }
        }
    }
    let mut loops = Vec::new();
    while let Some((&start, _)) = next.iter().next() {
        let mut lp = vec![start];
        let mut cur = next.remove(&start).unwrap();
        while cur != start {
            lp.push(cur);
            match next.remove(&cur) {
                Some(n) => cur = n,
                None => break,
            }
        }
        loops.push(lp);
    }
    loops
}
