//! Conforming P1 triangulations of the reference domain.
//!
//! A [`TriMesh`] owns the vertex coordinates, counter-clockwise triangles and
//! the outward-oriented boundary edge list. The boundary vertices are numbered
//! `0..nb` in boundary order; those indices are the degrees of freedom of
//! every boundary field and boundary dual in the crate.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// One boundary edge `i -> j` with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub i: usize,
    pub j: usize,
    pub marker: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    boundary_vertices: Vec<usize>,
    interior_vertices: Vec<usize>,
    /// vertex index -> boundary DOF (or `usize::MAX` for interior vertices)
    boundary_slot: Vec<usize>,
    interior_slot: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl TriMesh {
    /// Build a mesh and check every structural invariant.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let nv = vertices.len();
        let boundary_vertices = boundary_order(nv, &boundary_edges)?;
        let mut boundary_slot = vec![NONE; nv];
        for (b, &v) in boundary_vertices.iter().enumerate() {
            boundary_slot[v] = b;
        }
        let interior_vertices: Vec<usize> =
            (0..nv).filter(|&v| boundary_slot[v] == NONE).collect();
        let mut interior_slot = vec![NONE; nv];
        for (k, &v) in interior_vertices.iter().enumerate() {
            interior_slot[v] = k;
        }
        let mesh = TriMesh {
            vertices,
            triangles,
            boundary_edges,
            boundary_vertices,
            interior_vertices,
            boundary_slot,
            interior_slot,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Boundary vertices in boundary order; position `b` is boundary DOF `b`.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior_vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary_vertices.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_vertices.len()
    }

    /// Boundary DOF of vertex `v`, if it lies on the boundary.
    pub fn boundary_slot(&self, v: usize) -> Option<usize> {
        Some(self.boundary_slot[v]).filter(|&s| s != NONE)
    }

    pub fn interior_slot(&self, v: usize) -> Option<usize> {
        Some(self.interior_slot[v]).filter(|&s| s != NONE)
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * (p1 - p0).perp(&(p2 - p0))
    }

    /// Constant gradients of the three P1 hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> [Vector2<f64>; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let jac = Matrix2::from_columns(&[p1 - p0, p2 - p0]);
        let inv_t = jac
            .try_inverse()
            .expect("validated mesh has non-degenerate triangles")
            .transpose();
        let g1 = inv_t * Vector2::new(1.0, 0.0);
        let g2 = inv_t * Vector2::new(0.0, 1.0);
        [-g1 - g2, g1, g2]
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|e| (self.vertices[e.j] - self.vertices[e.i]).norm())
            .sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(i, j)| (self.vertices[i] - self.vertices[j]).norm())
            .fold(0.0, f64::max)
    }

    /// Diameter of the vertex cloud's bounding box.
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = (Point::repeat(f64::INFINITY), Point::repeat(f64::NEG_INFINITY));
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }

    /// Number of distinct (undirected) edges.
    pub fn num_edges(&self) -> usize {
        edge_incidence(&self.triangles).len()
    }

    /// Check all structural invariants, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Validation {
                    invariant: "vertex index range",
                    detail: format!("triangle {t} references a missing vertex"),
                });
            }
            let area = self.signed_area(t);
            if !(area > 0.0) {
                return Err(Error::Validation {
                    invariant: "positive signed area",
                    detail: format!("triangle {t} has signed area {area:e}"),
                });
            }
        }
        let incidence = edge_incidence(&self.triangles);
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                *directed.entry((i, j)).or_default() += 1;
            }
        }
        let mut on_boundary = HashMap::new();
        for e in &self.boundary_edges {
            let key = (e.i.min(e.j), e.i.max(e.j));
            if incidence.get(&key).copied() != Some(1) {
                return Err(Error::Validation {
                    invariant: "boundary edge in exactly one triangle",
                    detail: format!("edge ({}, {})", e.i, e.j),
                });
            }
            if directed.get(&(e.i, e.j)).copied() != Some(1) {
                return Err(Error::Validation {
                    invariant: "boundary orientation",
                    detail: format!("edge ({}, {}) does not have the domain on its left", e.i, e.j),
                });
            }
            if on_boundary.insert(key, ()).is_some() {
                return Err(Error::Validation {
                    invariant: "boundary edge in exactly one triangle",
                    detail: format!("edge ({}, {}) listed twice", e.i, e.j),
                });
            }
        }
        for (&(i, j), &count) in &incidence {
            let expected = if on_boundary.contains_key(&(i, j)) { 1 } else { 2 };
            if count != expected {
                return Err(Error::Validation {
                    invariant: "interior edge in exactly two triangles",
                    detail: format!("edge ({i}, {j}) is shared by {count} triangles"),
                });
            }
        }
        let euler = nv as i64 - incidence.len() as i64 + self.triangles.len() as i64;
        if euler != 1 {
            return Err(Error::Validation {
                invariant: "Euler formula V - E + T = 1",
                detail: format!("V - E + T = {euler}"),
            });
        }
        let mut seen = vec![0u8; nv];
        for &v in self.boundary_vertices.iter().chain(&self.interior_vertices) {
            seen[v] += 1;
        }
        if seen.iter().any(|&s| s != 1) {
            return Err(Error::Validation {
                invariant: "boundary/interior partition",
                detail: "vertex sets do not partition the vertex indices".into(),
            });
        }
        Ok(())
    }
}

fn edge_incidence(triangles: &[[usize; 3]]) -> HashMap<(usize, usize), usize> {
    let mut map = HashMap::new();
    for &[a, b, c] in triangles {
        for (i, j) in [(a, b), (b, c), (c, a)] {
            *map.entry((i.min(j), i.max(j))).or_insert(0) += 1;
        }
    }
    map
}

/// Walk the boundary cycle(s) starting from the first listed edge.
fn boundary_order(nv: usize, edges: &[BoundaryEdge]) -> Result<Vec<usize>> {
    let mut next = HashMap::new();
    for e in edges {
        if e.i >= nv || e.j >= nv {
            return Err(Error::Validation {
                invariant: "vertex index range",
                detail: format!("boundary edge ({}, {}) references a missing vertex", e.i, e.j),
            });
        }
        if next.insert(e.i, e.j).is_some() {
            return Err(Error::Validation {
                invariant: "boundary orientation",
                detail: format!("vertex {} starts two boundary edges", e.i),
            });
        }
    }
    let mut order = Vec::with_capacity(edges.len());
    let mut visited = vec![false; nv];
    for e in edges {
        let mut v = e.i;
        while !visited[v] {
            visited[v] = true;
            order.push(v);
            v = *next.get(&v).ok_or_else(|| Error::Validation {
                invariant: "closed boundary",
                detail: format!("boundary path stops at vertex {v}"),
            })?;
        }
    }
    Ok(order)
}

/// Disk of the given radius centered at the origin.
///
/// Structured polar rings: ring `j` (radius `j R / nr`) carries `6 j` equally
/// spaced vertices, consecutive rings are zipped by angle and the first ring
/// fans from the origin. The ring count is `floor(4 R / (3 h))`, which keeps
/// every edge below `1.5 h` and at least doubles the boundary resolution
/// whenever `h` is halved.
pub fn generate_disk_mesh(radius: f64, target_h: f64) -> Result<TriMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid("radius", "must be positive"));
    }
    if !(target_h > 0.0) || target_h >= radius {
        return Err(Error::invalid("target_h", "must satisfy 0 < target_h < radius"));
    }
    let rings = ((4.0 * radius / (3.0 * target_h)).floor() as usize).max(1);
    let mut vertices = vec![Point::zeros()];
    let mut ring_start = vec![0usize];
    for j in 1..=rings {
        ring_start.push(vertices.len());
        let r = radius * j as f64 / rings as f64;
        let n = 6 * j;
        for i in 0..n {
            let theta = 2.0 * PI * i as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            vertices.push(Point::new(r * c, r * s));
        }
    }
    let ring = |j: usize, i: usize| -> usize {
        if j == 0 {
            0
        } else {
            ring_start[j] + i % (6 * j)
        }
    };
    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for i in 0..6 {
        triangles.push([0, ring(1, i), ring(1, i + 1)]);
    }
    for j in 1..rings {
        let (n_in, n_out) = (6 * j, 6 * (j + 1));
        let (mut a, mut b) = (0usize, 0usize);
        while a < n_in || b < n_out {
            let next_in = (a + 1) as f64 / n_in as f64;
            let next_out = (b + 1) as f64 / n_out as f64;
            if b == n_out || (a < n_in && next_in <= next_out) {
                triangles.push([ring(j, a), ring(j + 1, b), ring(j, a + 1)]);
                a += 1;
            } else {
                triangles.push([ring(j, a), ring(j + 1, b), ring(j + 1, b + 1)]);
                b += 1;
            }
        }
    }
    let n_b = 6 * rings;
    let boundary_edges = (0..n_b)
        .map(|i| BoundaryEdge {
            i: ring(rings, i),
            j: ring(rings, i + 1),
            marker: 1,
        })
        .collect();
    TriMesh::new(vertices, triangles, boundary_edges)
}

/// Structured `n x n` grid of the square `[0, side]^2`, each cell split into two triangles.
pub fn generate_square_mesh(side: f64, n: usize) -> Result<TriMesh> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::invalid("side", "must be positive"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let h = side / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut loop_vertices = Vec::with_capacity(4 * n);
    loop_vertices.extend((0..n).map(|i| id(i, 0)));
    loop_vertices.extend((0..n).map(|j| id(n, j)));
    loop_vertices.extend((0..n).map(|i| id(n - i, n)));
    loop_vertices.extend((0..n).map(|j| id(0, n - j)));
    let m = loop_vertices.len();
    let boundary_edges = (0..m)
        .map(|k| BoundaryEdge {
            i: loop_vertices[k],
            j: loop_vertices[(k + 1) % m],
            marker: 1 + (k / n) as i64,
        })
        .collect();
    TriMesh::new(vertices, triangles, boundary_edges)
}

/// Parse the plain-text `mesh2d` format.
pub fn load_mesh(text: &str) -> Result<TriMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "empty mesh file".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "mesh2d" {
        return Err(Error::Parse {
            line: hline,
            message: "expected header `mesh2d <nv> <nt> <nb>`".into(),
        });
    }
    let count = |s: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::Parse {
            line: hline,
            message: format!("invalid count `{s}`"),
        })
    };
    let (nv, nt, nb) = (count(fields[1])?, count(fields[2])?, count(fields[3])?);

    let mut record = |tag: &str, arity: usize| -> Result<(usize, Vec<String>)> {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: format!("unexpected end of file, expected `{tag}` record"),
        })?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.first() != Some(&tag) || parts.len() != arity + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected `{tag}` followed by {arity} fields"),
            });
        }
        Ok((line, parts[1..].iter().map(|s| s.to_string()).collect()))
    };
    let index = |line: usize, s: &str, bound: usize| -> Result<usize> {
        let v: usize = s.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid index `{s}`"),
        })?;
        if v >= bound {
            return Err(Error::Parse {
                line,
                message: format!("vertex index {v} out of range (nv = {bound})"),
            });
        }
        Ok(v)
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = record("v", 2)?;
        let coord = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid coordinate `{s}`"),
            })
        };
        vertices.push(Point::new(coord(&f[0])?, coord(&f[1])?));
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = record("t", 3)?;
        triangles.push([index(line, &f[0], nv)?, index(line, &f[1], nv)?, index(line, &f[2], nv)?]);
    }
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, f) = record("b", 3)?;
        let marker = f[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid marker `{}`", f[2]),
        })?;
        boundary_edges.push(BoundaryEdge {
            i: index(line, &f[0], nv)?,
            j: index(line, &f[1], nv)?,
            marker,
        });
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            message: "trailing records after the declared counts".into(),
        });
    }
    TriMesh::new(vertices, triangles, boundary_edges)
}

/// Canonical text form; `load_mesh(&save_mesh(m))` reproduces `m` exactly.
pub fn save_mesh(mesh: &TriMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mesh2d {} {} {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    );
    for p in &mesh.vertices {
        let _ = writeln!(out, "v {} {}", p.x, p.y);
    }
    for [a, b, c] in &mesh.triangles {
        let _ = writeln!(out, "t {a} {b} {c}");
    }
    for e in &mesh.boundary_edges {
        let _ = writeln!(out, "b {} {} {}", e.i, e.j, e.marker);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = "mesh2d 3 1 3\nv 0 0\nv 1 0\nv 0 1\nt 0 1 2\nb 0 1 1\nb 1 2 1\nb 2 0 1\n";

    #[test]
    fn disk_euler_and_area() {
        let m = generate_disk_mesh(1.0, 0.5).unwrap();
        let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.triangles().len() as i64;
        assert_eq!(euler, 1);
        assert!((0..m.triangles().len()).all(|t| m.signed_area(t) > 0.0));
        assert!((m.area() - PI).abs() / PI <= 0.05);
    }

    #[test]
    fn disk_boundary_length_matches_inscribed_polygon() {
        let m = generate_disk_mesh(1.0, 0.05).unwrap();
        let nb = m.num_boundary() as f64;
        let polygon = 2.0 * nb * (PI / nb).sin();
        assert!((m.boundary_length() - polygon).abs() < 1e-12);
        assert!((m.boundary_length() - 2.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn disk_boundary_on_circle_and_edges_bounded() {
        for &(r, h) in &[(1.0, 0.05), (2.0, 0.3), (1.0, 0.9), (1.0, 0.45), (1.0, 0.33)] {
            let m = generate_disk_mesh(r, h).unwrap();
            for &v in m.boundary_vertices() {
                assert!((m.vertices()[v].norm() - r).abs() <= 1e-12 * r);
            }
            assert!(m.max_edge_length() <= 1.5 * h, "r={r} h={h}: {}", m.max_edge_length());
        }
    }

    #[test]
    fn disk_rejects_bad_parameters() {
        assert!(matches!(generate_disk_mesh(0.0, 0.1), Err(Error::InvalidParameter { .. })));
        assert!(matches!(generate_disk_mesh(1.0, -0.1), Err(Error::InvalidParameter { .. })));
        assert!(matches!(generate_disk_mesh(1.0, 1.0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn square_counts() {
        let m = generate_square_mesh(1.0, 1).unwrap();
        assert_eq!((m.num_vertices(), m.triangles().len(), m.boundary_edges().len()), (4, 2, 4));
        let m = generate_square_mesh(1.0, 2).unwrap();
        assert_eq!((m.num_vertices(), m.triangles().len(), m.boundary_edges().len()), (9, 8, 8));
        let m = generate_square_mesh(2.0, 4).unwrap();
        assert_eq!(m.area(), 4.0);
        assert_eq!(m.num_interior(), 9);
    }

    #[test]
    fn single_triangle_file() {
        let m = load_mesh(SINGLE).unwrap();
        assert_eq!(m.boundary_edges().len(), 3);
        assert_eq!(m.num_interior(), 0);
        assert_eq!(save_mesh(&m), SINGLE);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\nmesh2d 3 1 3 # trailing\n\nv 0 0\nv 1 0\nv 0 1\nt 0 1 2\nb 0 1 1\nb 1 2 1\nb 2 0 1\n";
        assert_eq!(load_mesh(text).unwrap(), load_mesh(SINGLE).unwrap());
    }

    #[test]
    fn out_of_range_index_is_a_parse_error() {
        let bad = SINGLE.replace("t 0 1 2", "t 0 1 7");
        match load_mesh(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header_is_a_parse_error() {
        assert!(matches!(load_mesh("mesh3d 3 1 3\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn clockwise_triangle_fails_validation() {
        let bad = SINGLE.replace("t 0 1 2", "t 0 2 1");
        match load_mesh(&bad) {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "positive signed area"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_boundary_edge_fails_validation() {
        let bad = "mesh2d 3 1 2\nv 0 0\nv 1 0\nv 0 1\nt 0 1 2\nb 0 1 1\nb 1 2 1\n";
        assert!(matches!(load_mesh(bad), Err(Error::Validation { .. })));
    }

    #[test]
    fn refinement_doubles_boundary_resolution() {
        for k in 1..40 {
            let h = 0.9 / (1.0 + 0.173 * k as f64);
            let coarse = generate_disk_mesh(1.0, h).unwrap().num_boundary();
            let fine = generate_disk_mesh(1.0, h / 2.0).unwrap().num_boundary();
            assert!(fine >= 2 * coarse, "h={h}: {coarse} -> {fine}");
        }
    }
}
