//! Conforming triangulations of a rectangle with oriented edge sets.
//!
//! Every edge carries the two (or one) adjacent triangles. On interior edges
//! `element_1` is the triangle with the smaller index and the unit normal
//! points from `element_1` into `element_2`; on boundary edges the normal
//! points out of the domain. Jumps are taken as `v|E1 - v|E2`.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let r = Rect { x0, x1, y0, y1 };
        r.validate()?;
        Ok(r)
    }

    pub fn unit() -> Self {
        Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.width() <= 0.0 || self.height() <= 0.0 {
            return Err(Error::invalid(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }

    /// True when `p` lies on the rectangle boundary (to a relative tolerance).
    pub fn on_boundary(&self, p: Point) -> bool {
        let tol = 1e-12 * self.width().max(self.height());
        (p[0] - self.x0).abs() <= tol
            || (p[0] - self.x1).abs() <= tol
            || (p[1] - self.y0).abs() <= tol
            || (p[1] - self.y1).abs() <= tol
    }
}

/// A triangle with its affine map `F(r) = v0 + J r` from the reference
/// triangle `{(0,0), (1,0), (0,1)}`.
#[derive(Clone, Debug)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub area: f64,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub inv_jacobian_t: [[f64; 2]; 2],
    pub det: f64,
}

impl Triangle {
    fn new(vertices: [usize; 3], coords: &[Point]) -> Option<Self> {
        let [a, b, c] = vertices.map(|v| coords[v]);
        let jacobian = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        if !(det > 0.0) {
            return None;
        }
        // (J^{-1})^T = 1/det [[j11, -j10], [-j01, j00]]
        let inv_jacobian_t = [
            [jacobian[1][1] / det, -jacobian[1][0] / det],
            [-jacobian[0][1] / det, jacobian[0][0] / det],
        ];
        Some(Triangle {
            vertices,
            area: 0.5 * det,
            jacobian,
            inv_jacobian_t,
            det,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoints, ordered counter-clockwise with respect to `element_1`
    /// unless the edge was explicitly re-oriented.
    pub vertices: [usize; 2],
    pub element_1: usize,
    /// `None` marks a boundary edge.
    pub element_2: Option<usize>,
    pub normal: [f64; 2],
    pub length: f64,
}

impl Edge {
    pub fn kind(&self) -> EdgeKind {
        match self.element_2 {
            Some(_) => EdgeKind::Interior,
            None => EdgeKind::Boundary,
        }
    }

    pub fn is_interior(&self) -> bool {
        self.element_2.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    element_edges: Vec<[usize; 3]>,
    h_max: f64,
    h_min: f64,
    domain: Rect,
}

/// Structured `nx x ny` grid of `domain`, each cell split along its
/// lower-left to upper-right diagonal.
pub fn build_uniform_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!(
            "mesh counts must be positive, got {nx} x {ny}"
        )));
    }
    domain.validate()?;
    let dx = domain.width() / nx as f64;
    let dy = domain.height() / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // pin the last row/column to the exact bounds
            let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * dx };
            let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * dy };
            vertices.push([x, y]);
        }
    }
    let v = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    Mesh::from_triangles(vertices, &triangles, domain)
}

/// Split every triangle into four congruent children through its edge
/// midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let [a, b, c] = tri.vertices;
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    Mesh::from_triangles(vertices, &triangles, mesh.domain)
}

impl Mesh {
    /// Build the edge structure for counter-clockwise triangles.
    pub fn from_triangles(vertices: Vec<Point>, triangles: &[[usize; 3]], domain: Rect) -> Result<Self> {
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, &tv) in triangles.iter().enumerate() {
            if tv.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::invalid(format!("triangle {t} references a missing vertex")));
            }
            let tri = Triangle::new(tv, &vertices).ok_or_else(|| {
                Error::invalid(format!("triangle {t} has non-positive area"))
            })?;
            tris.push(tri);
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(3 * tris.len() / 2 + 1);
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.capacity());
        let mut element_edges = Vec::with_capacity(tris.len());
        for (t, tri) in tris.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let a = tri.vertices[k];
                let b = tri.vertices[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                *slot = match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.element_2.is_some() {
                            return Err(Error::invalid(format!(
                                "edge ({a}, {b}) shared by more than two triangles"
                            )));
                        }
                        edge.element_2 = Some(t);
                        e
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let d = [pb[0] - pa[0], pb[1] - pa[1]];
                        let length = d[0].hypot(d[1]);
                        edges.push(Edge {
                            vertices: [a, b],
                            element_1: t,
                            element_2: None,
                            normal: [d[1] / length, -d[0] / length],
                            length,
                        });
                        lookup.insert(key, edges.len() - 1);
                        edges.len() - 1
                    }
                };
            }
            element_edges.push(local);
        }

        let h_max = edges.iter().map(|e| e.length).fold(0.0, f64::max);
        let h_min = edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
        Ok(Mesh {
            vertices,
            triangles: tris,
            edges,
            element_edges,
            h_max,
            h_min,
            domain,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> &Triangle {
        &self.triangles[t]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn element_edges(&self, t: usize) -> [usize; 3] {
        self.element_edges[t]
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_interior()).count()
    }

    /// Longest edge length.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Shortest edge length.
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// `V - E + (T + 1)`; equals 2 for a simply connected triangulation.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64 + 1
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    /// Affine map from reference coordinates to element `t`.
    pub fn map_to_physical(&self, t: usize, r: Point) -> Point {
        let tri = &self.triangles[t];
        let v0 = self.vertices[tri.vertices[0]];
        let j = &tri.jacobian;
        [
            v0[0] + j[0][0] * r[0] + j[0][1] * r[1],
            v0[1] + j[1][0] * r[0] + j[1][1] * r[1],
        ]
    }

    /// Inverse of [`Mesh::map_to_physical`].
    pub fn map_to_reference(&self, t: usize, p: Point) -> Point {
        let tri = &self.triangles[t];
        let v0 = self.vertices[tri.vertices[0]];
        let d = [p[0] - v0[0], p[1] - v0[1]];
        // J^{-1} = (J^{-T})^T
        let g = &tri.inv_jacobian_t;
        [g[0][0] * d[0] + g[1][0] * d[1], g[0][1] * d[0] + g[1][1] * d[1]]
    }

    /// Physical gradient from a reference gradient: `J^{-T} grad_ref`.
    pub fn pull_back_gradient(&self, t: usize, g: [f64; 2]) -> [f64; 2] {
        let m = &self.triangles[t].inv_jacobian_t;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }

    /// Copy of the mesh with the given interior edges re-oriented: the two
    /// adjacent elements swap roles and the normal flips.
    pub fn with_reoriented_edges(&self, edges: &[usize]) -> Result<Mesh> {
        let mut out = self.clone();
        for &e in edges {
            let edge = out
                .edges
                .get_mut(e)
                .ok_or_else(|| Error::invalid(format!("edge {e} out of range")))?;
            let Some(e2) = edge.element_2 else {
                return Err(Error::invalid(format!("edge {e} is a boundary edge")));
            };
            edge.element_2 = Some(edge.element_1);
            edge.element_1 = e2;
            edge.normal = [-edge.normal[0], -edge.normal[1]];
            edge.vertices.swap(0, 1);
        }
        Ok(out)
    }

    /// Common arclength parameterization of an edge seen from each adjacent
    /// element.
    pub fn edge_trace_frames(&self, e: usize) -> EdgeTrace {
        let edge = &self.edges[e];
        let start = self.vertices[edge.vertices[0]];
        let end = self.vertices[edge.vertices[1]];
        let side = |t: usize| {
            let r0 = self.map_to_reference(t, start);
            let r1 = self.map_to_reference(t, end);
            SideFrame {
                element: t,
                ref_start: r0,
                ref_dir: [r1[0] - r0[0], r1[1] - r0[1]],
            }
        };
        EdgeTrace {
            start,
            dir: [end[0] - start[0], end[1] - start[1]],
            side_1: side(edge.element_1),
            side_2: edge.element_2.map(side),
        }
    }
}

/// Parameterization of one side of an edge in the element's reference
/// coordinates.
#[derive(Clone, Copy, Debug)]
pub struct SideFrame {
    pub element: usize,
    pub ref_start: Point,
    pub ref_dir: Point,
}

impl SideFrame {
    /// Reference coordinates of the edge point at parameter `s` in `[0, 1]`.
    pub fn reference_point(&self, s: f64) -> Point {
        [
            self.ref_start[0] + s * self.ref_dir[0],
            self.ref_start[1] + s * self.ref_dir[1],
        ]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EdgeTrace {
    pub start: Point,
    pub dir: Point,
    pub side_1: SideFrame,
    pub side_2: Option<SideFrame>,
}

impl EdgeTrace {
    pub fn physical_point(&self, s: f64) -> Point {
        [self.start[0] + s * self.dir[0], self.start[1] + s * self.dir[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Mesh {
        build_uniform_mesh(n, n, Rect::unit()).unwrap()
    }

    #[test]
    fn single_cell() {
        let m = unit(1);
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.edges().len(), 5);
        assert_eq!(m.n_interior_edges(), 1);
    }

    #[test]
    fn two_by_two_counts() {
        let m = unit(2);
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.vertices().len(), 9);
        assert_eq!(m.edges().len(), 16);
        assert_eq!(m.n_interior_edges(), 8);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn h_max_is_cell_diagonal() {
        for n in [1, 3, 8, 10] {
            let m = unit(n);
            assert!((m.h_max() - 2f64.sqrt() / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_uniform_mesh(0, 2, Rect::unit()).is_err());
        assert!(build_uniform_mesh(2, 0, Rect::unit()).is_err());
        let flat = Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 1.0,
            y1: 1.0,
        };
        assert!(build_uniform_mesh(2, 2, flat).is_err());
    }

    #[test]
    fn refine_counts_and_h() {
        let m = unit(1);
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.n_elements(), 8);
        assert_eq!(r.euler_characteristic(), 2);

        let m = unit(4);
        assert!((m.h_max() - 2f64.sqrt() * 0.25).abs() < 1e-15);
        let r = refine_uniform(&m).unwrap();
        assert!((r.h_max() - 0.5 * m.h_max()).abs() < 1e-15);

        let rr = refine_uniform(&r).unwrap();
        assert_eq!(rr.euler_characteristic(), 2);
        // interior edges: 3T/2 - boundary/2, boundary doubles per refinement
        let boundary = rr.edges().len() - rr.n_interior_edges();
        assert_eq!(boundary, 4 * 4 * 4);
        assert_eq!(2 * rr.n_interior_edges() + boundary, 3 * rr.n_elements());
    }

    #[test]
    fn children_inside_parent() {
        let m = unit(2);
        let r = refine_uniform(&m).unwrap();
        for (p, parent) in m.triangles().iter().enumerate() {
            for c in 0..4 {
                let child = r.triangle(4 * p + c);
                for &v in &child.vertices {
                    let rp = m.map_to_reference(p, r.vertices()[v]);
                    let tol = 1e-14;
                    assert!(rp[0] >= -tol && rp[1] >= -tol && rp[0] + rp[1] <= 1.0 + tol);
                }
                assert!((child.area - 0.25 * parent.area).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn edge_invariants() {
        let m = refine_uniform(&unit(3)).unwrap();
        let area: f64 = m.total_area();
        assert!((area - 1.0).abs() < 1e-12);
        for edge in m.edges() {
            let n = edge.normal;
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-14);
            let [a, b] = edge.vertices.map(|v| m.vertices()[v]);
            assert!((edge.length - (b[0] - a[0]).hypot(b[1] - a[1])).abs() < 1e-15);
            let c1 = centroid(&m, edge.element_1);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            // normal points away from E1
            assert!((mid[0] - c1[0]) * n[0] + (mid[1] - c1[1]) * n[1] > 0.0);
            match edge.element_2 {
                Some(e2) => {
                    assert!(e2 != edge.element_1);
                    assert!(edge.element_1 < e2);
                    let c2 = centroid(&m, e2);
                    assert!((c2[0] - mid[0]) * n[0] + (c2[1] - mid[1]) * n[1] > 0.0);
                }
                None => assert!(m.domain().on_boundary(mid)),
            }
        }
    }

    fn centroid(m: &Mesh, t: usize) -> Point {
        m.map_to_physical(t, [1.0 / 3.0, 1.0 / 3.0])
    }

    #[test]
    fn trace_frames_agree() {
        let m = unit(3);
        for (e, edge) in m.edges().iter().enumerate() {
            let tr = m.edge_trace_frames(e);
            for s in [0.0, 0.5, 0.3, 1.0] {
                let p = tr.physical_point(s);
                let p1 = m.map_to_physical(edge.element_1, tr.side_1.reference_point(s));
                assert!((p[0] - p1[0]).abs() < 1e-14 && (p[1] - p1[1]).abs() < 1e-14);
                if let Some(s2) = tr.side_2 {
                    let p2 = m.map_to_physical(s2.element, s2.reference_point(s));
                    assert!((p[0] - p2[0]).abs() < 1e-14 && (p[1] - p2[1]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn affine_maps() {
        let m = unit(2);
        for t in 0..m.n_elements() {
            let tri = m.triangle(t);
            for (k, r) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
                let p = m.map_to_physical(t, *r);
                assert_eq!(p, m.vertices()[tri.vertices[k]]);
                let back = m.map_to_reference(t, p);
                assert!((back[0] - r[0]).abs() < 1e-14 && (back[1] - r[1]).abs() < 1e-14);
            }
        }
        // identity-shaped element: reference triangle itself
        let id = Mesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            &[[0, 1, 2]],
            Rect::unit(),
        )
        .unwrap();
        assert_eq!(id.pull_back_gradient(0, [1.0, 0.0]), [1.0, 0.0]);
        let big = Mesh::from_triangles(
            vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]],
            &[[0, 1, 2]],
            Rect::new(0.0, 2.0, 0.0, 2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(big.pull_back_gradient(0, [1.0, -3.0]), [0.5, -1.5]);
    }

    #[test]
    fn reorientation_flips() {
        let m = unit(2);
        let e = m.edges().iter().position(|e| e.is_interior()).unwrap();
        let f = m.with_reoriented_edges(&[e]).unwrap();
        assert_eq!(f.edges()[e].element_1, m.edges()[e].element_2.unwrap());
        assert_eq!(f.edges()[e].normal[0], -m.edges()[e].normal[0]);
        let b = m.edges().iter().position(|e| !e.is_interior()).unwrap();
        assert!(m.with_reoriented_edges(&[b]).is_err());
    }
}
