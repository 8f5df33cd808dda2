//! Structured triangulation of a rectangle and its classification against an
//! interface.
//!
//! Each cell of an `N × N` grid is split by the diagonal from its bottom-left
//! to its top-right corner. Every interior edge stores its two neighbours in
//! increasing index order; the edge normal `n_e` points from the first to the
//! second, so jumps are `[v] = v|T1 - v|T2`.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{
    cut_from_parts, edge_intersection, probe_sign_changes, vertex_sign, CutSegment, GeometryError,
    LevelSetGeometry, Rect, Side, Vec2, VertexSign,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("interface violates the single-crossing assumption at element {element}; try N >= {suggested_n}")]
    AssumptionAViolated { element: usize, suggested_n: usize },
    #[error("element {element}: {source}")]
    Geometry {
        element: usize,
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Lower-index neighbour first; boundary edges have a single neighbour.
    pub tris: (usize, Option<usize>),
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Vec2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// `tri_edges[t][k]` joins local vertices `k` and `k + 1`.
    pub tri_edges: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    pub domain: Rect,
    pub n: usize,
    /// Largest element diameter.
    pub h: f64,
}

impl TriMesh {
    /// `N × N` grid of `domain` with every cell split along its
    /// bottom-left to top-right diagonal.
    pub fn cartesian(domain: Rect, n: usize) -> Self {
        assert!(n >= 1, "grid needs at least one cell per direction");
        let dx = (domain.max.x - domain.min.x) / n as f64;
        let dy = (domain.max.y - domain.min.y) / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let x = if i == n {
                    domain.max.x
                } else {
                    domain.min.x + i as f64 * dx
                };
                let y = if j == n {
                    domain.max.y
                } else {
                    domain.min.y + j as f64 * dy
                };
                vertices.push(Vec2::new(x, y));
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (p00, p10, p01, p11) =
                    (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
        let (edges, tri_edges) = build_edges(&triangles);
        TriMesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            boundary,
            domain,
            n,
            h: (dx * dx + dy * dy).sqrt(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, t: usize) -> [Vec2; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn edge_points(&self, e: usize) -> (Vec2, Vec2) {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[a], self.vertices[b])
    }

    /// Unit normal of an interior edge, pointing from its first neighbour to
    /// its second. For boundary edges it points out of the domain.
    pub fn edge_normal(&self, e: usize) -> Vec2 {
        let (a, b) = self.edge_points(e);
        let d = (b - a).normalize();
        let n = Vec2::new(d.y, -d.x);
        let t1 = self.edges[e].tris.0;
        let c = self.triangle(t1).iter().sum::<Vec2>() / 3.0;
        if (c - a).dot(&n) > 0.0 {
            -n
        } else {
            n
        }
    }

    /// Element containing `x`, found in constant time from the grid structure.
    pub fn locate(&self, x: Vec2) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        let n = self.n;
        let dx = (self.domain.max.x - self.domain.min.x) / n as f64;
        let dy = (self.domain.max.y - self.domain.min.y) / n as f64;
        let fx = (x.x - self.domain.min.x) / dx;
        let fy = (x.y - self.domain.min.y) / dy;
        let i = (fx.floor() as usize).min(n - 1);
        let j = (fy.floor() as usize).min(n - 1);
        let (lx, ly) = (fx - i as f64, fy - j as f64);
        let cell = 2 * (j * n + i);
        Some(if ly <= lx { cell } else { cell + 1 })
    }

    /// Plain-text export: a header line with the vertex and triangle counts,
    /// then one `x y` line per vertex and one `i j k` line per triangle.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {}", self.vertices.len(), self.triangles.len())?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", p.x, p.y)?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn build_edges(triangles: &[[usize; 3]]) -> (Vec<Edge>, Vec<[usize; 3]>) {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut tri_edges = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut local = [0; 3];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let id = *index.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    vertices: [key.0, key.1],
                    tris: (t, None),
                });
                edges.len() - 1
            });
            if edges[id].tris.0 != t {
                edges[id].tris.1 = Some(t);
            }
            local[k] = id;
        }
        tri_edges.push(local);
    }
    (edges, tri_edges)
}

/// Element classification relative to the discrete interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Plus,
    Minus,
    Interface,
}

impl ElementKind {
    pub fn side(self) -> Option<Side> {
        match self {
            ElementKind::Plus => Some(Side::Plus),
            ElementKind::Minus => Some(Side::Minus),
            ElementKind::Interface => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeshClassification {
    pub vertex_signs: Vec<VertexSign>,
    pub kinds: Vec<ElementKind>,
    pub cuts: Vec<Option<CutSegment>>,
    /// Interface point on each mesh edge whose open interior crosses it.
    pub edge_points: Vec<Option<Vec2>>,
    /// Interior mesh edges crossed by the interface, in mesh-edge order.
    pub interface_edges: Vec<usize>,
}

impl MeshClassification {
    pub fn interface_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == ElementKind::Interface)
            .map(|(t, _)| t)
    }

    pub fn num_interface_elements(&self) -> usize {
        self.interface_elements().count()
    }
}

/// Classifies vertices, edges and elements against the interface.
///
/// Vertices within `1e-12 h` of the interface are snapped onto it. An element
/// is an interface element when it has a strictly plus and a strictly minus
/// vertex; elements touching the interface only at vertices or along an edge
/// belong to the side of their remaining vertices.
pub fn classify_mesh(
    mesh: &TriMesh,
    geom: &LevelSetGeometry,
) -> Result<MeshClassification, MeshError> {
    let vertex_signs: Vec<VertexSign> = mesh
        .vertices
        .iter()
        .map(|&x| vertex_sign(geom, x, mesh.h))
        .collect();
    let mut edge_points = vec![None; mesh.edges.len()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let [a, b] = edge.vertices;
        let (sa, sb) = (vertex_signs[a], vertex_signs[b]);
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let changes = probe_sign_changes(geom, pa, pb);
        let same_strict = (sa == VertexSign::Plus && sb == VertexSign::Plus)
            || (sa == VertexSign::Minus && sb == VertexSign::Minus);
        if changes > 1 || (changes > 0 && same_strict) {
            return Err(MeshError::AssumptionAViolated {
                element: edge.tris.0,
                suggested_n: 2 * mesh.n,
            });
        }
        if sa.strictly_opposite(sb) {
            let p = edge_intersection(geom, pa, pb).map_err(|source| MeshError::Geometry {
                element: edge.tris.0,
                source,
            })?;
            edge_points[e] = Some(p);
        }
    }
    let mut kinds = Vec::with_capacity(mesh.num_triangles());
    let mut cuts = Vec::with_capacity(mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let signs = tri.map(|v| vertex_signs[v]);
        let has_plus = signs.contains(&VertexSign::Plus);
        let has_minus = signs.contains(&VertexSign::Minus);
        if has_plus && has_minus {
            let pts = mesh.tri_edges[t].map(|e| edge_points[e]);
            let seg = cut_from_parts(&mesh.triangle(t), signs, pts)
                .map_err(|source| MeshError::Geometry { element: t, source })?;
            kinds.push(ElementKind::Interface);
            cuts.push(Some(seg));
        } else {
            kinds.push(if has_minus {
                ElementKind::Minus
            } else {
                ElementKind::Plus
            });
            cuts.push(None);
        }
    }
    let interface_edges = mesh
        .edges
        .iter()
        .enumerate()
        .filter(|(e, edge)| edge_points[*e].is_some() && edge.tris.1.is_some())
        .map(|(e, _)| e)
        .collect();
    Ok(MeshClassification {
        vertex_signs,
        kinds,
        cuts,
        edge_points,
        interface_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Line;
    use std::collections::{BTreeSet, HashSet};
    use std::sync::Arc;

    fn unit_mesh(n: usize) -> TriMesh {
        TriMesh::cartesian(Rect::square(-1.0, 1.0), n)
    }

    #[test]
    fn counts_for_n2() {
        let m = unit_mesh(2);
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.edges.len(), 16);
        assert!((m.h - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn euler_characteristic_and_edge_neighbours() {
        for n in [1, 3, 8] {
            let m = unit_mesh(n);
            let (v, e, f) = (
                m.num_vertices() as i64,
                m.edges.len() as i64,
                m.num_triangles() as i64,
            );
            assert_eq!(v - e + f, 1);
            for edge in &m.edges {
                if let Some(t2) = edge.tris.1 {
                    assert!(edge.tris.0 < t2);
                }
                let on_boundary = m.boundary[edge.vertices[0]] && m.boundary[edge.vertices[1]];
                assert_eq!(
                    edge.tris.1.is_none(),
                    on_boundary && is_axis_aligned(&m, edge)
                );
            }
        }
    }

    fn is_axis_aligned(m: &TriMesh, e: &Edge) -> bool {
        let d = m.vertices[e.vertices[1]] - m.vertices[e.vertices[0]];
        d.x == 0.0 || d.y == 0.0
    }

    #[test]
    fn triangles_are_counter_clockwise_with_equal_area() {
        let m = unit_mesh(4);
        for t in 0..m.num_triangles() {
            let a2 = crate::quadrature::signed_area2(&m.triangle(t));
            assert!((a2 - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_normal_points_from_first_to_second_neighbour() {
        let m = unit_mesh(3);
        for (e, edge) in m.edges.iter().enumerate() {
            if let (t1, Some(t2)) = edge.tris {
                let c1: Vec2 = m.triangle(t1).iter().sum::<Vec2>() / 3.0;
                let c2: Vec2 = m.triangle(t2).iter().sum::<Vec2>() / 3.0;
                assert!((c2 - c1).dot(&m.edge_normal(e)) > 0.0);
            }
        }
    }

    #[test]
    fn locate_agrees_with_barycentric_test() {
        let m = unit_mesh(5);
        let pts = [
            Vec2::new(0.13, -0.71),
            Vec2::new(-0.99, 0.99),
            Vec2::new(0.5, 0.3),
            Vec2::new(1.0, 1.0),
        ];
        for x in pts {
            let t = m.locate(x).unwrap();
            let tri = m.triangle(t);
            let bary = crate::ife_space::barycentric(&tri, x);
            assert!(bary.iter().all(|&l| l >= -1e-12), "{x:?} not in {t}");
        }
        assert!(m.locate(Vec2::new(1.1, 0.0)).is_none());
    }

    // Oracle: sample the level set on a 10 × 10 barycentric lattice per
    // triangle and flag the triangle when both strict signs occur.
    fn scan_count(m: &TriMesh, g: &LevelSetGeometry) -> usize {
        (0..m.num_triangles())
            .filter(|&t| {
                let tri = m.triangle(t);
                let (mut pos, mut neg) = (false, false);
                for i in 0..10 {
                    for j in 0..(10 - i) {
                        let (a, b) = (i as f64 / 9.0, j as f64 / 9.0);
                        let x = tri[0] * (1.0 - a - b) + tri[1] * a + tri[2] * b;
                        let v = g.phi(x);
                        if v > 1e-14 {
                            pos = true;
                        } else if v < -1e-14 {
                            neg = true;
                        }
                    }
                }
                pos && neg
            })
            .count()
    }

    #[test]
    fn interface_element_count_matches_sampling_oracle() {
        for (name, n) in [
            ("circle", 8),
            ("circle", 16),
            ("flower", 16),
            ("flower", 32),
        ] {
            let g = LevelSetGeometry::named(name).unwrap();
            let m = unit_mesh(n);
            let c = classify_mesh(&m, &g).unwrap();
            assert_eq!(
                c.num_interface_elements(),
                scan_count(&m, &g),
                "{name} N={n}"
            );
        }
    }

    #[test]
    fn circle_classification_respects_diagonal_symmetries() {
        let g = LevelSetGeometry::named("circle").unwrap();
        let m = unit_mesh(8);
        let c = classify_mesh(&m, &g).unwrap();
        let centroid = |t: usize| m.triangle(t).iter().sum::<Vec2>() / 3.0;
        let key = |p: Vec2| ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64);
        let tris: HashSet<_> = c.interface_elements().map(|t| key(centroid(t))).collect();
        // The diagonal direction is preserved by these four maps.
        let maps: [fn(Vec2) -> Vec2; 4] = [
            |p| p,
            |p| -p,
            |p| Vec2::new(p.y, p.x),
            |p| Vec2::new(-p.y, -p.x),
        ];
        for f in maps {
            let mapped: HashSet<_> = c
                .interface_elements()
                .map(|t| key(f(centroid(t))))
                .collect();
            assert_eq!(mapped, tris);
        }
        // Grid cells holding an interface element are invariant under the
        // full dihedral group.
        let cell = |t: usize| t / 2;
        let cells: BTreeSet<usize> = c.interface_elements().map(cell).collect();
        let cell_center = |k: usize| {
            let (i, j) = (k % 8, k / 8);
            Vec2::new(
                -1.0 + 0.25 * (i as f64 + 0.5),
                -1.0 + 0.25 * (j as f64 + 0.5),
            )
        };
        let all: [fn(Vec2) -> Vec2; 8] = [
            |p| p,
            |p| Vec2::new(-p.y, p.x),
            |p| -p,
            |p| Vec2::new(p.y, -p.x),
            |p| Vec2::new(-p.x, p.y),
            |p| Vec2::new(p.x, -p.y),
            |p| Vec2::new(p.y, p.x),
            |p| Vec2::new(-p.y, -p.x),
        ];
        for f in all {
            let mapped: BTreeSet<usize> = cells
                .iter()
                .map(|&k| m.locate(f(cell_center(k))).unwrap() / 2)
                .collect();
            assert_eq!(mapped, cells);
        }
    }

    #[test]
    fn interface_elements_form_closed_chains() {
        for (name, n) in [("circle", 16), ("flower", 32)] {
            let g = LevelSetGeometry::named(name).unwrap();
            let m = unit_mesh(n);
            let c = classify_mesh(&m, &g).unwrap();
            // Two interface elements are linked when they share a crossed
            // edge or a vertex lying on the interface.
            let elems: Vec<usize> = c.interface_elements().collect();
            for &t in &elems {
                let mut links = 0;
                for &s in &elems {
                    if s == t {
                        continue;
                    }
                    let shared_edge = m.tri_edges[t]
                        .iter()
                        .any(|e| m.tri_edges[s].contains(e) && c.edge_points[*e].is_some());
                    let shared_zero = m.triangles[t].iter().any(|v| {
                        m.triangles[s].contains(v) && c.vertex_signs[*v] == VertexSign::Zero
                    });
                    if shared_edge || shared_zero {
                        links += 1;
                    }
                }
                assert!(links >= 2, "{name}: element {t} has {links} links");
            }
        }
    }

    #[test]
    fn interface_edges_have_interface_neighbours() {
        let g = LevelSetGeometry::named("circle").unwrap();
        let m = unit_mesh(16);
        let c = classify_mesh(&m, &g).unwrap();
        assert!(!c.interface_edges.is_empty());
        for &e in &c.interface_edges {
            let (t1, t2) = m.edges[e].tris;
            assert_eq!(c.kinds[t1], ElementKind::Interface);
            assert_eq!(c.kinds[t2.unwrap()], ElementKind::Interface);
        }
    }

    #[test]
    fn vertices_on_the_interface_are_snapped() {
        // (0.5, 0) lies exactly on the circle for every even N.
        let g = LevelSetGeometry::named("circle").unwrap();
        let m = unit_mesh(8);
        let c = classify_mesh(&m, &g).unwrap();
        let v = m
            .vertices
            .iter()
            .position(|p| (p - Vec2::new(0.5, 0.0)).norm() < 1e-15)
            .unwrap();
        assert_eq!(c.vertex_signs[v], VertexSign::Zero);
    }

    #[test]
    fn straight_interface_through_grid_lines() {
        let g = LevelSetGeometry::new(
            Arc::new(Line {
                normal: Vec2::new(1.0, 0.0),
                offset: 0.0,
            }),
            Rect::square(-1.0, 1.0),
        );
        let m = unit_mesh(4);
        let c = classify_mesh(&m, &g).unwrap();
        assert_eq!(c.num_interface_elements(), 0);
        assert!(c.interface_edges.is_empty());
    }

    #[test]
    fn text_export_has_expected_line_count() {
        let m = unit_mesh(2);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 9 + 8);
        assert_eq!(text.lines().next().unwrap(), "9 8");
    }
}
