//! Level-set interfaces, edge/interface intersection and cut-element
//! quadrature.
//!
//! The level set is positive on Ω⁺ and negative on Ω⁻. A cut triangle is split
//! by the chord `DE` joining the two points where the interface crosses its
//! edges; the chord normal `n_h` points into the plus side and the tangent
//! `t_h` is `n_h` rotated clockwise by 90°.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;
use thiserror::Error;

use crate::quadrature::{triangle_area, TriangleRule};

pub type Vec2 = Vector2<f64>;

/// Which subdomain a point or piece belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn of_value(v: f64) -> Side {
        if v >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

/// Classification of a point relative to the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Plus,
    Minus,
    Interface,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("level set does not change sign on segment ({a:?}) -> ({b:?})")]
    NoBracket { a: [f64; 2], b: [f64; 2] },
    #[error("interface does not cut the element in exactly two edge points ({crossings} crossings): {detail}")]
    AssumptionAViolated { crossings: usize, detail: String },
    #[error("cut produces a sub-region with relative area {ratio:e}")]
    DegenerateCut { ratio: f64 },
}

/// A scalar function whose zero set is the interface.
pub trait LevelSet: Send + Sync {
    fn value(&self, x: Vec2) -> f64;
    fn gradient(&self, x: Vec2) -> Vec2;
}

/// `|x - c|² - r²`; the disc is the minus side.
#[derive(Debug, Clone, Copy)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl LevelSet for Circle {
    fn value(&self, x: Vec2) -> f64 {
        (x - self.center).norm_squared() - self.radius * self.radius
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        2.0 * (x - self.center)
    }
}

/// The four-lobed curve `(3(x²+y²) - x)² - x² - y² + 0.02`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flower;

impl LevelSet for Flower {
    fn value(&self, x: Vec2) -> f64 {
        let r2 = x.norm_squared();
        let q = 3.0 * r2 - x.x;
        q * q - r2 + 0.02
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        let r2 = x.norm_squared();
        let q = 3.0 * r2 - x.x;
        Vec2::new(
            2.0 * q * (6.0 * x.x - 1.0) - 2.0 * x.x,
            2.0 * q * 6.0 * x.y - 2.0 * x.y,
        )
    }
}

/// The straight interface `normal · x = offset`.
#[derive(Debug, Clone, Copy)]
pub struct Line {
    pub normal: Vec2,
    pub offset: f64,
}

impl LevelSet for Line {
    fn value(&self, x: Vec2) -> f64 {
        self.normal.dot(&x) - self.offset
    }
    fn gradient(&self, _x: Vec2) -> Vec2 {
        self.normal
    }
}

/// Level set given by closures.
pub struct FnLevelSet<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> LevelSet for FnLevelSet<F, G>
where
    F: Fn(Vec2) -> f64 + Send + Sync,
    G: Fn(Vec2) -> Vec2 + Send + Sync,
{
    fn value(&self, x: Vec2) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        (self.gradient)(x)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn square(lo: f64, hi: f64) -> Self {
        Rect {
            min: Vec2::new(lo, lo),
            max: Vec2::new(hi, hi),
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        x.x >= self.min.x && x.x <= self.max.x && x.y >= self.min.y && x.y <= self.max.y
    }
}

/// Interface geometry: a level set on a rectangular domain.
#[derive(Clone)]
pub struct LevelSetGeometry {
    pub level_set: Arc<dyn LevelSet>,
    pub domain: Rect,
    /// Relative tolerance for calling a point "on" the interface.
    pub interface_tol: f64,
}

impl fmt::Debug for LevelSetGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetGeometry")
            .field("domain", &self.domain)
            .field("interface_tol", &self.interface_tol)
            .finish_non_exhaustive()
    }
}

impl LevelSetGeometry {
    pub fn new(level_set: Arc<dyn LevelSet>, domain: Rect) -> Self {
        LevelSetGeometry {
            level_set,
            domain,
            interface_tol: 1e-12,
        }
    }

    /// Registered interfaces: `"circle"` (radius 0.5 at the origin) and
    /// `"flower"`, both on `(-1, 1)²`.
    pub fn named(name: &str) -> Option<Self> {
        let ls: Arc<dyn LevelSet> = match name {
            "circle" => Arc::new(Circle {
                center: Vec2::zeros(),
                radius: 0.5,
            }),
            "flower" => Arc::new(Flower),
            _ => return None,
        };
        Some(Self::new(ls, Rect::square(-1.0, 1.0)))
    }

    pub fn phi(&self, x: Vec2) -> f64 {
        self.level_set.value(x)
    }

    pub fn grad_phi(&self, x: Vec2) -> Vec2 {
        self.level_set.gradient(x)
    }

    /// True side of `x`, with points on the zero set counted as plus.
    pub fn side(&self, x: Vec2) -> Side {
        Side::of_value(self.phi(x))
    }

    /// Three-way classification; `scale` sets the length scale of the
    /// interface tolerance.
    pub fn classify_point(&self, x: Vec2, scale: f64) -> PointClass {
        let v = self.phi(x);
        if v.abs() <= self.interface_tol * scale * self.grad_phi(x).norm() {
            PointClass::Interface
        } else if v > 0.0 {
            PointClass::Plus
        } else {
            PointClass::Minus
        }
    }
}

/// Root of the level set on the segment `[a, b]`.
///
/// Bisection down to a bracket of width `1e-13 |b - a|` followed by a single
/// secant step inside the final bracket. An endpoint at which the level set
/// vanishes exactly is returned as is.
pub fn edge_intersection(geom: &LevelSetGeometry, a: Vec2, b: Vec2) -> Result<Vec2, GeometryError> {
    let fa = geom.phi(a);
    let fb = geom.phi(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(GeometryError::NoBracket {
            a: [a.x, a.y],
            b: [b.x, b.y],
        });
    }
    let at = |t: f64| a + (b - a) * t;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut flo, mut fhi) = (fa, fb);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let fm = geom.phi(at(mid));
        if fm == 0.0 {
            return Ok(at(mid));
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    let t = lo - flo * (hi - lo) / (fhi - flo);
    let t = if t.is_finite() && t >= lo && t <= hi {
        t
    } else {
        0.5 * (lo + hi)
    };
    Ok(at(t))
}

/// Number of sign changes of the level set along `[a, b]`, sampled at the
/// endpoints and three interior points. More than one change, or a change
/// between endpoints of equal sign, means the edge meets the interface more
/// than once.
pub fn probe_sign_changes(geom: &LevelSetGeometry, a: Vec2, b: Vec2) -> usize {
    let mut changes = 0;
    let mut last = 0.0_f64;
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let v = geom.phi(a + (b - a) * t);
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            changes += 1;
        }
        last = v;
    }
    changes
}

/// Sign of a vertex after snapping near-interface vertices to the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VertexSign {
    Plus,
    Minus,
    Zero,
}

impl VertexSign {
    /// Side used for nodal values; vertices on the interface see both sides
    /// agree, so plus is as good as minus.
    pub fn side(self) -> Side {
        match self {
            VertexSign::Minus => Side::Minus,
            _ => Side::Plus,
        }
    }

    /// Whether the open segment between vertices of these signs crosses the
    /// interface.
    pub fn strictly_opposite(self, other: VertexSign) -> bool {
        matches!(
            (self, other),
            (VertexSign::Plus, VertexSign::Minus) | (VertexSign::Minus, VertexSign::Plus)
        )
    }
}

/// Snap rule: a vertex whose distance to the interface (first-order estimate)
/// is at most `1e-12 * h` is treated as lying on it.
pub fn vertex_sign(geom: &LevelSetGeometry, x: Vec2, h: f64) -> VertexSign {
    match geom.classify_point(x, h) {
        PointClass::Plus => VertexSign::Plus,
        PointClass::Minus => VertexSign::Minus,
        PointClass::Interface => VertexSign::Zero,
    }
}

/// The chord `DE` of a cut element with its orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutSegment {
    pub d: Vec2,
    pub e: Vec2,
    /// Unit normal to `DE`, pointing into the plus piece.
    pub normal: Vec2,
    /// `normal` rotated clockwise by 90°.
    pub tangent: Vec2,
}

impl CutSegment {
    /// Builds the segment from its endpoints and a point known to lie strictly
    /// on the plus side.
    pub fn new(d: Vec2, e: Vec2, plus_point: Vec2) -> Self {
        let dir = (e - d).normalize();
        let mut normal = Vec2::new(-dir.y, dir.x);
        if (plus_point - d).dot(&normal) < 0.0 {
            normal = -normal;
        }
        CutSegment {
            d,
            e,
            normal,
            tangent: Vec2::new(normal.y, -normal.x),
        }
    }

    /// Signed distance to the chord line, positive on the plus side.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        (x - self.d).dot(&self.normal)
    }

    /// Discrete side of `x` (points on the chord line count as plus).
    pub fn side(&self, x: Vec2) -> Side {
        Side::of_value(self.signed_distance(x))
    }

    pub fn midpoint(&self) -> Vec2 {
        0.5 * (self.d + self.e)
    }

    pub fn length(&self) -> f64 {
        (self.e - self.d).norm()
    }
}

pub fn diameter(tri: &[Vec2; 3]) -> f64 {
    (tri[0] - tri[1])
        .norm()
        .max((tri[1] - tri[2]).norm())
        .max((tri[2] - tri[0]).norm())
}

/// Cut segment of a triangle given the snapped vertex signs and, for every
/// local edge `k` (from vertex `k` to vertex `k+1`) whose endpoints are
/// strictly opposite, the interface point on that edge.
pub fn cut_from_parts(
    tri: &[Vec2; 3],
    signs: [VertexSign; 3],
    edge_points: [Option<Vec2>; 3],
) -> Result<CutSegment, GeometryError> {
    let mut points = Vec::with_capacity(3);
    for k in 0..3 {
        if signs[k] == VertexSign::Zero {
            points.push(tri[k]);
        }
        if signs[k].strictly_opposite(signs[(k + 1) % 3]) {
            match edge_points[k] {
                Some(p) => points.push(p),
                None => {
                    return Err(GeometryError::AssumptionAViolated {
                        crossings: 0,
                        detail: format!("missing interface point on local edge {k}"),
                    })
                }
            }
        }
    }
    let has_plus = signs.contains(&VertexSign::Plus);
    let has_minus = signs.contains(&VertexSign::Minus);
    if points.len() != 2 || !has_plus || !has_minus {
        return Err(GeometryError::AssumptionAViolated {
            crossings: points.len(),
            detail: format!("vertex signs {signs:?}"),
        });
    }
    let plus = (0..3)
        .filter(|&k| signs[k] == VertexSign::Plus)
        .map(|k| tri[k])
        .max_by(|p, q| {
            let dp = dist_to_line(*p, points[0], points[1]);
            let dq = dist_to_line(*q, points[0], points[1]);
            dp.total_cmp(&dq)
        })
        .expect("has a plus vertex");
    let seg = CutSegment::new(points[0], points[1], plus);
    let (ap, am) = sub_areas(tri, &seg);
    let ratio = ap.min(am) / triangle_area(tri);
    if ratio < 1e-14 || !ratio.is_finite() {
        return Err(GeometryError::DegenerateCut { ratio });
    }
    Ok(seg)
}

fn dist_to_line(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    ((p - a).x * d.y - (p - a).y * d.x).abs()
}

/// Builds the cut segment of a single triangle directly from the level set.
pub fn build_cut_segment(
    geom: &LevelSetGeometry,
    tri: &[Vec2; 3],
) -> Result<CutSegment, GeometryError> {
    let h = diameter(tri);
    let signs = tri.map(|x| vertex_sign(geom, x, h));
    let mut edge_points = [None; 3];
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let changes = probe_sign_changes(geom, a, b);
        let opposite = signs[k].strictly_opposite(signs[(k + 1) % 3]);
        if changes > 1 || (changes == 1 && !opposite && !signs.contains(&VertexSign::Zero)) {
            return Err(GeometryError::AssumptionAViolated {
                crossings: 3,
                detail: format!("local edge {k} meets the interface more than once"),
            });
        }
        if opposite {
            edge_points[k] = Some(edge_intersection(geom, a, b)?);
        }
    }
    cut_from_parts(tri, signs, edge_points)
}

/// Sub-triangles of a cut triangle, each tagged with its discrete side.
///
/// The plus and minus polygons are assembled exactly from the triangle
/// vertices and the chord endpoints; a quadrilateral piece is split along its
/// shorter diagonal. Pieces of zero area are dropped.
pub fn cut_cells(tri: &[Vec2; 3], seg: &CutSegment) -> Vec<([Vec2; 3], Side)> {
    let h = diameter(tri);
    let tol = 1e-12 * h;
    let s = tri.map(|x| seg.signed_distance(x));
    let class = |v: f64| {
        if v > tol {
            1
        } else if v < -tol {
            -1
        } else {
            0
        }
    };
    let mut plus: Vec<Vec2> = Vec::with_capacity(4);
    let mut minus: Vec<Vec2> = Vec::with_capacity(4);
    for k in 0..3 {
        let ck = class(s[k]);
        if ck >= 0 {
            plus.push(tri[k]);
        }
        if ck <= 0 {
            minus.push(tri[k]);
        }
        let cn = class(s[(k + 1) % 3]);
        if ck * cn < 0 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let p = if dist_to_segment(seg.d, a, b) <= dist_to_segment(seg.e, a, b) {
                seg.d
            } else {
                seg.e
            };
            plus.push(p);
            minus.push(p);
        }
    }
    let mut cells = Vec::with_capacity(4);
    for (poly, side) in [(plus, Side::Plus), (minus, Side::Minus)] {
        for t in fan(&poly) {
            if triangle_area(&t) > 1e-15 * h * h {
                cells.push((t, side));
            }
        }
    }
    cells
}

fn dist_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

fn fan(poly: &[Vec2]) -> Vec<[Vec2; 3]> {
    match poly.len() {
        3 => vec![[poly[0], poly[1], poly[2]]],
        4 => {
            if (poly[0] - poly[2]).norm() <= (poly[1] - poly[3]).norm() {
                vec![[poly[0], poly[1], poly[2]], [poly[0], poly[2], poly[3]]]
            } else {
                vec![[poly[1], poly[2], poly[3]], [poly[1], poly[3], poly[0]]]
            }
        }
        _ => Vec::new(),
    }
}

/// Areas of the plus and minus pieces.
pub fn sub_areas(tri: &[Vec2; 3], seg: &CutSegment) -> (f64, f64) {
    let mut ap = 0.0;
    let mut am = 0.0;
    for (t, side) in cut_cells(tri, seg) {
        match side {
            Side::Plus => ap += triangle_area(&t),
            Side::Minus => am += triangle_area(&t),
        }
    }
    (ap, am)
}

/// A quadrature node with its side tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: Vec2,
    pub weight: f64,
    pub side: Side,
}

/// Quadrature on a cut triangle: the rule of the given degree applied on
/// every side-tagged sub-triangle.
pub fn cut_quadrature(tri: &[Vec2; 3], seg: &CutSegment, degree: usize) -> Vec<QuadPoint> {
    let rule = TriangleRule::of_degree(degree);
    let mut out = Vec::new();
    for (t, side) in cut_cells(tri, seg) {
        out.extend(
            rule.map(&t)
                .map(|(x, weight)| QuadPoint { x, weight, side }),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn circle_root_on_axis_edge() {
        let g = LevelSetGeometry::named("circle").unwrap();
        let p = edge_intersection(&g, v(0.0, 0.0), v(1.0, 0.0)).unwrap();
        assert!((p - v(0.5, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn flower_root_matches_dense_scan() {
        let g = LevelSetGeometry::named("flower").unwrap();
        let (a, b) = (v(0.1, 0.0), v(0.1, 0.2));
        let p = edge_intersection(&g, a, b).unwrap();
        // Scan oracle: locate the sign change on a 10^6-step grid.
        let n = 1_000_000;
        let mut prev = g.phi(a);
        let mut root = f64::NAN;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let cur = g.phi(a + (b - a) * t);
            if (cur > 0.0) != (prev > 0.0) {
                root = (k as f64 - 0.5) / n as f64;
                break;
            }
            prev = cur;
        }
        let t = (p - a).norm() / (b - a).norm();
        assert!((t - root).abs() <= 0.5 / n as f64 + 1e-12);
        assert!(g.phi(p).abs() <= 1e-12 * g.grad_phi(p).norm() * (b - a).norm());
    }

    #[test]
    fn flower_segment_with_two_roots_has_no_bracket() {
        let g = LevelSetGeometry::named("flower").unwrap();
        let (a, b) = (v(0.1, 0.0), v(0.1, 0.5));
        assert!(matches!(
            edge_intersection(&g, a, b),
            Err(GeometryError::NoBracket { .. })
        ));
        assert_eq!(probe_sign_changes(&g, a, b), 2);
    }

    #[test]
    fn line_cut_segment_and_areas() {
        let g = LevelSetGeometry::new(
            Arc::new(Line {
                normal: v(1.0, 0.0),
                offset: 0.5,
            }),
            Rect::square(-1.0, 1.0),
        );
        let tri = [v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)];
        let seg = build_cut_segment(&g, &tri).unwrap();
        let ends = [seg.d, seg.e];
        assert!(ends.iter().any(|p| (p - v(0.5, 0.0)).norm() < 1e-13));
        assert!(ends.iter().any(|p| (p - v(0.5, 0.5)).norm() < 1e-13));
        assert!((seg.normal - v(1.0, 0.0)).norm() < 1e-14);
        assert!((seg.tangent - v(0.0, -1.0)).norm() < 1e-14);
        let (ap, am) = sub_areas(&tri, &seg);
        assert!((ap - 0.125).abs() < 1e-14);
        assert!((am - 0.375).abs() < 1e-14);
    }

    #[test]
    fn interface_through_two_vertices_is_rejected() {
        let g = LevelSetGeometry::new(
            Arc::new(Line {
                normal: v(1.0, 0.0),
                offset: 0.4,
            }),
            Rect::square(-1.0, 1.0),
        );
        let tri = [v(0.4, 0.0), v(0.6, 0.0), v(0.4, 0.2)];
        assert!(matches!(
            build_cut_segment(&g, &tri),
            Err(GeometryError::AssumptionAViolated { .. })
        ));
    }

    #[test]
    fn interface_through_one_vertex_uses_the_vertex() {
        let g = LevelSetGeometry::new(
            Arc::new(Line {
                normal: v(1.0, -1.0),
                offset: 0.0,
            }),
            Rect::square(-1.0, 1.0),
        );
        let tri = [v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)];
        let seg = build_cut_segment(&g, &tri).unwrap();
        assert!([seg.d, seg.e].contains(&v(0.0, 0.0)));
        let (ap, am) = sub_areas(&tri, &seg);
        assert!((ap - 0.25).abs() < 1e-14 && (am - 0.25).abs() < 1e-14);
    }

    #[test]
    fn sliver_cut_is_degenerate() {
        let g = LevelSetGeometry::new(
            Arc::new(Line {
                normal: v(1.0, 0.0),
                offset: 1.0 - 1e-9,
            }),
            Rect::square(-1.0, 1.0),
        );
        let tri = [v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)];
        assert!(matches!(
            build_cut_segment(&g, &tri),
            Err(GeometryError::DegenerateCut { .. })
        ));
    }

    #[test]
    fn cut_quadrature_reproduces_linear_moments() {
        let g = LevelSetGeometry::named("circle").unwrap();
        let tri = [v(0.4, 0.1), v(0.6, 0.1), v(0.6, 0.3)];
        let seg = build_cut_segment(&g, &tri).unwrap();
        let rule = TriangleRule::of_degree(2);
        let whole: f64 = rule
            .map(&tri)
            .map(|(x, w)| w * (1.0 + 2.0 * x.x - x.y))
            .sum();
        let cut: f64 = cut_quadrature(&tri, &seg, 2)
            .iter()
            .map(|q| q.weight * (1.0 + 2.0 * q.x.x - q.x.y))
            .sum();
        assert!((whole - cut).abs() < 1e-13);
        for q in cut_quadrature(&tri, &seg, 6) {
            assert_eq!(seg.side(q.x), q.side);
        }
    }
}
