//! Quadrature rules on triangles, segments and tetrahedra.
//!
//! Triangle rules are stored in barycentric coordinates with weights summing
//! to one, so a rule is applied to a physical triangle by mapping the points
//! and scaling the weights by the area.

use nalgebra::{Vector2, Vector3};

/// A symmetric triangle rule: barycentric points and normalized weights.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn push_orbit3(pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>, a: f64, w: f64) {
    let b = 1.0 - 2.0 * a;
    pts.push([a, a, b]);
    pts.push([a, b, a]);
    pts.push([b, a, a]);
    wts.extend([w, w, w]);
}

fn push_orbit6(pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>, a: f64, b: f64, w: f64) {
    let c = 1.0 - a - b;
    for p in [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ] {
        pts.push(p);
        wts.push(w);
    }
}

impl TriangleRule {
    /// Smallest tabulated rule that is exact for polynomials of `degree`.
    /// Supported degrees are 1 through 6.
    pub fn of_degree(degree: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let exact = match degree {
            0 | 1 => {
                points.push([1.0 / 3.0; 3]);
                weights.push(1.0);
                1
            }
            2 => {
                push_orbit3(&mut points, &mut weights, 1.0 / 6.0, 1.0 / 3.0);
                2
            }
            3 | 4 => {
                push_orbit3(
                    &mut points,
                    &mut weights,
                    0.445_948_490_915_964_886,
                    0.223_381_589_678_011_466,
                );
                push_orbit3(
                    &mut points,
                    &mut weights,
                    0.091_576_213_509_770_743,
                    0.109_951_743_655_321_868,
                );
                4
            }
            5 | 6 => {
                push_orbit3(
                    &mut points,
                    &mut weights,
                    0.249_286_745_170_910_421,
                    0.116_786_275_726_379_366,
                );
                push_orbit3(
                    &mut points,
                    &mut weights,
                    0.063_089_014_491_502_228,
                    0.050_844_906_370_206_817,
                );
                push_orbit6(
                    &mut points,
                    &mut weights,
                    0.053_145_049_844_816_947,
                    0.310_352_451_033_784_405,
                    0.082_851_075_618_373_575,
                );
                6
            }
            d => panic!("no triangle rule of degree {d}"),
        };
        TriangleRule {
            points,
            weights,
            degree: exact,
        }
    }

    /// Physical points and weights on the triangle `tri`.
    pub fn map(&self, tri: &[Vector2<f64>; 3]) -> impl Iterator<Item = (Vector2<f64>, f64)> + '_ {
        let area = triangle_area(tri);
        let tri = *tri;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(l, w)| (tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2], w * area))
    }
}

/// Unsigned area of a triangle.
pub fn triangle_area(tri: &[Vector2<f64>; 3]) -> f64 {
    0.5 * signed_area2(tri).abs()
}

/// Twice the signed area (positive for counter-clockwise ordering).
pub fn signed_area2(tri: &[Vector2<f64>; 3]) -> f64 {
    let a = tri[1] - tri[0];
    let b = tri[2] - tri[0];
    a.x * b.y - a.y * b.x
}

/// Three-point Gauss-Legendre rule on `[0, 1]`, exact for degree 5.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Gauss points and weights on the segment from `a` to `b`.
pub fn segment_gauss3(a: Vector2<f64>, b: Vector2<f64>) -> [(Vector2<f64>, f64); 3] {
    let len = (b - a).norm();
    GAUSS3.map(|(s, w)| (a + (b - a) * s, w * len))
}

/// Unsigned volume of a tetrahedron.
pub fn tet_volume(t: &[Vector3<f64>; 4]) -> f64 {
    (t[1] - t[0])
        .cross(&(t[2] - t[0]))
        .dot(&(t[3] - t[0]))
        .abs()
        / 6.0
}

/// Four-point rule on a tetrahedron, exact for degree 2.
pub fn tet_degree2(t: &[Vector3<f64>; 4]) -> [(Vector3<f64>, f64); 4] {
    let a = 0.585_410_196_624_968_5;
    let b = 0.138_196_601_125_010_5;
    let vol = tet_volume(t);
    let mut out = [(Vector3::zeros(), 0.0); 4];
    for (k, o) in out.iter_mut().enumerate() {
        let mut p = Vector3::zeros();
        for (i, v) in t.iter().enumerate() {
            p += v * if i == k { a } else { b };
        }
        *o = (p, vol / 4.0);
    }
    out
}
