//! Local linear IFE construction on a tetrahedron cut by the tangent plane of
//! the interface at one point.
//!
//! The shape functions are piecewise affine on the true sub-regions `T±` and
//! satisfy, with respect to the tangent plane through `x*` with normal `n_h`,
//!
//! ```text
//! [φ](x*) = 0,   [∇φ·t_i] = 0 (i = 1, 2),   [β∇φ·n_h] = 0,
//! ```
//!
//! which gives the same closed form as in two dimensions,
//! `φ = Iφ + c (w - I w)` with `w = (x - x*)·n_h` on `T⁺` and zero on `T⁻`.
//!
//! Integrals over `T±` with respect to a curved interface are computed by
//! recursive subdivision: leaves near the interface are clipped against the
//! linear interpolant of the level set and integrated exactly on the pieces.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::Side;
use crate::quadrature::{tet_degree2, tet_volume};

pub type Vec3 = Vector3<f64>;
pub type Tet = [Vec3; 4];

/// Local edges of a tetrahedron in the order used to pick the anchor point.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Subdivision depth used for true-side integrals against curved interfaces.
pub const DEFAULT_DEPTH: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Ife3dError {
    #[error("the interface does not cut the tetrahedron")]
    NotCut,
    #[error("vertex {vertex} lies on the interface")]
    DegenerateCut { vertex: usize },
    #[error("interface normal is undefined at the anchor point")]
    ZeroGradient,
    #[error("IFE basis is singular: flux denominator {denominator:e}")]
    SingularBasis { denominator: f64 },
}

/// Implicit surface `φ = 0` with `φ > 0` on the plus side.
pub trait LevelSet3: Send + Sync {
    fn value(&self, x: Vec3) -> f64;
    fn gradient(&self, x: Vec3) -> Vec3;
    /// Whether `φ` is affine, so that clipping against its linear
    /// interpolant is exact.
    fn is_affine(&self) -> bool {
        false
    }
}

/// `φ = (x - point)·normal` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane3 {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane3 {
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        Plane3 {
            point,
            normal: normal.normalize(),
        }
    }
}

impl LevelSet3 for Plane3 {
    fn value(&self, x: Vec3) -> f64 {
        (x - self.point).dot(&self.normal)
    }

    fn gradient(&self, _: Vec3) -> Vec3 {
        self.normal
    }

    fn is_affine(&self) -> bool {
        true
    }
}

/// `φ = |x - center|² - radius²`; the outside is the plus side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl LevelSet3 for Sphere {
    fn value(&self, x: Vec3) -> f64 {
        (x - self.center).norm_squared() - self.radius * self.radius
    }

    fn gradient(&self, x: Vec3) -> Vec3 {
        (x - self.center) * 2.0
    }
}

/// Number of tetrahedron edges cut by a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutType {
    /// One vertex separated from the other three.
    ThreeEdge,
    /// Two vertices separated from the other two.
    FourEdge,
}

pub fn diameter3(tet: &Tet) -> f64 {
    TET_EDGES
        .iter()
        .map(|&(i, j)| (tet[i] - tet[j]).norm())
        .fold(0.0, f64::max)
}

/// Classifies how a plane cuts a tetrahedron; `None` if it misses it.
pub fn classify_cut_type(tet: &Tet, plane: &Plane3) -> Result<Option<CutType>, Ife3dError> {
    let tol = 1e-12 * diameter3(tet);
    let vals = tet.map(|x| plane.value(x));
    if let Some(vertex) = vals.iter().position(|v| v.abs() <= tol) {
        return Err(Ife3dError::DegenerateCut { vertex });
    }
    let cuts = TET_EDGES
        .iter()
        .filter(|&&(i, j)| (vals[i] > 0.0) != (vals[j] > 0.0))
        .count();
    Ok(match cuts {
        3 => Some(CutType::ThreeEdge),
        4 => Some(CutType::FourEdge),
        _ => None,
    })
}

/// Orthonormal tangent frame: `t1` is the projection of the coordinate axis
/// least aligned with `n`, and `t2 = n × t1`.
pub fn tangent_frame(n: Vec3) -> (Vec3, Vec3) {
    let k = (0..3)
        .min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
        .expect("three axes");
    let axis = Vec3::ith(k, 1.0);
    let t1 = (axis - n * axis.dot(&n)).normalize();
    (t1, n.cross(&t1))
}

/// Tangent plane of the interface at an anchor point of a cut tetrahedron,
/// together with the true sides of the vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentPlaneCut {
    pub anchor: Vec3,
    pub normal: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    pub vertex_sides: [Side; 4],
}

impl TangentPlaneCut {
    /// Anchors the plane at the interface point on the first cut edge.
    pub fn from_level_set(tet: &Tet, ls: &dyn LevelSet3) -> Result<Self, Ife3dError> {
        let h = diameter3(tet);
        let vals = tet.map(|x| ls.value(x));
        for (vertex, (&v, x)) in vals.iter().zip(tet).enumerate() {
            if v.abs() <= 1e-12 * h * ls.gradient(*x).norm() {
                return Err(Ife3dError::DegenerateCut { vertex });
            }
        }
        let &(i, j) = TET_EDGES
            .iter()
            .find(|&&(i, j)| (vals[i] > 0.0) != (vals[j] > 0.0))
            .ok_or(Ife3dError::NotCut)?;
        let anchor = edge_root(ls, tet[i], tet[j]);
        let g = ls.gradient(anchor);
        if g.norm() == 0.0 {
            return Err(Ife3dError::ZeroGradient);
        }
        Ok(Self::with_sides(anchor, g, vals.map(Side::of_value)))
    }

    /// The plane itself is the interface.
    pub fn from_plane(tet: &Tet, plane: &Plane3) -> Result<Self, Ife3dError> {
        Self::from_level_set(tet, plane)
    }

    /// Cut with explicitly given vertex sides.
    pub fn with_sides(anchor: Vec3, normal: Vec3, vertex_sides: [Side; 4]) -> Self {
        let normal = normal.normalize();
        let (t1, t2) = tangent_frame(normal);
        TangentPlaneCut {
            anchor,
            normal,
            t1,
            t2,
            vertex_sides,
        }
    }

    pub fn plane(&self) -> Plane3 {
        Plane3 {
            point: self.anchor,
            normal: self.normal,
        }
    }

    /// Volumes `(|T⁺_h|, |T⁻_h|)` of the two sides of the tangent plane.
    pub fn plane_volumes(&self, tet: &Tet) -> (f64, f64) {
        true_volumes(tet, &self.plane(), 0)
    }
}

fn edge_root(ls: &dyn LevelSet3, a: Vec3, b: Vec3) -> Vec3 {
    let (mut lo, mut hi) = (0.0, 1.0);
    let fa = ls.value(a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (ls.value(a + (b - a) * mid) > 0.0) == (fa > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    a + (b - a) * (0.5 * (lo + hi))
}

/// `value + grad · (x - origin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine3 {
    pub value: f64,
    pub grad: Vec3,
    pub origin: Vec3,
}

impl Affine3 {
    pub fn eval(&self, x: Vec3) -> f64 {
        self.value + self.grad.dot(&(x - self.origin))
    }

    pub fn add_scaled(&self, s: f64, other: &Affine3) -> Affine3 {
        Affine3 {
            value: self.value + s * other.eval(self.origin),
            grad: self.grad + other.grad * s,
            origin: self.origin,
        }
    }
}

/// Affine pieces on the plus and minus sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseAffine3 {
    pub plus: Affine3,
    pub minus: Affine3,
}

impl PiecewiseAffine3 {
    pub fn piece(&self, side: Side) -> &Affine3 {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    pub fn eval(&self, x: Vec3, side: Side) -> f64 {
        self.piece(side).eval(x)
    }

    /// `φ⁺(x) - φ⁻(x)`.
    pub fn jump(&self, x: Vec3) -> f64 {
        self.plus.eval(x) - self.minus.eval(x)
    }

    /// `∇φ⁺ - ∇φ⁻`.
    pub fn grad_jump(&self) -> Vec3 {
        self.plus.grad - self.minus.grad
    }

    /// `β⁺∇φ⁺·n - β⁻∇φ⁻·n`.
    pub fn flux_jump(&self, n: Vec3, beta_plus: f64, beta_minus: f64) -> f64 {
        beta_plus * self.plus.grad.dot(&n) - beta_minus * self.minus.grad.dot(&n)
    }
}

/// Gradients of the barycentric coordinates.
pub fn barycentric_gradients3(tet: &Tet) -> [Vec3; 4] {
    let m = Matrix3::from_columns(&[tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]]);
    let inv = m.try_inverse().expect("non-degenerate tetrahedron");
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    [-(g1 + g2 + g3), g1, g2, g3]
}

/// Linear nodal hats with origin at the first vertex.
pub fn p1_basis3(tet: &Tet) -> [Affine3; 4] {
    let g = barycentric_gradients3(tet);
    std::array::from_fn(|i| Affine3 {
        value: if i == 0 { 1.0 } else { 0.0 },
        grad: g[i],
        origin: tet[0],
    })
}

/// Largest interior angle over the four faces.
pub fn max_face_angle(tet: &Tet) -> f64 {
    let angle = |a: Vec3, b: Vec3, c: Vec3| (b - a).angle(&(c - a));
    let mut best = 0.0_f64;
    for skip in 0..4 {
        let f: Vec<Vec3> = (0..4).filter(|&k| k != skip).map(|k| tet[k]).collect();
        best = best
            .max(angle(f[0], f[1], f[2]))
            .max(angle(f[1], f[2], f[0]))
            .max(angle(f[2], f[0], f[1]));
    }
    best
}

/// Largest dihedral angle over the six edges.
pub fn max_dihedral_angle(tet: &Tet) -> f64 {
    let mut best = 0.0_f64;
    for &(i, j) in &TET_EDGES {
        let others: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
        let e = (tet[j] - tet[i]).normalize();
        let perp = |x: Vec3| {
            let d = x - tet[i];
            d - e * d.dot(&e)
        };
        best = best.max(perp(tet[others[0]]).angle(&perp(tet[others[1]])));
    }
    best
}

/// Whether all face and dihedral angles are at most a right angle, which
/// guarantees a non-singular basis.
pub fn satisfies_angle_conditions(tet: &Tet) -> bool {
    let tol = 1e-12;
    max_face_angle(tet) <= FRAC_PI_2 + tol && max_dihedral_angle(tet) <= FRAC_PI_2 + tol
}

/// The four IFE shape functions of a cut tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct IfeBasis3 {
    pub tet: Tet,
    pub cut: TangentPlaneCut,
    pub functions: [PiecewiseAffine3; 4],
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// `∇Iw·n_h`.
    pub grad_iw_dot_n: f64,
    /// `1 + (β⁻/β⁺ - 1) ∇Iw·n_h`.
    pub denominator: f64,
    /// Set when the angle conditions fail; the basis is still built.
    pub angle_condition_violated: bool,
}

pub fn build_ife_basis_3d(
    tet: &Tet,
    cut: &TangentPlaneCut,
    beta_plus: f64,
    beta_minus: f64,
) -> Result<IfeBasis3, Ife3dError> {
    let hats = p1_basis3(tet);
    let w_plus = Affine3 {
        value: (tet[0] - cut.anchor).dot(&cut.normal),
        grad: cut.normal,
        origin: tet[0],
    };
    let w_nodal: [f64; 4] = std::array::from_fn(|i| match cut.vertex_sides[i] {
        Side::Plus => w_plus.eval(tet[i]),
        Side::Minus => 0.0,
    });
    let iw = interpolant(&hats, &w_nodal);
    let grad_iw_dot_n = iw.grad.dot(&cut.normal);
    let r = beta_minus / beta_plus - 1.0;
    let denominator = 1.0 + r * grad_iw_dot_n;
    if denominator.abs() < 1e-12 {
        return Err(Ife3dError::SingularBasis { denominator });
    }
    let functions = hats.map(|hat| {
        let c = r * hat.grad.dot(&cut.normal) / denominator;
        PiecewiseAffine3 {
            plus: hat.add_scaled(c, &w_plus).add_scaled(-c, &iw),
            minus: hat.add_scaled(-c, &iw),
        }
    });
    Ok(IfeBasis3 {
        tet: *tet,
        cut: *cut,
        functions,
        beta_plus,
        beta_minus,
        grad_iw_dot_n,
        denominator,
        angle_condition_violated: !satisfies_angle_conditions(tet),
    })
}

fn interpolant(hats: &[Affine3; 4], nodal: &[f64; 4]) -> Affine3 {
    let mut out = Affine3 {
        value: 0.0,
        grad: Vec3::zeros(),
        origin: hats[0].origin,
    };
    for (hat, &v) in hats.iter().zip(nodal) {
        out = out.add_scaled(v, hat);
    }
    out
}

impl IfeBasis3 {
    /// IFE interpolant of nodal values.
    pub fn combine(&self, nodal: &[f64; 4]) -> PiecewiseAffine3 {
        let zero = Affine3 {
            value: 0.0,
            grad: Vec3::zeros(),
            origin: self.tet[0],
        };
        let mut out = PiecewiseAffine3 {
            plus: zero,
            minus: zero,
        };
        for (f, &v) in self.functions.iter().zip(nodal) {
            out.plus = out.plus.add_scaled(v, &f.plus);
            out.minus = out.minus.add_scaled(v, &f.minus);
        }
        out
    }

    /// `z - I^IFE z` for `z` equal to `z_plus` on the plus side and zero on
    /// the minus side.
    fn one_sided_correction(&self, z_plus: Affine3) -> PiecewiseAffine3 {
        let nodal: [f64; 4] = std::array::from_fn(|i| match self.cut.vertex_sides[i] {
            Side::Plus => z_plus.eval(self.tet[i]),
            Side::Minus => 0.0,
        });
        let iz = self.combine(&nodal);
        let zero = Affine3 {
            value: 0.0,
            grad: Vec3::zeros(),
            origin: self.tet[0],
        };
        PiecewiseAffine3 {
            plus: z_plus.add_scaled(-1.0, &iz.plus),
            minus: zero.add_scaled(-1.0, &iz.minus),
        }
    }
}

/// Auxiliary functions vanishing at the vertices with unit jump signatures:
/// `Ψ` carries `[·](x*) = 1`, `Υ` carries `[β∇·n_h] = 1` and `Θ_i` carries
/// `[∇·t_i] = 1`, all other jumps being zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Auxiliary3 {
    pub psi: PiecewiseAffine3,
    pub upsilon: PiecewiseAffine3,
    pub theta: [PiecewiseAffine3; 2],
}

pub fn build_auxiliary_3d(
    tet: &Tet,
    cut: &TangentPlaneCut,
    beta_plus: f64,
    beta_minus: f64,
) -> Result<Auxiliary3, Ife3dError> {
    Ok(auxiliary_from_basis_3d(&build_ife_basis_3d(
        tet, cut, beta_plus, beta_minus,
    )?))
}

pub fn auxiliary_from_basis_3d(basis: &IfeBasis3) -> Auxiliary3 {
    let cut = &basis.cut;
    let coord = |dir: Vec3, scale: f64| Affine3 {
        value: 0.0,
        grad: dir * scale,
        origin: cut.anchor,
    };
    Auxiliary3 {
        psi: basis.one_sided_correction(Affine3 {
            value: 1.0,
            grad: Vec3::zeros(),
            origin: cut.anchor,
        }),
        upsilon: basis.one_sided_correction(coord(cut.normal, 1.0 / basis.beta_plus)),
        theta: [
            basis.one_sided_correction(coord(cut.t1, 1.0)),
            basis.one_sided_correction(coord(cut.t2, 1.0)),
        ],
    }
}

/// Splits a tetrahedron along the zero set of the linear interpolant of the
/// vertex values `vals` into side-tagged sub-tetrahedra.
pub fn clip_linear(tet: &Tet, vals: &[f64; 4]) -> Vec<(Tet, Side)> {
    let sides = vals.map(Side::of_value);
    let plus: Vec<usize> = (0..4).filter(|&i| sides[i] == Side::Plus).collect();
    let minus: Vec<usize> = (0..4).filter(|&i| sides[i] == Side::Minus).collect();
    if plus.is_empty() || minus.is_empty() {
        return vec![(*tet, sides[0])];
    }
    let p = |i: usize, j: usize| tet[i] + (tet[j] - tet[i]) * (vals[i] / (vals[i] - vals[j]));
    let prism = |top: [Vec3; 3], bottom: [Vec3; 3], side: Side| {
        [
            ([top[0], top[1], top[2], bottom[0]], side),
            ([top[1], top[2], bottom[0], bottom[1]], side),
            ([top[2], bottom[0], bottom[1], bottom[2]], side),
        ]
    };
    let (lone, rest) = match (plus.len(), minus.len()) {
        (1, 3) => (Some((plus[0], Side::Plus)), minus.clone()),
        (3, 1) => (Some((minus[0], Side::Minus)), plus.clone()),
        _ => (None, Vec::new()),
    };
    if let Some((a, side)) = lone {
        let cut = [p(a, rest[0]), p(a, rest[1]), p(a, rest[2])];
        let mut out = vec![([tet[a], cut[0], cut[1], cut[2]], side)];
        out.extend(prism(
            cut,
            [tet[rest[0]], tet[rest[1]], tet[rest[2]]],
            side.opposite(),
        ));
        return out;
    }
    let (a, b, c, d) = (plus[0], plus[1], minus[0], minus[1]);
    let mut out = Vec::with_capacity(6);
    out.extend(prism(
        [tet[a], p(a, c), p(a, d)],
        [tet[b], p(b, c), p(b, d)],
        Side::Plus,
    ));
    out.extend(prism(
        [tet[c], p(a, c), p(b, c)],
        [tet[d], p(a, d), p(b, d)],
        Side::Minus,
    ));
    out
}

/// Regular subdivision of a tetrahedron into eight children.
pub fn subdivide(tet: &Tet) -> [Tet; 8] {
    let m = |i: usize, j: usize| (tet[i] + tet[j]) * 0.5;
    let (m01, m02, m03, m12, m13, m23) = (m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3));
    [
        [tet[0], m01, m02, m03],
        [m01, tet[1], m12, m13],
        [m02, m12, tet[2], m23],
        [m03, m13, m23, tet[3]],
        [m02, m13, m01, m12],
        [m02, m13, m12, m23],
        [m02, m13, m23, m03],
        [m02, m13, m03, m01],
    ]
}

/// Visits side-tagged quadrature points `(x, weight, side)` covering the
/// tetrahedron, exact for quadratics on each true side up to the resolution
/// of the interface. Leaves far from the interface are kept whole; the rest
/// are refined `depth` times and clipped against the linear interpolant of
/// the level set.
pub fn visit_sides(
    tet: &Tet,
    ls: &dyn LevelSet3,
    depth: usize,
    f: &mut dyn FnMut(Vec3, f64, Side),
) {
    let vals = tet.map(|x| ls.value(x));
    let centroid = (tet[0] + tet[1] + tet[2] + tet[3]) * 0.25;
    let far = ls.value(centroid).abs() > ls.gradient(centroid).norm() * diameter3(tet);
    if ls.is_affine() || depth == 0 || far {
        for (piece, side) in clip_linear(tet, &vals) {
            for (x, w) in tet_degree2(&piece) {
                f(x, w, side);
            }
        }
        return;
    }
    for child in subdivide(tet) {
        visit_sides(&child, ls, depth - 1, f);
    }
}

/// `(|T⁺|, |T⁻|)` with respect to the level set.
pub fn true_volumes(tet: &Tet, ls: &dyn LevelSet3, depth: usize) -> (f64, f64) {
    let (mut plus, mut minus) = (0.0, 0.0);
    visit_sides(tet, ls, depth, &mut |_, w, side| match side {
        Side::Plus => plus += w,
        Side::Minus => minus += w,
    });
    (plus, minus)
}

/// `(|T⁺|, |T⁻|)` to about relative `1e-6` for smooth interfaces: the
/// subdivision error decays geometrically in the depth, so three depths are
/// combined by Aitken extrapolation.
pub fn true_volumes_extrapolated(tet: &Tet, ls: &dyn LevelSet3) -> (f64, f64) {
    let total = tet_volume(tet);
    let minus: Vec<f64> = (DEFAULT_DEPTH..DEFAULT_DEPTH + 3)
        .map(|d| true_volumes(tet, ls, d).1)
        .collect();
    let (d1, d2) = (minus[1] - minus[0], minus[2] - minus[1]);
    let m = if (d1 - d2).abs() > f64::EPSILON * total {
        minus[2] - d2 * d2 / (d2 - d1)
    } else {
        minus[2]
    };
    (total - m, m)
}

/// `(‖v‖², |v|²_{H¹})` over `T⁺ ∪ T⁻`.
pub fn norms_squared(
    tet: &Tet,
    ls: &dyn LevelSet3,
    depth: usize,
    v: &PiecewiseAffine3,
) -> (f64, f64) {
    let (mut l2, mut h1) = (0.0, 0.0);
    visit_sides(tet, ls, depth, &mut |x, w, side| {
        let p = v.piece(side);
        l2 += w * p.eval(x).powi(2);
        h1 += w * p.grad.norm_squared();
    });
    (l2, h1)
}

/// The right-corner reference tetrahedron.
pub fn reference_tet() -> Tet {
    [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
}

/// A regular tetrahedron with unit circumradius-scaled vertices.
pub fn regular_tet() -> Tet {
    [
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ]
}

/// Volume of a tetrahedron.
pub fn volume(tet: &Tet) -> f64 {
    tet_volume(tet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_cut(tet: &Tet, point: Vec3, normal: Vec3) -> TangentPlaneCut {
        TangentPlaneCut::from_plane(tet, &Plane3::new(point, normal)).unwrap()
    }

    #[test]
    fn cut_types() {
        let t = reference_tet();
        let one = Plane3::new(Vec3::new(0.1, 0.1, 0.1), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(classify_cut_type(&t, &one), Ok(Some(CutType::ThreeEdge)));
        let two = Plane3::new(Vec3::new(0.6, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(classify_cut_type(&t, &two), Ok(Some(CutType::FourEdge)));
        let outside = Plane3::new(Vec3::new(5.0, 0.0, 0.0), Vec3::x());
        assert_eq!(classify_cut_type(&t, &outside), Ok(None));
        let through = Plane3::new(Vec3::zeros(), Vec3::new(1.0, -1.0, 0.0));
        assert_eq!(
            classify_cut_type(&t, &through),
            Err(Ife3dError::DegenerateCut { vertex: 0 })
        );
    }

    #[test]
    fn frame_is_orthonormal() {
        for n in [
            Vec3::x(),
            Vec3::new(1.0, 2.0, -3.0).normalize(),
            Vec3::new(0.0, 1.0, 1.0).normalize(),
        ] {
            let (t1, t2) = tangent_frame(n);
            for (a, b) in [(n, t1), (n, t2), (t1, t2)] {
                assert!(a.dot(&b).abs() < 1e-14);
            }
            for v in [t1, t2] {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn equal_coefficients_give_hats() {
        let t = regular_tet();
        let cut = plane_cut(&t, Vec3::new(0.1, 0.0, 0.2), Vec3::new(1.0, 0.3, 0.2));
        let b = build_ife_basis_3d(&t, &cut, 4.0, 4.0).unwrap();
        for (f, hat) in b.functions.iter().zip(p1_basis3(&t)) {
            assert!(
                (f.plus.grad - hat.grad).norm() < 1e-14 && (f.minus.grad - hat.grad).norm() < 1e-14
            );
        }
    }

    #[test]
    fn basis_is_nodal_and_satisfies_interface_conditions() {
        let t = reference_tet();
        let cut = plane_cut(&t, Vec3::new(0.2, 0.3, 0.1), Vec3::new(0.4, 1.0, -0.3));
        let (bp, bm) = (1000.0, 1.0);
        let b = build_ife_basis_3d(&t, &cut, bp, bm).unwrap();
        assert!(!b.angle_condition_violated);
        for (i, f) in b.functions.iter().enumerate() {
            for (j, &x) in t.iter().enumerate() {
                let v = f.eval(x, cut.vertex_sides[j]);
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
            assert!(f.jump(cut.anchor).abs() < 1e-12);
            assert!(
                f.grad_jump().dot(&cut.t1).abs() < 1e-12
                    && f.grad_jump().dot(&cut.t2).abs() < 1e-12
            );
            assert!(f.flux_jump(cut.normal, bp, bm).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_does_not_depend_on_tangent_frame() {
        let t = regular_tet();
        let cut = plane_cut(&t, Vec3::new(-0.1, 0.2, 0.0), Vec3::new(0.3, -1.0, 0.5));
        let mut rotated = cut;
        let (c, s) = (0.6_f64, 0.8_f64);
        rotated.t1 = cut.t1 * c + cut.t2 * s;
        rotated.t2 = cut.normal.cross(&rotated.t1);
        let a = build_ife_basis_3d(&t, &cut, 1.0, 50.0).unwrap();
        let b = build_ife_basis_3d(&t, &rotated, 1.0, 50.0).unwrap();
        assert_eq!(a.functions, b.functions);
        let aa = auxiliary_from_basis_3d(&a);
        let ab = auxiliary_from_basis_3d(&b);
        // Θ rotates with the frame while Ψ and Υ are frame-free.
        assert!((aa.psi.plus.grad - ab.psi.plus.grad).norm() < 1e-12);
        assert!(
            (aa.theta[0].plus.grad * c + aa.theta[1].plus.grad * s - ab.theta[0].plus.grad).norm()
                < 1e-12
        );
    }

    #[test]
    fn auxiliary_jump_signatures() {
        let t = reference_tet();
        let cut = plane_cut(&t, Vec3::new(0.3, 0.2, 0.2), Vec3::new(1.0, 0.2, 0.7));
        let (bp, bm) = (3.0, 700.0);
        let aux = build_auxiliary_3d(&t, &cut, bp, bm).unwrap();
        let funcs = [aux.psi, aux.upsilon, aux.theta[0], aux.theta[1]];
        let expected = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for (f, e) in funcs.iter().zip(expected) {
            let sig = [
                f.jump(cut.anchor),
                f.flux_jump(cut.normal, bp, bm),
                f.grad_jump().dot(&cut.t1),
                f.grad_jump().dot(&cut.t2),
            ];
            for k in 0..4 {
                assert!((sig[k] - e[k]).abs() < 1e-11, "{sig:?}");
            }
            for (j, &x) in t.iter().enumerate() {
                assert!(f.eval(x, cut.vertex_sides[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clipping_preserves_volume() {
        let t = regular_tet();
        for vals in [
            [1.0, -2.0, -0.5, -1.0],
            [0.3, 0.2, -1.0, -0.1],
            [-1.0, 2.0, 3.0, 0.5],
        ] {
            let pieces = clip_linear(&t, &vals);
            let total: f64 = pieces.iter().map(|(p, _)| tet_volume(p)).sum();
            assert!((total - tet_volume(&t)).abs() < 1e-13);
        }
        let kids: f64 = subdivide(&t).iter().map(tet_volume).sum();
        assert!((kids - tet_volume(&t)).abs() < 1e-13);
    }

    #[test]
    fn one_vertex_cap_volume() {
        // The corner x + y + z < s of the reference tetrahedron has volume s³/6.
        let s = 0.4;
        let t = reference_tet();
        let plane = Plane3::new(Vec3::new(s, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        let (plus, minus) = true_volumes(&t, &plane, 0);
        assert!((minus - s.powi(3) / 6.0).abs() < 1e-15);
        assert!((plus + minus - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn curved_volumes_converge() {
        // Octant of a ball of radius 0.5 centred at the right corner.
        let t = reference_tet();
        let ball = Sphere {
            center: Vec3::zeros(),
            radius: 0.5,
        };
        let exact = std::f64::consts::PI * 0.5_f64.powi(3) / 6.0;
        let (_, minus) = true_volumes(&t, &ball, DEFAULT_DEPTH);
        assert!(((minus - exact) / exact).abs() < 1e-3);
        let (plus, accurate) = true_volumes_extrapolated(&t, &ball);
        assert!(((accurate - exact) / exact).abs() < 1e-6);
        assert!((plus + accurate - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn anchor_lies_on_first_cut_edge() {
        let t = reference_tet();
        let ball = Sphere {
            center: Vec3::zeros(),
            radius: 0.5,
        };
        let cut = TangentPlaneCut::from_level_set(&t, &ball).unwrap();
        assert!((cut.anchor - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-14);
        assert!((cut.normal - Vec3::x()).norm() < 1e-14);
        assert_eq!(
            cut.vertex_sides,
            [Side::Minus, Side::Plus, Side::Plus, Side::Plus]
        );
    }

    #[test]
    fn angle_conditions_of_reference_shapes() {
        assert!(satisfies_angle_conditions(&reference_tet()));
        assert!(satisfies_angle_conditions(&regular_tet()));
        let flat = [
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
            Vec3::new(1.0, 1.0, 0.1),
        ];
        assert!(!satisfies_angle_conditions(&flat));
    }
}
