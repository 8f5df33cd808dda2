//! Linear immersed finite element space.
//!
//! On a cut triangle the local shape functions are piecewise affine: they are
//! continuous across the chord `DE`, satisfy the flux condition
//! `β⁺ ∇φ⁺·n_h = β⁻ ∇φ⁻·n_h` and take nodal values on the side of each
//! vertex. They are built in closed form as
//!
//! ```text
//! φ = Iφ + c (w - I w),   c = (β⁻/β⁺ - 1) ∇Iφ·n_h / (1 + (β⁻/β⁺ - 1) ∇I w·n_h)
//! ```
//!
//! where `I` is the linear nodal interpolant on the triangle and `w` is the
//! signed distance to `DE` on the plus piece and zero on the minus piece.

use thiserror::Error;

use crate::coefficient::Coefficient;
use crate::geometry::{cut_cells, diameter, CutSegment, LevelSetGeometry, Side, Vec2};
use crate::mesh::{classify_mesh, ElementKind, MeshClassification, MeshError, TriMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IfeError {
    #[error("IFE basis is singular: flux denominator {denominator:e}")]
    SingularBasis { denominator: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: Box<IfeError>,
    },
}

/// `value + grad · (x - origin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub value: f64,
    pub grad: Vec2,
    pub origin: Vec2,
}

impl Affine {
    pub fn zero(origin: Vec2) -> Self {
        Affine {
            value: 0.0,
            grad: Vec2::zeros(),
            origin,
        }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        self.value + self.grad.dot(&(x - self.origin))
    }

    /// `self + s * other`, expressed about `self.origin`.
    pub fn add_scaled(&self, s: f64, other: &Affine) -> Affine {
        Affine {
            value: self.value + s * other.eval(self.origin),
            grad: self.grad + other.grad * s,
            origin: self.origin,
        }
    }

    pub fn scaled(&self, s: f64) -> Affine {
        Affine {
            value: self.value * s,
            grad: self.grad * s,
            origin: self.origin,
        }
    }
}

/// A function that is affine on each side of a cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseAffine {
    pub plus: Affine,
    pub minus: Affine,
}

impl PiecewiseAffine {
    pub fn uniform(f: Affine) -> Self {
        PiecewiseAffine { plus: f, minus: f }
    }

    pub fn piece(&self, side: Side) -> &Affine {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    pub fn eval(&self, x: Vec2, side: Side) -> f64 {
        self.piece(side).eval(x)
    }

    pub fn grad(&self, side: Side) -> Vec2 {
        self.piece(side).grad
    }

    pub fn add_scaled(&self, s: f64, other: &PiecewiseAffine) -> PiecewiseAffine {
        PiecewiseAffine {
            plus: self.plus.add_scaled(s, &other.plus),
            minus: self.minus.add_scaled(s, &other.minus),
        }
    }
}

/// Barycentric coordinates of `x` in `tri`.
pub fn barycentric(tri: &[Vec2; 3], x: Vec2) -> [f64; 3] {
    let g = barycentric_gradients(tri);
    let l1 = g[1].dot(&(x - tri[0]));
    let l2 = g[2].dot(&(x - tri[0]));
    [1.0 - l1 - l2, l1, l2]
}

/// Gradients of the three barycentric coordinate functions.
pub fn barycentric_gradients(tri: &[Vec2; 3]) -> [Vec2; 3] {
    let a2 = crate::quadrature::signed_area2(tri);
    let mut g = [Vec2::zeros(); 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let (p, q) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        *gi = Vec2::new(p.y - q.y, q.x - p.x) / a2;
    }
    g
}

/// Standard linear nodal basis of `tri`, expressed about its first vertex.
pub fn p1_basis(tri: &[Vec2; 3]) -> [Affine; 3] {
    let g = barycentric_gradients(tri);
    [0, 1, 2].map(|i| Affine {
        value: if i == 0 { 1.0 } else { 0.0 },
        grad: g[i],
        origin: tri[0],
    })
}

/// Local IFE basis on one cut triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct IfeBasis {
    pub tri: [Vec2; 3],
    pub cut: CutSegment,
    pub functions: [PiecewiseAffine; 3],
    /// Side on which each nodal value is taken; vertices on the chord
    /// line are reported as plus.
    pub nodal_sides: [Side; 3],
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// `∇I w · n_h`, which lies in `[0, 1]` when the largest angle is at most
    /// a right angle.
    pub grad_iw_dot_n: f64,
    /// `1 + (β⁻/β⁺ - 1) ∇I w · n_h`.
    pub denominator: f64,
}

/// Sides of the vertices of `tri` relative to the chord, with a relative
/// tolerance of `1e-12` of the diameter. The boolean marks vertices on the
/// chord line.
pub fn vertex_sides(tri: &[Vec2; 3], cut: &CutSegment) -> [(Side, bool); 3] {
    let tol = 1e-12 * diameter(tri);
    tri.map(|x| {
        let s = cut.signed_distance(x);
        if s.abs() <= tol {
            (Side::Plus, true)
        } else {
            (Side::of_value(s), false)
        }
    })
}

/// Builds the local IFE basis for constant coefficients on each side (or the
/// per-element averages of variable ones).
pub fn build_ife_basis(
    tri: &[Vec2; 3],
    cut: &CutSegment,
    beta_plus: f64,
    beta_minus: f64,
) -> Result<IfeBasis, IfeError> {
    let lambda = p1_basis(tri);
    let n = cut.normal;
    let sides = vertex_sides(tri, cut);
    // Nodal values of w: the distance to the chord for plus vertices.
    let w_nodal = [0, 1, 2].map(|i| match sides[i] {
        (Side::Plus, false) => cut.signed_distance(tri[i]),
        _ => 0.0,
    });
    let mut iw = Affine::zero(tri[0]);
    for i in 0..3 {
        iw = iw.add_scaled(w_nodal[i], &lambda[i]);
    }
    let w_plus = Affine {
        value: 0.0,
        grad: n,
        origin: cut.d,
    };
    let grad_iw_dot_n = iw.grad.dot(&n);
    let r = beta_minus / beta_plus - 1.0;
    let denominator = 1.0 + r * grad_iw_dot_n;
    if denominator.abs() < 1e-12 || !denominator.is_finite() {
        return Err(IfeError::SingularBasis { denominator });
    }
    let functions = lambda.map(|l| {
        let c = r * l.grad.dot(&n) / denominator;
        PiecewiseAffine {
            plus: l.add_scaled(c, &w_plus).add_scaled(-c, &iw),
            minus: l.add_scaled(-c, &iw),
        }
    });
    Ok(IfeBasis {
        tri: *tri,
        cut: *cut,
        functions,
        nodal_sides: sides.map(|s| s.0),
        beta_plus,
        beta_minus,
        grad_iw_dot_n,
        denominator,
    })
}

impl IfeBasis {
    /// Value and gradient of basis function `i` at `x` on `side`.
    pub fn eval(&self, i: usize, x: Vec2, side: Side) -> (f64, Vec2) {
        let f = self.functions[i].piece(side);
        (f.eval(x), f.grad)
    }
}

/// Auxiliary functions measuring the gap between the IFE interpolant and a
/// two-sided affine pair.
///
/// Each is `z - I z` for a function `z` that vanishes on the minus piece, with
/// `I` the local IFE interpolant. `upsilon` carries a unit flux jump,
/// `psi_d` and `psi_e` unit value jumps at `D` and `E`.
#[cfg(feature = "verification")]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryTriple {
    pub upsilon: PiecewiseAffine,
    pub psi_d: PiecewiseAffine,
    pub psi_e: PiecewiseAffine,
}

#[cfg(feature = "verification")]
pub fn build_auxiliary(
    tri: &[Vec2; 3],
    cut: &CutSegment,
    beta_plus: f64,
    beta_minus: f64,
) -> Result<AuxiliaryTriple, IfeError> {
    let basis = build_ife_basis(tri, cut, beta_plus, beta_minus)?;
    Ok(auxiliary_from_basis(&basis))
}

#[cfg(feature = "verification")]
pub fn auxiliary_from_basis(basis: &IfeBasis) -> AuxiliaryTriple {
    let cut = &basis.cut;
    let one_sided = |v: Affine| {
        let mut f = PiecewiseAffine {
            plus: v,
            minus: Affine::zero(v.origin),
        };
        for i in 0..3 {
            if basis.nodal_sides[i] == Side::Plus {
                f = f.add_scaled(-v.eval(basis.tri[i]), &basis.functions[i]);
            }
        }
        f
    };
    let upsilon = one_sided(Affine {
        value: 0.0,
        grad: cut.normal / basis.beta_plus,
        origin: cut.d,
    });
    let t = cut.tangent;
    let psi_d = one_sided(Affine {
        value: 0.0,
        grad: t / (cut.d - cut.e).dot(&t),
        origin: cut.e,
    });
    let psi_e = one_sided(Affine {
        value: 0.0,
        grad: t / (cut.e - cut.d).dot(&t),
        origin: cut.d,
    });
    AuxiliaryTriple {
        upsilon,
        psi_d,
        psi_e,
    }
}

/// Local shape functions and integration cells of one element.
#[derive(Debug, Clone)]
pub struct LocalSpace {
    pub kind: ElementKind,
    pub shape: [PiecewiseAffine; 3],
    /// Side-tagged sub-triangles covering the element.
    pub cells: Vec<([Vec2; 3], Side)>,
    pub basis: Option<IfeBasis>,
}

/// The global IFE space on a mesh: one nodal degree of freedom per vertex.
#[derive(Debug, Clone)]
pub struct IfeSpace {
    pub mesh: TriMesh,
    pub geometry: LevelSetGeometry,
    pub classification: MeshClassification,
    pub coefficient: Coefficient,
    pub elements: Vec<LocalSpace>,
}

impl IfeSpace {
    pub fn new(
        mesh: TriMesh,
        geometry: LevelSetGeometry,
        coefficient: Coefficient,
    ) -> Result<Self, IfeError> {
        let classification = classify_mesh(&mesh, &geometry)?;
        let mut elements = Vec::with_capacity(mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            let tri = mesh.triangle(t);
            let kind = classification.kinds[t];
            let local = match (kind.side(), classification.cuts[t]) {
                (Some(side), _) => LocalSpace {
                    kind,
                    shape: p1_basis(&tri).map(PiecewiseAffine::uniform),
                    cells: vec![(tri, side)],
                    basis: None,
                },
                (None, Some(cut)) => {
                    let (bp, bm) = coefficient.averages(&cut);
                    let basis =
                        build_ife_basis(&tri, &cut, bp, bm).map_err(|e| IfeError::Element {
                            element: t,
                            source: Box::new(e),
                        })?;
                    LocalSpace {
                        kind,
                        shape: basis.functions,
                        cells: cut_cells(&tri, &cut),
                        basis: Some(basis),
                    }
                }
                (None, None) => unreachable!("interface element without a cut"),
            };
            elements.push(local);
        }
        Ok(IfeSpace {
            mesh,
            geometry,
            classification,
            coefficient,
            elements,
        })
    }

    pub fn ndofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Discrete side of `x` within element `t`.
    pub fn side_in(&self, t: usize, x: Vec2) -> Side {
        match (self.elements[t].kind.side(), self.classification.cuts[t]) {
            (Some(s), _) => s,
            (None, Some(cut)) => cut.side(x),
            (None, None) => unreachable!(),
        }
    }

    /// Discrete coefficient `β_h` at `x` on `side`.
    pub fn beta(&self, x: Vec2, side: Side) -> f64 {
        self.coefficient.value(x, side)
    }

    /// Value and gradient of the finite element function with nodal
    /// coefficients `u` at `x` in element `t`.
    pub fn eval(&self, t: usize, u: &[f64], x: Vec2, side: Side) -> (f64, Vec2) {
        let tri = &self.mesh.triangles[t];
        let mut val = 0.0;
        let mut grad = Vec2::zeros();
        for (k, &v) in tri.iter().enumerate() {
            let f = self.elements[t].shape[k].piece(side);
            val += u[v] * f.eval(x);
            grad += f.grad * u[v];
        }
        (val, grad)
    }

    /// Nodal coefficients of the IFE interpolant of a two-sided function,
    /// evaluated on the side of each vertex.
    pub fn interpolate(&self, f: impl Fn(Vec2, Side) -> f64) -> Vec<f64> {
        self.mesh
            .vertices
            .iter()
            .zip(&self.classification.vertex_signs)
            .map(|(&x, s)| f(x, s.side()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cut_segment, Rect};
    use std::sync::Arc;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn sample_basis(bp: f64, bm: f64) -> IfeBasis {
        let tri = [v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)];
        let cut = CutSegment::new(v(0.3, 0.0), v(0.0, 0.6), v(1.0, 0.0));
        build_ife_basis(&tri, &cut, bp, bm).unwrap()
    }

    #[test]
    fn kronecker_property() {
        let b = sample_basis(10.0, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let val = b.functions[i].eval(b.tri[j], b.nodal_sides[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((val - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn continuity_and_flux_across_chord() {
        let b = sample_basis(1.0, 1e4);
        for f in &b.functions {
            for p in [b.cut.d, b.cut.e] {
                assert!((f.plus.eval(p) - f.minus.eval(p)).abs() < 1e-12);
            }
            let flux = b.beta_plus * f.plus.grad.dot(&b.cut.normal)
                - b.beta_minus * f.minus.grad.dot(&b.cut.normal);
            assert!(flux.abs() < 1e-9);
        }
    }

    #[test]
    fn partition_of_unity() {
        let b = sample_basis(3.0, 0.5);
        let x = v(0.2, 0.3);
        for side in [Side::Plus, Side::Minus] {
            let s: f64 = b.functions.iter().map(|f| f.eval(x, side)).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn equal_coefficients_give_linear_basis() {
        let b = sample_basis(2.0, 2.0);
        let p1 = p1_basis(&b.tri);
        for i in 0..3 {
            assert_eq!(b.functions[i].plus.grad, p1[i].grad);
            assert_eq!(b.functions[i].minus.grad, p1[i].grad);
        }
    }

    #[test]
    fn counter_example_is_singular() {
        let s3 = 3f64.sqrt();
        let tri = [v(0.0, 0.0), v(-s3, 1.0), v(1.0, 0.0)];
        let d = v(0.0, 0.0);
        let e = v(-1.0 / (2.0 + s3), s3 / (2.0 + s3));
        let cut = CutSegment::new(d, e, tri[1]);
        match build_ife_basis(&tri, &cut, 1.0, 3.0) {
            Err(IfeError::SingularBasis { denominator }) => assert!(denominator.abs() < 1e-10),
            other => panic!("expected a singular basis, got {other:?}"),
        }
    }

    #[test]
    fn space_on_circle_builds_and_interpolates_linears_off_interface() {
        let g = LevelSetGeometry::named("circle").unwrap();
        let mesh = TriMesh::cartesian(Rect::square(-1.0, 1.0), 8);
        let space = IfeSpace::new(mesh, g, Coefficient::constant(10.0, 1.0)).unwrap();
        let u = space.interpolate(|x, _| 1.0 + x.x - 2.0 * x.y);
        for t in 0..space.mesh.num_triangles() {
            if space.elements[t].kind == ElementKind::Interface {
                continue;
            }
            let x = space.mesh.triangle(t).iter().sum::<Vec2>() / 3.0;
            let (val, grad) = space.eval(t, &u, x, space.side_in(t, x));
            assert!((val - (1.0 + x.x - 2.0 * x.y)).abs() < 1e-13);
            assert!((grad - v(1.0, -2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn straight_interface_reproduces_exact_two_sided_solution() {
        // u⁺ = x / β⁺ and u⁻ = x / β⁻ for the interface x = 0.1 shifted to
        // be continuous: the IFE space contains the exact solution.
        let (bp, bm) = (5.0, 1.0);
        let x0 = 0.1;
        let g = LevelSetGeometry::new(
            Arc::new(crate::geometry::Line {
                normal: v(1.0, 0.0),
                offset: x0,
            }),
            Rect::square(-1.0, 1.0),
        );
        let exact = move |x: Vec2, s: Side| match s {
            Side::Plus => (x.x - x0) / bp,
            Side::Minus => (x.x - x0) / bm,
        };
        let mesh = TriMesh::cartesian(Rect::square(-1.0, 1.0), 6);
        let space = IfeSpace::new(mesh, g.clone(), Coefficient::constant(bp, bm)).unwrap();
        let u = space.interpolate(exact);
        for t in 0..space.mesh.num_triangles() {
            for (cell, side) in &space.elements[t].cells {
                let x = cell.iter().sum::<Vec2>() / 3.0;
                let (val, _) = space.eval(t, &u, x, *side);
                assert!((val - exact(x, g.side(x))).abs() < 1e-13);
            }
        }
        let tri = [v(0.0, -0.2), v(0.3, -0.2), v(0.0, 0.1)];
        assert!(build_cut_segment(&g, &tri).is_ok());
    }
}
