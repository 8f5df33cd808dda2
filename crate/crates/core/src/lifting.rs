//! Local lifting of edge jumps on interface edges.
//!
//! For an interface edge `e` shared by `T1` and `T2`, the lifting of a jump
//! `φ` is the field `r_e(φ)` supported on `T1 ∪ T2` that, on each `T_i`, has
//! the form
//!
//! ```text
//! c_i t_i + β̄⁻ d_i n_i   on the plus piece,
//! c_i t_i + β̄⁺ d_i n_i   on the minus piece,
//! ```
//!
//! and satisfies `∫ β_h r_e(φ)·w = ∫_e {β_h w·n_e} φ` for every such field
//! `w`. With `t_i ⊥ n_i` the defining system is diagonal, so `c_i` and `d_i`
//! have closed forms.

use crate::coefficient::Coefficient;
use crate::geometry::{Side, Vec2};
use crate::ife_space::IfeSpace;
use crate::quadrature::{segment_gauss3, triangle_area, TriangleRule};

/// Part of an interface edge lying on one side of the discrete interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePiece {
    pub a: Vec2,
    pub b: Vec2,
    pub side: Side,
}

/// Per-element data entering the lifting of an edge jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftElement {
    pub element: usize,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub area_plus: f64,
    pub area_minus: f64,
    /// `(β̄⁺, β̄⁻)` of the element.
    pub beta_bar: (f64, f64),
    /// `∫_T β_h`.
    pub mass_t: f64,
    /// `(β̄⁻)² ∫_{T⁺} β_h + (β̄⁺)² ∫_{T⁻} β_h`.
    pub mass_n: f64,
}

impl LiftElement {
    /// Weight multiplying `d_i n_i` on the given piece.
    pub fn normal_weight(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.beta_bar.1,
            Side::Minus => self.beta_bar.0,
        }
    }
}

/// Geometry of one interface edge and its two neighbours.
#[derive(Clone)]
pub struct EdgeLift<'a> {
    pub space: &'a IfeSpace,
    pub edge: usize,
    /// Unit normal pointing from `elems[0]` to `elems[1]`.
    pub normal: Vec2,
    pub pieces: [EdgePiece; 2],
    pub elems: [LiftElement; 2],
}

/// Coefficients of a lifted field on the two neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftingField {
    pub c: [f64; 2],
    pub d: [f64; 2],
}

impl<'a> EdgeLift<'a> {
    /// Context for mesh edge `edge` with the standard orientation.
    pub fn new(space: &'a IfeSpace, edge: usize) -> Self {
        Self::oriented(space, edge, false)
    }

    /// Same as [`EdgeLift::new`] but with the neighbours swapped (and the edge
    /// normal reversed) when `swapped` is set.
    pub fn oriented(space: &'a IfeSpace, edge: usize, swapped: bool) -> Self {
        let mesh = &space.mesh;
        let (t1, t2) = mesh.edges[edge].tris;
        let t2 = t2.expect("interface edge must be interior");
        let p = space.classification.edge_points[edge].expect("edge must cross the interface");
        let (a, b) = mesh.edge_points(edge);
        let [va, vb] = mesh.edges[edge].vertices;
        let sa = space.classification.vertex_signs[va].side();
        let sb = space.classification.vertex_signs[vb].side();
        let pieces = [
            EdgePiece { a, b: p, side: sa },
            EdgePiece { a: p, b, side: sb },
        ];
        let mut normal = mesh.edge_normal(edge);
        let mut order = [t1, t2];
        if swapped {
            order.swap(0, 1);
            normal = -normal;
        }
        let elems = order.map(|t| lift_element(space, t));
        EdgeLift {
            space,
            edge,
            normal,
            pieces,
            elems,
        }
    }

    fn beta(&self, x: Vec2, side: Side) -> f64 {
        self.space.beta(x, side)
    }

    /// `(∫_{e⁺} β_h φ, ∫_{e⁻} β_h φ, ∫_e φ)`.
    fn edge_moments(&self, jump: &dyn Fn(Vec2, Side) -> f64) -> (f64, f64, f64) {
        let (mut plus, mut minus, mut plain) = (0.0, 0.0, 0.0);
        for piece in &self.pieces {
            for (x, w) in segment_gauss3(piece.a, piece.b) {
                let phi = jump(x, piece.side);
                let bphi = w * self.beta(x, piece.side) * phi;
                match piece.side {
                    Side::Plus => plus += bphi,
                    Side::Minus => minus += bphi,
                }
                plain += w * phi;
            }
        }
        (plus, minus, plain)
    }

    /// Closed form for coefficients constant on each side.
    pub fn lift_constant(&self, jump: impl Fn(Vec2, Side) -> f64) -> LiftingField {
        let (bp, bm) = match self.space.coefficient {
            Coefficient::Constant { plus, minus } => (plus, minus),
            Coefficient::Variable { .. } => {
                panic!("constant-coefficient lifting with a variable coefficient")
            }
        };
        let (ip, im, plain) = self.edge_moments(&jump);
        let weighted = ip + im;
        let mut c = [0.0; 2];
        let mut d = [0.0; 2];
        for (i, el) in self.elems.iter().enumerate() {
            c[i] = el.tangent.dot(&self.normal) * weighted
                / (2.0 * (bp * el.area_plus + bm * el.area_minus));
            d[i] = el.normal.dot(&self.normal) * plain
                / (2.0 * (bm * el.area_plus + bp * el.area_minus));
        }
        LiftingField { c, d }
    }

    /// General form using per-element averages `β̄±` and integrals of `β_h`.
    pub fn lift_variable(&self, jump: impl Fn(Vec2, Side) -> f64) -> LiftingField {
        let (ip, im, _) = self.edge_moments(&jump);
        let mut c = [0.0; 2];
        let mut d = [0.0; 2];
        for (i, el) in self.elems.iter().enumerate() {
            let (bbp, bbm) = el.beta_bar;
            c[i] = el.tangent.dot(&self.normal) * (ip + im) / (2.0 * el.mass_t);
            d[i] = el.normal.dot(&self.normal) * (bbm * ip + bbp * im) / (2.0 * el.mass_n);
        }
        LiftingField { c, d }
    }

    /// Lifts a jump using the formula matching the coefficient type. The
    /// jump is evaluated with the side of the edge piece containing the
    /// point.
    pub fn lift(&self, jump: impl Fn(Vec2, Side) -> f64) -> LiftingField {
        if self.space.coefficient.is_constant() {
            self.lift_constant(jump)
        } else {
            self.lift_variable(jump)
        }
    }

    /// Value of a lifted field on neighbour `i` at a point of the given side.
    pub fn field(&self, r: &LiftingField, i: usize, side: Side) -> Vec2 {
        let el = &self.elems[i];
        el.tangent * r.c[i] + el.normal * (el.normal_weight(side) * r.d[i])
    }

    /// `∫ β_h r·s` over `T1 ∪ T2`.
    pub fn weighted_inner(&self, r: &LiftingField, s: &LiftingField) -> f64 {
        (0..2)
            .map(|i| {
                self.elems[i].mass_t * r.c[i] * s.c[i] + self.elems[i].mass_n * r.d[i] * s.d[i]
            })
            .sum()
    }

    /// Unweighted `‖r‖²` over `T1 ∪ T2`.
    pub fn l2_norm_squared(&self, r: &LiftingField) -> f64 {
        (0..2)
            .map(|i| {
                let el = &self.elems[i];
                let (bbp, bbm) = el.beta_bar;
                r.c[i].powi(2) * (el.area_plus + el.area_minus)
                    + r.d[i].powi(2) * (bbm * bbm * el.area_plus + bbp * bbp * el.area_minus)
            })
            .sum()
    }
}

fn lift_element(space: &IfeSpace, t: usize) -> LiftElement {
    let local = &space.elements[t];
    let basis = local
        .basis
        .as_ref()
        .expect("neighbours of an interface edge are cut");
    let cut = basis.cut;
    let (bbp, bbm) = (basis.beta_plus, basis.beta_minus);
    let (mut area_plus, mut area_minus) = (0.0, 0.0);
    for (cell, side) in &local.cells {
        match side {
            Side::Plus => area_plus += triangle_area(cell),
            Side::Minus => area_minus += triangle_area(cell),
        }
    }
    let (int_plus, int_minus) = match space.coefficient {
        Coefficient::Constant { plus, minus } => (plus * area_plus, minus * area_minus),
        Coefficient::Variable { .. } => {
            let rule = TriangleRule::of_degree(4);
            let (mut ip, mut im) = (0.0, 0.0);
            for (cell, side) in &local.cells {
                let s: f64 = rule.map(cell).map(|(x, w)| w * space.beta(x, *side)).sum();
                match side {
                    Side::Plus => ip += s,
                    Side::Minus => im += s,
                }
            }
            (ip, im)
        }
    };
    LiftElement {
        element: t,
        normal: cut.normal,
        tangent: cut.tangent,
        area_plus,
        area_minus,
        beta_bar: (bbp, bbm),
        mass_t: int_plus + int_minus,
        mass_n: bbm * bbm * int_plus + bbp * bbp * int_minus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LevelSetGeometry, Rect};
    use crate::mesh::TriMesh;

    fn circle_space(n: usize, coef: Coefficient) -> IfeSpace {
        let g = LevelSetGeometry::named("circle").unwrap();
        IfeSpace::new(TriMesh::cartesian(Rect::square(-1.0, 1.0), n), g, coef).unwrap()
    }

    fn jump(x: Vec2, _: Side) -> f64 {
        1.0 + 3.0 * x.x - 2.0 * x.y
    }

    #[test]
    fn variable_formula_reduces_to_constant_formula() {
        let sc = circle_space(8, Coefficient::constant(7.0, 0.5));
        let sv = circle_space(8, Coefficient::variable(|_| 7.0, |_| 0.5));
        for &e in &sc.classification.interface_edges {
            let rc = EdgeLift::new(&sc, e).lift_constant(jump);
            let rv = EdgeLift::new(&sv, e).lift_variable(jump);
            for i in 0..2 {
                assert!((rc.c[i] - rv.c[i]).abs() <= 1e-13 * rc.c[i].abs().max(1.0));
                assert!((rc.d[i] - rv.d[i]).abs() <= 1e-13 * rc.d[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn lifting_is_independent_of_edge_orientation() {
        let s = circle_space(8, Coefficient::constant(1.0, 100.0));
        for &e in &s.classification.interface_edges {
            let fwd = EdgeLift::new(&s, e);
            let rev = EdgeLift::oriented(&s, e, true);
            let r1 = fwd.lift(jump);
            // Reversing the orientation flips the sign of the jump.
            let r2 = rev.lift(|x, s| -jump(x, s));
            for side in [Side::Plus, Side::Minus] {
                assert!((fwd.field(&r1, 0, side) - rev.field(&r2, 1, side)).norm() < 1e-12);
                assert!((fwd.field(&r1, 1, side) - rev.field(&r2, 0, side)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_jump_lifts_to_zero() {
        let s = circle_space(8, Coefficient::constant(2.0, 3.0));
        let e = s.classification.interface_edges[0];
        let r = EdgeLift::new(&s, e).lift(|_, _| 0.0);
        assert_eq!(
            r,
            LiftingField {
                c: [0.0; 2],
                d: [0.0; 2]
            }
        );
    }
}
