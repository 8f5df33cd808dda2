//! Assembly of the partially penalized IFE bilinear form and load vector.
//!
//! ```text
//! A_h(u, v) = Σ_T ∫_T β_h ∇u·∇v
//!           - Σ_e ∫_e ({β_h ∇u·n_e}[v] + {β_h ∇v·n_e}[u])
//!           + 4 Σ_e ∫ β_h r_e([u])·r_e([v])
//! ```
//!
//! with the edge sums over interface edges. The three parts are kept as
//! separate matrices so that norms and witnesses can use them individually.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Side, Vec2};
use crate::ife_space::IfeSpace;
use crate::lifting::{EdgeLift, LiftingField};
use crate::linalg::{solve_spd, CsrMatrix, SolveMethod, SolverError, SolverOptions};
use crate::quadrature::{segment_gauss3, triangle_area, TriangleRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Quadrature degree for the stiffness term when β varies.
    pub stiffness_degree: usize,
    /// Quadrature degree for the load vector.
    pub load_degree: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            stiffness_degree: 4,
            load_degree: 4,
        }
    }
}

/// The three parts of `A_h` over all nodal degrees of freedom.
#[derive(Debug, Clone)]
pub struct Forms {
    /// `Σ_T ∫ β_h ∇u·∇v`.
    pub volume: CsrMatrix,
    /// `-Σ_e ∫_e ({β_h ∇u·n_e}[v] + {β_h ∇v·n_e}[u])`.
    pub consistency: CsrMatrix,
    /// `4 Σ_e ∫ β_h r_e([u])·r_e([v])`.
    pub stabilization: CsrMatrix,
}

impl Forms {
    pub fn total(&self) -> CsrMatrix {
        CsrMatrix::sum(&[&self.volume, &self.consistency, &self.stabilization])
    }
}

type Triplets = Vec<(usize, usize, f64)>;

pub fn assemble_forms(space: &IfeSpace, opts: &AssemblyOptions) -> Forms {
    let n = space.ndofs();
    let volume: Vec<Triplets> = (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| element_stiffness(space, t, opts.stiffness_degree))
        .collect();
    let edges: Vec<(Triplets, Triplets)> = space
        .classification
        .interface_edges
        .par_iter()
        .map(|&e| edge_matrices(space, e))
        .collect();
    let (cons, stab): (Vec<Triplets>, Vec<Triplets>) = edges.into_iter().unzip();
    Forms {
        volume: CsrMatrix::from_triplets(n, n, volume.concat()),
        consistency: CsrMatrix::from_triplets(n, n, cons.concat()),
        stabilization: CsrMatrix::from_triplets(n, n, stab.concat()),
    }
}

fn element_stiffness(space: &IfeSpace, t: usize, degree: usize) -> Triplets {
    let dofs = space.mesh.triangles[t];
    let local = &space.elements[t];
    let mut k = [[0.0; 3]; 3];
    let rule = (!space.coefficient.is_constant()).then(|| TriangleRule::of_degree(degree));
    for (cell, side) in &local.cells {
        let weight = match &rule {
            None => space.beta(Vec2::zeros(), *side) * triangle_area(cell),
            Some(r) => r.map(cell).map(|(x, w)| w * space.beta(x, *side)).sum(),
        };
        let g = local.shape.map(|f| f.grad(*side));
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] += weight * g[i].dot(&g[j]);
            }
        }
    }
    let mut out = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            out.push((dofs[i], dofs[j], k[i][j]));
        }
    }
    out
}

/// Degrees of freedom touching an interface edge, with their local index in
/// each neighbour.
struct EdgeDofs {
    dofs: Vec<usize>,
    local: Vec<[Option<usize>; 2]>,
}

fn edge_dofs(space: &IfeSpace, elems: [usize; 2]) -> EdgeDofs {
    let mut dofs = Vec::with_capacity(4);
    let mut local: Vec<[Option<usize>; 2]> = Vec::with_capacity(4);
    for (i, &t) in elems.iter().enumerate() {
        for (k, &v) in space.mesh.triangles[t].iter().enumerate() {
            match dofs.iter().position(|&d| d == v) {
                Some(p) => local[p][i] = Some(k),
                None => {
                    dofs.push(v);
                    let mut l = [None, None];
                    l[i] = Some(k);
                    local.push(l);
                }
            }
        }
    }
    EdgeDofs { dofs, local }
}

/// Trace of a degree of freedom's basis function from neighbour `i`.
fn trace(space: &IfeSpace, elem: usize, local: Option<usize>, x: Vec2, side: Side) -> (f64, Vec2) {
    match local {
        Some(k) => {
            let f = space.elements[elem].shape[k].piece(side);
            (f.eval(x), f.grad)
        }
        None => (0.0, Vec2::zeros()),
    }
}

/// Jump `[φ]` of the basis function of local DOF `a` across the edge.
pub(crate) fn basis_jump(
    space: &IfeSpace,
    elems: [usize; 2],
    local: [Option<usize>; 2],
    x: Vec2,
    side: Side,
) -> f64 {
    trace(space, elems[0], local[0], x, side).0 - trace(space, elems[1], local[1], x, side).0
}

fn edge_matrices(space: &IfeSpace, edge: usize) -> (Triplets, Triplets) {
    let lift = EdgeLift::new(space, edge);
    let elems = lift.elems.map(|e| e.element);
    let ed = edge_dofs(space, elems);
    let m = ed.dofs.len();
    let mut cons = vec![vec![0.0; m]; m];
    for piece in &lift.pieces {
        for (x, w) in segment_gauss3(piece.a, piece.b) {
            let beta = space.beta(x, piece.side);
            let mut avg = vec![0.0; m];
            let mut jump = vec![0.0; m];
            for a in 0..m {
                let (v1, g1) = trace(space, elems[0], ed.local[a][0], x, piece.side);
                let (v2, g2) = trace(space, elems[1], ed.local[a][1], x, piece.side);
                avg[a] = 0.5 * beta * (g1 + g2).dot(&lift.normal);
                jump[a] = v1 - v2;
            }
            for a in 0..m {
                for b in 0..m {
                    cons[a][b] -= w * (avg[a] * jump[b] + avg[b] * jump[a]);
                }
            }
        }
    }
    let lifts: Vec<LiftingField> = ed
        .local
        .iter()
        .map(|&loc| lift.lift(|x, side| basis_jump(space, elems, loc, x, side)))
        .collect();
    let mut c_out = Vec::with_capacity(m * m);
    let mut s_out = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            c_out.push((ed.dofs[a], ed.dofs[b], cons[a][b]));
            s_out.push((
                ed.dofs[a],
                ed.dofs[b],
                4.0 * lift.weighted_inner(&lifts[a], &lifts[b]),
            ));
        }
    }
    (c_out, s_out)
}

/// `∫ f v` for every basis function, with `f` evaluated on the true side of
/// each quadrature point.
pub fn assemble_load(
    space: &IfeSpace,
    f: &(dyn Fn(Vec2, Side) -> f64 + Sync),
    degree: usize,
) -> Vec<f64> {
    let rule = TriangleRule::of_degree(degree);
    let parts: Vec<[(usize, f64); 3]> = (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let local = &space.elements[t];
            let mut b = [0.0; 3];
            for (cell, side) in &local.cells {
                for (x, w) in rule.map(cell) {
                    let fx = w * f(x, space.geometry.side(x));
                    for (k, bk) in b.iter_mut().enumerate() {
                        *bk += fx * local.shape[k].eval(x, *side);
                    }
                }
            }
            let dofs = space.mesh.triangles[t];
            [0, 1, 2].map(|k| (dofs[k], b[k]))
        })
        .collect();
    let mut load = vec![0.0; space.ndofs()];
    for part in parts {
        for (i, v) in part {
            load[i] += v;
        }
    }
    load
}

/// Full system before boundary elimination.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub forms: Forms,
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    /// Prescribed value of every boundary vertex.
    pub dirichlet: Vec<Option<f64>>,
}

/// Assembles `A_h` and the load vector, and interpolates the Dirichlet data
/// at boundary vertices.
pub fn assemble(
    space: &IfeSpace,
    f: &(dyn Fn(Vec2, Side) -> f64 + Sync),
    g: &dyn Fn(Vec2) -> f64,
    opts: &AssemblyOptions,
) -> LinearSystem {
    let forms = assemble_forms(space, opts);
    let matrix = forms.total();
    let load = assemble_load(space, f, opts.load_degree);
    let dirichlet = space
        .mesh
        .vertices
        .iter()
        .zip(&space.mesh.boundary)
        .map(|(&x, &b)| b.then(|| g(x)))
        .collect();
    LinearSystem {
        forms,
        matrix,
        load,
        dirichlet,
    }
}

impl LinearSystem {
    /// Interior system after symmetric elimination of boundary values:
    /// `A_II u_I = F_I - A_IB g_B`. Returns the matrix, right-hand side and
    /// the interior vertex indices.
    pub fn reduce(&self) -> (CsrMatrix, Vec<f64>, Vec<usize>) {
        let free: Vec<usize> = (0..self.dirichlet.len())
            .filter(|&i| self.dirichlet[i].is_none())
            .collect();
        let a = self.matrix.principal_submatrix(&free);
        let rhs = free
            .iter()
            .map(|&i| {
                let lifted: f64 = self
                    .matrix
                    .row(i)
                    .filter_map(|(j, v)| self.dirichlet[j].map(|g| v * g))
                    .sum();
                self.load[i] - lifted
            })
            .collect();
        (a, rhs, free)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("point ({0}, {1}) lies outside the domain")]
    OutOfDomain(f64, f64),
}

/// Nodal coefficients of an IFE function together with its space.
#[derive(Debug, Clone)]
pub struct DiscreteSolution<'a> {
    pub space: &'a IfeSpace,
    pub coeffs: Vec<f64>,
    pub method: Option<SolveMethod>,
}

impl<'a> DiscreteSolution<'a> {
    pub fn from_coeffs(space: &'a IfeSpace, coeffs: Vec<f64>) -> Self {
        DiscreteSolution {
            space,
            coeffs,
            method: None,
        }
    }

    /// Value and gradient at `x`, using the discrete side within the
    /// containing element.
    pub fn value_grad(&self, x: Vec2) -> Result<(f64, Vec2), EvalError> {
        let t = self
            .space
            .mesh
            .locate(x)
            .ok_or(EvalError::OutOfDomain(x.x, x.y))?;
        Ok(self
            .space
            .eval(t, &self.coeffs, x, self.space.side_in(t, x)))
    }

    pub fn evaluate(&self, x: Vec2) -> Result<f64, EvalError> {
        self.value_grad(x).map(|v| v.0)
    }
}

/// Solves the reduced system and returns the full nodal vector.
pub fn solve<'a>(
    space: &'a IfeSpace,
    system: &LinearSystem,
    opts: &SolverOptions,
) -> Result<DiscreteSolution<'a>, SolverError> {
    let (a, rhs, free) = system.reduce();
    let (x, method) = solve_spd(&a, &rhs, opts)?;
    let mut coeffs: Vec<f64> = system.dirichlet.iter().map(|g| g.unwrap_or(0.0)).collect();
    for (k, &i) in free.iter().enumerate() {
        coeffs[i] = x[k];
    }
    Ok(DiscreteSolution {
        space,
        coeffs,
        method: Some(method),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::Coefficient;
    use crate::geometry::{LevelSetGeometry, Rect};
    use crate::mesh::TriMesh;

    fn space(n: usize, bp: f64, bm: f64) -> IfeSpace {
        let g = LevelSetGeometry::named("circle").unwrap();
        IfeSpace::new(
            TriMesh::cartesian(Rect::square(-1.0, 1.0), n),
            g,
            Coefficient::constant(bp, bm),
        )
        .unwrap()
    }

    #[test]
    fn forms_are_symmetric() {
        let s = space(8, 1.0, 1000.0);
        let f = assemble_forms(&s, &AssemblyOptions::default());
        assert!(f.volume.asymmetry() <= 1e-12 * f.volume.max_abs());
        assert!(f.consistency.asymmetry() <= 1e-12 * f.consistency.max_abs().max(1.0));
        assert!(f.stabilization.asymmetry() <= 1e-12 * f.stabilization.max_abs().max(1.0));
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let s = space(8, 10.0, 1.0);
        let a = assemble_forms(&s, &AssemblyOptions::default()).total();
        let ones = vec![1.0; s.ndofs()];
        let r = a.mul(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-10 * a.max_abs()));
    }

    #[test]
    fn load_integrates_constant_source() {
        let s = space(8, 3.0, 1.0);
        let b = assemble_load(&s, &|_, _| 1.0, 4);
        assert!((b.iter().sum::<f64>() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn reduction_keeps_interior_rows() {
        let s = space(4, 2.0, 1.0);
        let sys = assemble(&s, &|_, _| 0.0, &|x| x.x, &AssemblyOptions::default());
        let (a, rhs, free) = sys.reduce();
        assert_eq!(free.len(), 9);
        assert_eq!(a.nrows, 9);
        assert_eq!(rhs.len(), 9);
    }

    #[test]
    fn evaluation_outside_domain_is_an_error() {
        let s = space(4, 2.0, 1.0);
        let u = DiscreteSolution::from_coeffs(&s, vec![0.0; s.ndofs()]);
        assert!(u.evaluate(Vec2::new(2.0, 0.0)).is_err());
        assert_eq!(u.evaluate(Vec2::new(0.1, 0.2)).unwrap(), 0.0);
    }
}
