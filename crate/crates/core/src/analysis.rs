//! Error norms, convergence rates and rate tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{DiscreteSolution, Forms};
use crate::geometry::{Side, Vec2};
use crate::ife_space::IfeSpace;
use crate::lifting::EdgeLift;
use crate::problem::ExactSolution;
use crate::quadrature::{segment_gauss3, TriangleRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("rate fitting needs at least two refinement levels, got {0}")]
    InsufficientData(usize),
    #[error("refinement ladder must halve h at every step (level {0})")]
    NotDyadic(usize),
}

/// Errors of one discrete solution against the exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub n: usize,
    pub h: f64,
    pub l2: f64,
    /// Energy error `‖u - u_h‖_h` with `‖v‖_h² = Σ_T ‖√β_h ∇v‖²`.
    pub h1: f64,
    /// `(Σ_e h ‖{β_h ∇(u - u_h)}‖²_e)^{1/2}` over interface edges.
    pub edge_flux: f64,
    /// `(Σ_e h⁻¹ ‖[u_h]‖²_e)^{1/2}` over interface edges.
    pub edge_jump: f64,
    /// `s_h(u_h, u_h)^{1/2}`.
    pub stabilization: f64,
}

impl ErrorReport {
    /// The energy-type norm combining all four parts.
    pub fn triple(&self) -> f64 {
        (self.h1.powi(2)
            + self.edge_flux.powi(2)
            + self.edge_jump.powi(2)
            + self.stabilization.powi(2))
        .sqrt()
    }
}

/// Which branch of a two-sided exact solution is compared at a quadrature
/// point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExactBranch {
    /// The side given by the sign of the level set.
    #[default]
    True,
    /// The side of the sub-triangle containing the point.
    Discrete,
}

/// Computes error norms with a degree-`degree` rule on every side-tagged
/// sub-triangle. The discrete solution is evaluated on the side of the
/// sub-triangle and the exact one on the side chosen by `branch`.
pub fn compute_errors(
    sol: &DiscreteSolution,
    exact: &dyn ExactSolution,
    degree: usize,
) -> ErrorReport {
    compute_errors_with(sol, exact, degree, ExactBranch::True)
}

pub fn compute_errors_with(
    sol: &DiscreteSolution,
    exact: &dyn ExactSolution,
    degree: usize,
    branch: ExactBranch,
) -> ErrorReport {
    let space = sol.space;
    let rule = TriangleRule::of_degree(degree);
    let parts: Vec<(f64, f64)> = (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let (mut l2, mut h1) = (0.0, 0.0);
            for (cell, side) in &space.elements[t].cells {
                for (x, w) in rule.map(cell) {
                    let truth = match branch {
                        ExactBranch::True => space.geometry.side(x),
                        ExactBranch::Discrete => *side,
                    };
                    let (uh, guh) = space.eval(t, &sol.coeffs, x, *side);
                    let e = exact.value(x, truth) - uh;
                    let ge = exact.gradient(x, truth) - guh;
                    l2 += w * e * e;
                    h1 += w * space.beta(x, *side) * ge.norm_squared();
                }
            }
            (l2, h1)
        })
        .collect();
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let edges = edge_terms(space, &sol.coeffs, Some(exact));
    ErrorReport {
        n: space.mesh.n,
        h: space.mesh.h,
        l2: l2.sqrt(),
        h1: h1.sqrt(),
        edge_flux: edges.flux.sqrt(),
        edge_jump: edges.jump.sqrt(),
        stabilization: edges.stab.sqrt(),
    }
}

/// Squared edge contributions to the energy-type norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeTerms {
    pub flux: f64,
    pub jump: f64,
    pub stab: f64,
}

/// Edge parts of the energy-type norm of `u_h` (or of `u - u_h` when the
/// exact solution is given; jumps of `u` vanish).
pub fn edge_terms(space: &IfeSpace, u: &[f64], exact: Option<&dyn ExactSolution>) -> EdgeTerms {
    let h = space.mesh.h;
    let mut out = EdgeTerms {
        flux: 0.0,
        jump: 0.0,
        stab: 0.0,
    };
    for &e in &space.classification.interface_edges {
        let lift = EdgeLift::new(space, e);
        let [t1, t2] = lift.elems.map(|el| el.element);
        let jump_at =
            |x: Vec2, side: Side| space.eval(t1, u, x, side).0 - space.eval(t2, u, x, side).0;
        for piece in &lift.pieces {
            for (x, w) in segment_gauss3(piece.a, piece.b) {
                let beta = space.beta(x, piece.side);
                let g1 = space.eval(t1, u, x, piece.side).1;
                let g2 = space.eval(t2, u, x, piece.side).1;
                let mut avg = (g1 + g2) * (0.5 * beta);
                if let Some(ex) = exact {
                    avg = ex.gradient(x, space.geometry.side(x)) * beta - avg;
                }
                out.flux += h * w * avg.norm_squared();
                out.jump += w * jump_at(x, piece.side).powi(2) / h;
            }
        }
        let r = lift.lift(jump_at);
        out.stab += 4.0 * lift.weighted_inner(&r, &r);
    }
    out
}

/// Squared parts of the energy-type norm of an IFE function:
/// `(‖v‖_h², Σ h‖{β_h∇v}‖², Σ h⁻¹‖[v]‖², s_h(v, v))`.
pub fn triple_norm_parts(space: &IfeSpace, forms: &Forms, v: &[f64]) -> [f64; 4] {
    let e = edge_terms(space, v, None);
    [
        forms.volume.bilinear(v, v),
        e.flux,
        e.jump,
        forms.stabilization.bilinear(v, v),
    ]
}

/// One row of a rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub l2: f64,
    pub l2_rate: Option<f64>,
    pub h1: f64,
    pub h1_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log e` against `log h` over the last three
    /// levels.
    pub l2_slope: f64,
    pub h1_slope: f64,
}

/// Successive rates `log2(e_{k-1} / e_k)` and the fitted asymptotic slopes.
pub fn fit_rates(reports: &[ErrorReport]) -> Result<RateTable, AnalysisError> {
    if reports.len() < 2 {
        return Err(AnalysisError::InsufficientData(reports.len()));
    }
    for k in 1..reports.len() {
        let ratio = reports[k - 1].h / reports[k].h;
        if (ratio - 2.0).abs() > 1e-9 {
            return Err(AnalysisError::NotDyadic(k));
        }
    }
    let rate = |a: f64, b: f64| (a / b).log2();
    let rows = reports
        .iter()
        .enumerate()
        .map(|(k, r)| RateRow {
            n: r.n,
            h: r.h,
            l2: r.l2,
            l2_rate: (k > 0).then(|| rate(reports[k - 1].l2, r.l2)),
            h1: r.h1,
            h1_rate: (k > 0).then(|| rate(reports[k - 1].h1, r.h1)),
        })
        .collect();
    let tail = &reports[reports.len().saturating_sub(3)..];
    let hs: Vec<f64> = tail.iter().map(|r| r.h).collect();
    Ok(RateTable {
        rows,
        l2_slope: loglog_slope(&hs, &tail.iter().map(|r| r.l2).collect::<Vec<_>>()),
        h1_slope: loglog_slope(&hs, &tail.iter().map(|r| r.h1).collect::<Vec<_>>()),
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn loglog_slope(h: &[f64], e: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Four significant digits in the `1.018E-02` style.
pub fn sci4(x: f64) -> String {
    if x == 0.0 {
        return "0.000E+00".into();
    }
    let s = format!("{x:.3E}");
    let (mant, exp) = s.split_once('E').expect("exponent");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

impl RateTable {
    /// CSV with header `N,h,l2_error,l2_rate,h1_error,h1_rate`; errors and
    /// mesh sizes use four significant digits, rates two decimals, and the
    /// first row leaves the rates empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,h,l2_error,l2_rate,h1_error,h1_rate\n");
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                sci4(r.h),
                sci4(r.l2),
                fmt_rate(r.l2_rate),
                sci4(r.h1),
                fmt_rate(r.h1_rate)
            )
            .expect("writing to a string");
        }
        out
    }
}
