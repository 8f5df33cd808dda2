//! Interface problems `-∇·(β∇u) = f` with homogeneous jump conditions and
//! Dirichlet data, including the two reference examples.

use std::fmt;
use std::sync::Arc;

use crate::coefficient::Coefficient;
use crate::geometry::{LevelSetGeometry, Side, Vec2};

/// A two-sided exact solution.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: Vec2, side: Side) -> f64;
    fn gradient(&self, x: Vec2, side: Side) -> Vec2;
}

pub type SourceFn = Arc<dyn Fn(Vec2, Side) -> f64 + Send + Sync>;
pub type BoundaryFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub geometry: LevelSetGeometry,
    pub coefficient: Coefficient,
    pub source: SourceFn,
    pub dirichlet: BoundaryFn,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("coefficient", &self.coefficient)
            .finish_non_exhaustive()
    }
}

/// Radial solution around a circular interface of radius `r0`:
/// `r³/β⁻` inside and `r³/β⁺ + (1/β⁻ - 1/β⁺) r0³` outside.
#[derive(Debug, Clone, Copy)]
pub struct CircleSolution {
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub r0: f64,
}

impl ExactSolution for CircleSolution {
    fn value(&self, x: Vec2, side: Side) -> f64 {
        let r3 = x.norm().powi(3);
        match side {
            Side::Minus => r3 / self.beta_minus,
            Side::Plus => {
                r3 / self.beta_plus
                    + (1.0 / self.beta_minus - 1.0 / self.beta_plus) * self.r0.powi(3)
            }
        }
    }

    fn gradient(&self, x: Vec2, side: Side) -> Vec2 {
        let g = x * (3.0 * x.norm());
        match side {
            Side::Minus => g / self.beta_minus,
            Side::Plus => g / self.beta_plus,
        }
    }
}

/// Circular interface of radius 0.5 with constant coefficients.
pub fn example1(beta_plus: f64, beta_minus: f64) -> Problem {
    let exact = CircleSolution {
        beta_plus,
        beta_minus,
        r0: 0.5,
    };
    let geometry = LevelSetGeometry::named("circle").expect("registered");
    let truth = geometry.clone();
    Problem {
        name: "example1".into(),
        geometry,
        coefficient: Coefficient::constant(beta_plus, beta_minus),
        source: Arc::new(|x, _| -9.0 * x.norm()),
        dirichlet: Arc::new(move |x| exact.value(x, truth.side(x))),
        exact: Some(Arc::new(exact)),
    }
}

fn flower_parts(x: Vec2) -> (f64, Vec2, f64) {
    let r2 = x.norm_squared();
    let q = 3.0 * r2 - x.x;
    let gq = Vec2::new(6.0 * x.x - 1.0, 6.0 * x.y);
    let phi = q * q - r2 + 0.02;
    let grad = gq * (2.0 * q) - x * 2.0;
    let lap = 2.0 * gq.norm_squared() + 24.0 * q - 4.0;
    (phi, grad, lap)
}

/// `(β, ∇β, Δβ)` of the oscillating coefficients.
fn flower_beta(x: Vec2, side: Side) -> (f64, Vec2, f64) {
    let s = 6.0 * (x.x + x.y);
    match side {
        Side::Plus => (
            300.0 * (2.0 + s.sin()),
            Vec2::new(1.0, 1.0) * (1800.0 * s.cos()),
            -300.0 * 72.0 * s.sin(),
        ),
        Side::Minus => (
            2.0 + s.cos(),
            Vec2::new(1.0, 1.0) * (-6.0 * s.sin()),
            -72.0 * s.cos(),
        ),
    }
}

/// `u = φ / β` on each side of the flower interface `φ = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlowerSolution;

impl ExactSolution for FlowerSolution {
    fn value(&self, x: Vec2, side: Side) -> f64 {
        flower_parts(x).0 / flower_beta(x, side).0
    }

    fn gradient(&self, x: Vec2, side: Side) -> Vec2 {
        let (phi, gphi, _) = flower_parts(x);
        let (b, gb, _) = flower_beta(x, side);
        (gphi * b - gb * phi) / (b * b)
    }
}

/// Flower interface with smoothly varying coefficients whose ratio is about
/// 300.
pub fn example2() -> Problem {
    let geometry = LevelSetGeometry::named("flower").expect("registered");
    let source = |x: Vec2, side: Side| {
        let (phi, gphi, lphi) = flower_parts(x);
        let (b, gb, lb) = flower_beta(x, side);
        -lphi + gphi.dot(&gb) / b + phi * (lb / b - gb.norm_squared() / (b * b))
    };
    let truth = geometry.clone();
    Problem {
        name: "example2".into(),
        geometry,
        coefficient: Coefficient::variable(
            |x| flower_beta(x, Side::Plus).0,
            |x| flower_beta(x, Side::Minus).0,
        ),
        source: Arc::new(source),
        dirichlet: Arc::new(move |x| FlowerSolution.value(x, truth.side(x))),
        exact: Some(Arc::new(FlowerSolution)),
    }
}
