//! Diffusion coefficients β⁺ and β⁻.

use std::fmt;
use std::sync::Arc;

use crate::geometry::{CutSegment, Side, Vec2};

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// Reduces a variable coefficient to the single value used in the flux
/// condition of a cut element.
pub trait CutAverage: Send + Sync {
    fn average(&self, beta: &dyn Fn(Vec2) -> f64, cut: &CutSegment) -> f64;
}

/// Value at the midpoint of the chord `DE`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MidpointAverage;

impl CutAverage for MidpointAverage {
    fn average(&self, beta: &dyn Fn(Vec2) -> f64, cut: &CutSegment) -> f64 {
        beta(cut.midpoint())
    }
}

#[derive(Clone)]
pub enum Coefficient {
    Constant {
        plus: f64,
        minus: f64,
    },
    Variable {
        plus: ScalarField,
        minus: ScalarField,
        average: Arc<dyn CutAverage>,
    },
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant { plus, minus } => {
                write!(f, "Constant {{ plus: {plus}, minus: {minus} }}")
            }
            Coefficient::Variable { .. } => write!(f, "Variable"),
        }
    }
}

impl Coefficient {
    pub fn constant(plus: f64, minus: f64) -> Self {
        Coefficient::Constant { plus, minus }
    }

    pub fn variable(
        plus: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        minus: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Coefficient::Variable {
            plus: Arc::new(plus),
            minus: Arc::new(minus),
            average: Arc::new(MidpointAverage),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant { .. })
    }

    pub fn value(&self, x: Vec2, side: Side) -> f64 {
        match (self, side) {
            (Coefficient::Constant { plus, .. }, Side::Plus) => *plus,
            (Coefficient::Constant { minus, .. }, Side::Minus) => *minus,
            (Coefficient::Variable { plus, .. }, Side::Plus) => plus(x),
            (Coefficient::Variable { minus, .. }, Side::Minus) => minus(x),
        }
    }

    /// Per-element constants `(β̄⁺, β̄⁻)` for a cut element.
    pub fn averages(&self, cut: &CutSegment) -> (f64, f64) {
        match self {
            Coefficient::Constant { plus, minus } => (*plus, *minus),
            Coefficient::Variable {
                plus,
                minus,
                average,
            } => (
                average.average(plus.as_ref(), cut),
                average.average(minus.as_ref(), cut),
            ),
        }
    }
}
