//! Hedlund metrics on the flat torus `T^m = R^m / Z^m`.
//!
//! Given a centrally symmetric polytope with rational vertex directions, this
//! crate places straight closed geodesics in the vertex classes, builds the
//! conformal factor of a Hedlund metric around them, certifies the metric's
//! defining inequalities on sample grids, and checks numerically that the
//! stable norm of the metric is the polytope norm: shortest-path distances in
//! the universal cover are squeezed between the calibration lower bound and an
//! explicit broken-path upper bound.

pub mod curves;
pub mod error;
pub mod forms;
pub mod io;
pub mod lemmapath;
pub mod metric;
pub mod polytope;
pub mod quad;
pub mod scalar;
pub mod solver;
pub mod stablenorm;

pub use error::{Error, Result};
pub use scalar::{Real, MAX_DIM};

pub type CurveSystem64 = curves::CurveSystem<f64>;
pub type CurveSystem32 = curves::CurveSystem<f32>;
pub type GoodForm64 = forms::GoodForm<f64>;
pub type HedlundMetric64 = metric::HedlundMetric<f64>;
pub type HedlundMetric32 = metric::HedlundMetric<f32>;
pub type Solver64 = solver::Solver<f64>;
