//! Geometry and structure of linear dynamical systems.
//!
//! Polynomial matrices in the delay operator, ARMA / state-space / Markov
//! representations, Hankel-based Kronecker indices, overlapping charts, and
//! Riemannian metric tensors evaluated as unit-circle averages. Everything is
//! generic over [`scalar::Real`] (`f32` or `f64`); the aliases below fix `f64`.

// Negated comparisons are deliberate: they reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod charts;
pub mod error;
pub mod hankel;
pub mod io;
pub mod lsys;
pub mod metric;
pub mod polymat;
pub mod scalar;
pub mod stochastic;
pub mod structure;
pub mod verify;

pub use error::{Error, Result};

pub type PolyMatrix = polymat::PolynomialMatrix<f64>;
pub type System = lsys::LinearSystem<f64>;
pub type Markov = lsys::MarkovSequence<f64>;
pub type Hankel = hankel::HankelAnalysis<f64>;
pub type Coordinates = charts::ChartCoordinates<f64>;
pub type Param = metric::Parametrization<f64>;
pub type Tensor = metric::MetricTensor<f64>;
pub type Stochastic = stochastic::StochasticSystem<f64>;
pub type Quad = metric::Quadrature<f64>;
