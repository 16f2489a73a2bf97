//! Closed-loop supply-chain network design for used-mask reverse logistics:
//! instance data, a tri-objective MILP model, an exact LP/branch-and-bound
//! engine, ε-constraint Pareto sweeps and a linear-economy comparison.
//!
//! The solver and distance code is generic over [`Scalar`]; the aliases below
//! fix it to `f64`, which is what the model builder uses.

pub mod baseline;
pub mod formulation;
pub mod geo;
pub mod instance;
pub mod pareto;
pub mod scalar;
pub mod solver;

pub use scalar::Scalar;

pub type Problem = solver::MilpProblem<f64>;
pub type MilpResult = solver::MilpResult<f64>;
pub type LpResult = solver::LpResult<f64>;
pub type LatLon = geo::LatLon<f64>;
pub type DistanceMatrix = geo::DistanceMatrix<f64>;
