//! Langevin dynamics on Lie algebras with a non-trivial invariant measure.
//!
//! The generic layers (`algebra`, `coords`, `dynamics`, parts of `specfun`)
//! accept any [`Real`] scalar; the stochastic, PDE and statistics layers run
//! in `f64`.

pub mod algebra;
pub mod coords;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod fpk;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod specfun;
pub mod stats;
pub mod tridiag;

pub use error::{Error, Result};
pub use scalar::Real;

pub type LieAlgebra = algebra::LieAlgebra<f64>;
pub type ModelParams = algebra::ModelParams<f64>;
pub type PolarVelocity = coords::PolarVelocity<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;

pub type LieAlgebra32 = algebra::LieAlgebra<f32>;
pub type ModelParams32 = algebra::ModelParams<f32>;
pub type PolarVelocity32 = coords::PolarVelocity<f32>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
