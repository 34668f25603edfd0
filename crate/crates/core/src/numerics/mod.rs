//! Shared numerical kernels: adaptive quadrature, backward RK4 integration,
//! shape-preserving interpolation and SPD linear algebra.

pub mod curve;
pub mod linalg;
pub mod ode;
pub mod quad;

pub use curve::{Curve, Interpolation};
pub use linalg::{spd_condition_number, spd_solve, Matrix, SpdFactor, CONDITION_LIMIT};
pub use ode::solve_backward_linear_ode;
pub use quad::integrate_adaptive;
