//! Closed-form optimal consumption, investment and life-insurance purchase
//! for a wage earner with a random lifetime in a multi-asset diffusion
//! market, together with two independent correctness engines: a pointwise
//! HJB-residual verifier and a Monte Carlo policy evaluator.

pub mod cli;
pub mod error;
pub mod market;
pub mod mortality;
pub mod numerics;
pub mod rng;
pub mod scenario;
pub mod simulate;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use market::{MarketAlgebra, MarketModel};
pub use mortality::MortalityModel;
pub use scenario::{IncomeProfile, InsuranceModel, Preferences, Scenario, ScenarioSpec};
pub use solver::{ControlAction, StrategyCoefficients, Variant};
