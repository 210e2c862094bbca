//! Mean-variance hedging on the random horizon `T ∧ τ` in a market with one
//! jump.
//!
//! The risky asset follows `dS/S₋ = μ dt + σ dW + β dM`, where `M` is the
//! compensated indicator of a jump time `τ` with deterministic intensity `λ`.
//! A claim pays `H^b` if no jump happens before `T` and `H^a(τ)` otherwise.
//!
//! The optimal hedge is described by three jump BSDEs. With deterministic
//! coefficient curves each of them reduces to a backward ODE in the Brownian
//! filtration ([`fsolver`]); the full solutions are then rebuilt on every
//! path by the decomposition lift ([`lift`]). [`strategy`] turns those
//! solutions into the optimal position and wealth, [`montecarlo`] simulates
//! hedging errors and [`verify`] checks the martingale optimality conditions.

pub mod fsolver;
pub mod lift;
pub mod model;
pub mod montecarlo;
mod quadrature;
pub mod strategy;
pub mod verify;

pub use fsolver::{solve, FSolution, SolutionCurve, SolverError, SolverGrid, Which};
pub use lift::{GTriple, LiftedStates};
pub use model::{build_claim, build_market, ClaimSpec, Coeffs, Curve, Interp, MarketModel, ModelError, RawSection};
pub use montecarlo::{Estimate, MarketPath, SimConfig};
pub use strategy::{Regime, StrategyKind, WealthPath};
pub use verify::{Check, DiagnosticsReport, DriftQuadratic};
