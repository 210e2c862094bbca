//! Full solutions of the jump BSDEs rebuilt from the before-jump curves.
//!
//! For a solution `f` of the before-jump equation and a post-jump terminal
//! curve `ξ^a`, the triple `Y_t = f(t)·1{t<τ} + ξ^a(τ)·1{t≥τ}`, `Z = 0`,
//! `U_t = (ξ^a(t) - f(t))·1{t≤τ}` solves the jump equation. The drivers
//! below are used only to check this, never to compute the solution.

use thiserror::Error;

use crate::fsolver::{FSolution, SolutionCurve, Which};
use crate::model::{claim_payoff, ClaimSpec, Coeffs, Curve, MarketModel};
use crate::montecarlo::MarketPath;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("driver undefined at state: denominator {denominator} <= 0")]
pub struct DriverError {
    pub denominator: f64,
}

/// Value, Brownian and jump components of one solution at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GTriple {
    pub y: f64,
    pub z: f64,
    pub u: f64,
}

/// `(Y, Z, U)` at `t` given the jump time `tau` (`f64::INFINITY` if none).
pub fn lift_triple(f: &SolutionCurve, xi_a: &Curve, tau: f64, t: f64) -> GTriple {
    let y = if t < tau { f.eval(t) } else { xi_a.eval(tau) };
    let u = if t <= tau { xi_a.eval(t) - f.eval(t) } else { 0.0 };
    GTriple { y, z: 0.0, u }
}

/// All three lifted solutions and the effective intensity `λ^G` at one
/// instant, together with the coefficients used there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftedStates {
    pub coeffs: Coeffs,
    pub lam_g: f64,
    /// `(Y, Z, U)`.
    pub y: GTriple,
    /// `(𝒴, 𝒵, 𝒰)`.
    pub yc: GTriple,
    /// `(Υ, Ξ, Θ)`.
    pub ups: GTriple,
}

impl LiftedStates {
    /// Left-limit states at `t ≤ τ` (no jump yet): `λ^G = λ_t`.
    pub fn pre_default(sol: &FSolution, model: &MarketModel, claim: &ClaimSpec, t: f64) -> Self {
        let coeffs = model.coeffs(t);
        Self::from_values(coeffs, sol.y_b.eval(t), sol.yc_b.eval(t), sol.ups_b.eval(t), claim.h_a.eval(t))
    }

    /// Pre-default states from known before-jump values at one instant.
    pub fn from_values(coeffs: Coeffs, y_b: f64, yc_b: f64, ups_b: f64, h_a: f64) -> Self {
        LiftedStates {
            coeffs,
            lam_g: coeffs.lambda,
            y: GTriple { y: y_b, z: 0.0, u: 1.0 - y_b },
            yc: GTriple { y: yc_b, z: 0.0, u: h_a - yc_b },
            ups: GTriple { y: ups_b, z: 0.0, u: -ups_b },
        }
    }

    /// States strictly after a jump at `tau`: the horizon has ended, every
    /// solution sits at its post-jump terminal value and `λ^G = 0`.
    pub fn post_default(model: &MarketModel, claim: &ClaimSpec, tau: f64, t: f64) -> Self {
        LiftedStates {
            coeffs: model.coeffs(t),
            lam_g: 0.0,
            y: GTriple { y: 1.0, z: 0.0, u: 0.0 },
            yc: GTriple { y: claim.h_a.eval(tau), z: 0.0, u: 0.0 },
            ups: GTriple { y: 0.0, z: 0.0, u: 0.0 },
        }
    }

    /// `σ²Y + λ^G β²(U + Y)`.
    pub fn denominator(&self) -> f64 {
        let c = &self.coeffs;
        c.sigma * c.sigma * self.y.y + self.lam_g * c.beta * c.beta * (self.y.u + self.y.y)
    }
}

/// `𝔣(y, z, u) = -|μy + σz + λ^G βu|² / (σ²y + λ^G β²(u + y))`.
pub fn driver_f(c: &Coeffs, lam_g: f64, s: GTriple) -> Result<f64, DriverError> {
    let den = c.sigma * c.sigma * s.y + lam_g * c.beta * c.beta * (s.u + s.y);
    if den.is_nan() || den <= 0.0 {
        return Err(DriverError { denominator: den });
    }
    let num = c.mu * s.y + c.sigma * s.z + lam_g * c.beta * s.u;
    Ok(-num * num / den)
}

/// `𝔤(z, u)` for the state `(Y, Z, U)`; it does not depend on `y`.
pub fn driver_g(c: &Coeffs, lam_g: f64, state: GTriple, z: f64, u: f64) -> Result<f64, DriverError> {
    let GTriple { y, z: zz, u: uu } = state;
    let den = c.sigma * c.sigma * y + lam_g * c.beta * c.beta * (uu + y);
    if den.is_nan() || den <= 0.0 || y == 0.0 {
        return Err(DriverError { denominator: den });
    }
    let p = c.mu * y + c.sigma * zz + lam_g * c.beta * uu;
    let q = c.sigma * y * z + lam_g * c.beta * (uu + y) * u;
    Ok((zz * z + lam_g * uu * u - p * q / den) / y)
}

/// `𝔥` for the state `(Y, Z, U)` and the jump-claim components `(𝒵, 𝒰)`.
pub fn driver_h(c: &Coeffs, lam_g: f64, state: GTriple, zc: f64, uc: f64) -> Result<f64, DriverError> {
    let GTriple { y, u, .. } = state;
    let den = c.sigma * c.sigma * y + lam_g * c.beta * c.beta * (u + y);
    if den.is_nan() || den <= 0.0 {
        return Err(DriverError { denominator: den });
    }
    let q = c.sigma * y * zc + lam_g * c.beta * uc * (u + y);
    Ok(zc * zc * y + lam_g * (u + y) * uc * uc - q * q / den)
}

/// Driver of the selected equation evaluated on lifted states.
pub fn driver(which: Which, s: &LiftedStates) -> Result<f64, DriverError> {
    match which {
        Which::Y => driver_f(&s.coeffs, s.lam_g, s.y),
        Which::Yc => driver_g(&s.coeffs, s.lam_g, s.y, s.yc.z, s.yc.u),
        Which::Ups => driver_h(&s.coeffs, s.lam_g, s.y, s.yc.z, s.yc.u),
    }
}

fn component(which: Which, s: &LiftedStates) -> GTriple {
    match which {
        Which::Y => s.y,
        Which::Yc => s.yc,
        Which::Ups => s.ups,
    }
}

/// Largest defect of the jump BSDE along `path`:
/// `Y_t - ξ - ∫_t^{T∧τ} (driver + λ^G U) ds + ∫_{(t, T∧τ]} U dN` over mesh
/// points `t < T∧τ`, with a left-point rule for the time integral.
pub fn bsde_residual(
    path: &MarketPath,
    sol: &FSolution,
    model: &MarketModel,
    claim: &ClaimSpec,
    which: Which,
) -> Result<f64, DriverError> {
    let horizon = model.horizon();
    let end = path.stop_index();
    let xi = match which {
        Which::Y => 1.0,
        Which::Yc => claim_payoff(claim, path.tau, horizon),
        Which::Ups => 0.0,
    };
    let jumped = path.tau <= horizon;
    let u_tau = if jumped { component(which, &LiftedStates::pre_default(sol, model, claim, path.tau)).u } else { 0.0 };
    // backward accumulation of the left-point integral
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for k in (0..end).rev() {
        let t = path.times[k];
        let s = LiftedStates::pre_default(sol, model, claim, t);
        let g = component(which, &s);
        integral += (driver(which, &s)? + s.lam_g * g.u) * (path.times[k + 1] - t);
        let defect = g.y - xi - integral + u_tau;
        worst = worst.max(defect.abs());
    }
    Ok(worst)
}

/// Size of the jump of the lifted `Y` at `τ` minus `U_τ`; zero when the
/// bookkeeping is exact. Returns `None` when the path has no jump before `T`.
pub fn jump_bookkeeping_defect(
    path: &MarketPath,
    sol: &FSolution,
    model: &MarketModel,
    claim: &ClaimSpec,
    which: Which,
) -> Option<f64> {
    if path.tau > model.horizon() {
        return None;
    }
    let f = sol.curve(which);
    let xi_a = which.xi_a(claim);
    let before = f.eval(path.tau);
    let at = lift_triple(f, &xi_a, path.tau, path.tau);
    Some((at.y - before) - at.u)
}
