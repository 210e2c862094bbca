//! Market coefficients, default intensity and the hedged claim.
//!
//! All coefficients are deterministic curves of time. Construction validates
//! the standing assumptions:
//!
//! - HS(i): `μ` and `σ` bounded (finite curves),
//! - HS(ii): `σ ≥ σ_min > 0`,
//! - HS(iii): `-1 ≤ β ≤ C`,
//! - (Hτ): `λ ≥ 0` and bounded.

mod claim;
mod curve;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::quadrature;

pub use claim::{build_claim, claim_payoff, ClaimSpec};
pub use curve::{Curve, CurveError, Interp};

/// Flat `key = value` section of a parsed configuration.
pub type RawSection = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: expected a number, got `{value}`")]
    BadNumber { key: String, value: String },
    #[error("`{key}`: {source}")]
    Curve { key: String, source: CurveError },
    #[error("`T` must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("`s0` must be positive and finite, got {0}")]
    InitialPrice(f64),
    #[error("`{key}`: node at t={t} lies beyond the horizon T={horizon}")]
    NodeBeyondHorizon { key: String, t: f64, horizon: f64 },
    #[error("HS(ii) violated: sigma must stay uniformly positive, node ({t}, {v}) is <= 0")]
    Volatility { t: f64, v: f64 },
    #[error("HS(iii) violated: beta must be >= -1, node ({t}, {v})")]
    JumpSize { t: f64, v: f64 },
    #[error("(Htau) violated: intensity lambda must be >= 0, node ({t}, {v})")]
    Intensity { t: f64, v: f64 },
    #[error("`{key}`: {reason}")]
    Claim { key: String, reason: String },
}

impl ModelError {
    /// Configuration key the diagnostic refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ModelError::MissingKey(k) | ModelError::UnknownKey(k) => Some(k),
            ModelError::BadNumber { key, .. }
            | ModelError::Curve { key, .. }
            | ModelError::NodeBeyondHorizon { key, .. }
            | ModelError::Claim { key, .. } => Some(key),
            ModelError::Horizon(_) => Some("T"),
            ModelError::InitialPrice(_) => Some("s0"),
            ModelError::Volatility { .. } => Some("sigma"),
            ModelError::JumpSize { .. } => Some("beta"),
            ModelError::Intensity { .. } => Some("lambda"),
        }
    }
}

/// Coefficient values at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coeffs {
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl Coeffs {
    /// Drift of `dS/S₋` between jumps, `μ - λβ`.
    pub fn compensated_drift(&self) -> f64 {
        self.mu - self.lambda * self.beta
    }
}

/// Validated market: horizon, initial price and the four coefficient curves.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketModel {
    horizon: f64,
    s0: f64,
    mu: Curve,
    sigma: Curve,
    beta: Curve,
    lambda: Curve,
}

pub(crate) fn parse_number(raw: &RawSection, key: &str) -> Result<f64, ModelError> {
    let value = raw.get(key).ok_or_else(|| ModelError::MissingKey(key.to_string()))?;
    value.trim().parse().map_err(|_| ModelError::BadNumber { key: key.to_string(), value: value.clone() })
}

pub(crate) fn parse_curve(raw: &RawSection, key: &str) -> Result<Curve, ModelError> {
    let value = raw.get(key).ok_or_else(|| ModelError::MissingKey(key.to_string()))?;
    value.parse().map_err(|source| ModelError::Curve { key: key.to_string(), source })
}

const MARKET_KEYS: [&str; 6] = ["T", "s0", "mu", "sigma", "beta", "lambda"];

/// Builds and validates a market from a `[market]` section.
///
/// Keys: `T`, `s0`, `mu`, `sigma`, `beta`, `lambda`; curves use the syntax
/// accepted by [`Curve`]'s `FromStr`.
pub fn build_market(raw: &RawSection) -> Result<MarketModel, ModelError> {
    if let Some(k) = raw.keys().find(|k| !MARKET_KEYS.contains(&k.as_str())) {
        return Err(ModelError::UnknownKey(k.clone()));
    }
    MarketModel::new(
        parse_number(raw, "T")?,
        parse_number(raw, "s0")?,
        parse_curve(raw, "mu")?,
        parse_curve(raw, "sigma")?,
        parse_curve(raw, "beta")?,
        parse_curve(raw, "lambda")?,
    )
}

impl MarketModel {
    pub fn new(horizon: f64, s0: f64, mu: Curve, sigma: Curve, beta: Curve, lambda: Curve) -> Result<Self, ModelError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ModelError::Horizon(horizon));
        }
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(ModelError::InitialPrice(s0));
        }
        for (key, curve) in [("mu", &mu), ("sigma", &sigma), ("beta", &beta), ("lambda", &lambda)] {
            if let Some(&t) = curve.node_times().iter().find(|&&t| t > horizon) {
                return Err(ModelError::NodeBeyondHorizon { key: key.into(), t, horizon });
            }
        }
        if let Some((t, v)) = sigma.nodes().find(|&(_, v)| v <= 0.0) {
            return Err(ModelError::Volatility { t, v });
        }
        if let Some((t, v)) = beta.nodes().find(|&(_, v)| v < -1.0) {
            return Err(ModelError::JumpSize { t, v });
        }
        if let Some((t, v)) = lambda.nodes().find(|&(_, v)| v < 0.0) {
            return Err(ModelError::Intensity { t, v });
        }
        Ok(MarketModel { horizon, s0, mu, sigma, beta, lambda })
    }

    /// Constant-coefficient market.
    pub fn constant(horizon: f64, s0: f64, mu: f64, sigma: f64, beta: f64, lambda: f64) -> Result<Self, ModelError> {
        Self::new(horizon, s0, Curve::constant(mu), Curve::constant(sigma), Curve::constant(beta), Curve::constant(lambda))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn mu(&self) -> &Curve {
        &self.mu
    }

    pub fn sigma(&self) -> &Curve {
        &self.sigma
    }

    pub fn beta(&self) -> &Curve {
        &self.beta
    }

    pub fn lambda(&self) -> &Curve {
        &self.lambda
    }

    /// Copy of the market with the intensity replaced.
    pub fn with_lambda(&self, lambda: Curve) -> Result<Self, ModelError> {
        Self::new(self.horizon, self.s0, self.mu.clone(), self.sigma.clone(), self.beta.clone(), lambda)
    }

    pub fn with_curve(&self, key: &str, curve: Curve) -> Result<Self, ModelError> {
        let mut m = self.clone();
        match key {
            "mu" => m.mu = curve,
            "sigma" => m.sigma = curve,
            "beta" => m.beta = curve,
            "lambda" => m.lambda = curve,
            other => return Err(ModelError::UnknownKey(other.to_string())),
        }
        Self::new(m.horizon, m.s0, m.mu, m.sigma, m.beta, m.lambda)
    }

    /// Right-continuous coefficient values at `t`.
    pub fn coeffs(&self, t: f64) -> Coeffs {
        debug_assert!((0.0..=self.horizon).contains(&t), "t={t} outside [0, T]");
        Coeffs { mu: self.mu.eval(t), sigma: self.sigma.eval(t), beta: self.beta.eval(t), lambda: self.lambda.eval(t) }
    }

    /// Left limits of the coefficients at `t`.
    pub fn coeffs_left(&self, t: f64) -> Coeffs {
        Coeffs {
            mu: self.mu.left_limit(t),
            sigma: self.sigma.left_limit(t),
            beta: self.beta.left_limit(t),
            lambda: self.lambda.left_limit(t),
        }
    }

    /// Coefficients seen from inside the interval `[a, b)`: right limits
    /// everywhere except at `b`, where the left limit is used.
    pub fn coeffs_within(&self, t: f64, b: f64) -> Coeffs {
        if t < b {
            self.coeffs(t)
        } else {
            self.coeffs_left(b)
        }
    }

    /// `Λ(t) = ∫_0^t λ`.
    pub fn cumulative_intensity(&self, t: f64) -> f64 {
        self.lambda.integral(0.0, t)
    }

    /// All curve node times in `[0, T]`, sorted, including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = [&self.mu, &self.sigma, &self.beta, &self.lambda]
            .iter()
            .flat_map(|c| c.node_times().iter().copied())
            .chain([0.0, self.horizon])
            .filter(|&t| t <= self.horizon)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `∫_a^b g(coeffs(s)) ds`, integrated segment by segment between curve
    /// nodes. Exact for piecewise-constant curves; Gauss-Legendre on each
    /// smooth piece otherwise.
    pub fn integrate_coeffs(&self, a: f64, b: f64, g: impl Fn(&Coeffs) -> f64) -> f64 {
        let all_constant = [&self.mu, &self.sigma, &self.beta, &self.lambda]
            .iter()
            .all(|c| c.interp() == Interp::PiecewiseConstant || c.node_times().len() == 1);
        let pts = self.breakpoints();
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (lo, hi) = (w[0].max(a), w[1].min(b));
            if hi <= lo {
                continue;
            }
            total += if all_constant {
                g(&self.coeffs(lo)) * (hi - lo)
            } else {
                quadrature::gauss_legendre(lo, hi, |s| g(&self.coeffs_within(s, w[1])))
            };
        }
        total
    }

    /// The key/value section this model was (or could have been) built from.
    pub fn to_raw(&self) -> RawSection {
        let mut raw = RawSection::new();
        raw.insert("T".into(), self.horizon.to_string());
        raw.insert("s0".into(), self.s0.to_string());
        raw.insert("mu".into(), self.mu.to_string());
        raw.insert("sigma".into(), self.sigma.to_string());
        raw.insert("beta".into(), self.beta.to_string());
        raw.insert("lambda".into(), self.lambda.to_string());
        raw
    }
}
