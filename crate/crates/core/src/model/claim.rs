use super::{parse_curve, parse_number, Curve, Interp, ModelError, RawSection};

/// Payoff `H = H^b·1{T<τ} + H^a(τ)·1{T≥τ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClaimSpec {
    pub h_b: f64,
    pub h_a: Curve,
}

impl ClaimSpec {
    pub fn new(h_b: f64, h_a: Curve) -> Result<Self, ModelError> {
        if !h_b.is_finite() {
            return Err(ModelError::Claim { key: "h_b".into(), reason: "payoff must be finite".into() });
        }
        Ok(ClaimSpec { h_b, h_a })
    }

    /// Claim with the same payoff whether or not the jump happens.
    pub fn flat(h: f64) -> Self {
        ClaimSpec { h_b: h, h_a: Curve::constant(h) }
    }

    /// Seller of an insurance policy with premium `p` against a loss `loss`:
    /// gains `p` without a loss event, `p - loss` otherwise.
    pub fn insurance(premium: f64, loss: f64) -> Self {
        ClaimSpec { h_b: premium, h_a: Curve::constant(premium - loss) }
    }

    /// Lender of `amount` over `[0, T]` repaid in `n` instalments of
    /// `(1+r)^n/n · amount` at the dates `kT/n`.
    ///
    /// Default during `(kT/n, (k+1)T/n]` leaves the bank with
    /// `(k(1+r)^n/n - 1)·amount` for `k >= 1` and nothing for `k = 0`.
    /// The step curve switches at `kT/n` (right-continuous).
    pub fn credit(n: u32, rate: f64, amount: f64, horizon: f64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::Claim { key: "n".into(), reason: "need at least one instalment".into() });
        }
        let growth = (1.0 + rate).powi(n as i32);
        let nf = f64::from(n);
        let nodes: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let t = f64::from(k) * horizon / nf;
                let v = if k == 0 { 0.0 } else { (f64::from(k) * growth / nf - 1.0) * amount };
                (t, v)
            })
            .collect();
        let h_a = Curve::new(&nodes, Interp::PiecewiseConstant)
            .map_err(|e| ModelError::Claim { key: "credit".into(), reason: e.to_string() })?;
        Ok(ClaimSpec { h_b: (growth - 1.0) * amount, h_a })
    }

    /// Whether `H^a` jumps; such claims are accepted, but the payoff
    /// curve is not continuous.
    pub fn h_a_discontinuous(&self) -> bool {
        self.h_a.is_discontinuous()
    }

    pub fn sup_abs(&self) -> f64 {
        self.h_b.abs().max(self.h_a.max_value().abs()).max(self.h_a.min_value().abs())
    }
}

/// `H` for a jump at `tau` (use `f64::INFINITY` for no jump).
pub fn claim_payoff(claim: &ClaimSpec, tau: f64, horizon: f64) -> f64 {
    if tau > horizon {
        claim.h_b
    } else {
        claim.h_a.eval(tau)
    }
}

/// Builds a claim from a `[claim]` section: `preset = insurance` with `p`,
/// `L`; `preset = credit` with `n`, `r`, `A`; or `preset = custom` with
/// `h_b` and an `h_a` curve.
pub fn build_claim(raw: &RawSection, horizon: f64) -> Result<ClaimSpec, ModelError> {
    let preset = raw.get("preset").ok_or_else(|| ModelError::MissingKey("preset".into()))?;
    let allowed: &[&str] = match preset.trim() {
        "insurance" => &["preset", "p", "L"],
        "credit" => &["preset", "n", "r", "A"],
        "custom" => &["preset", "h_b", "h_a"],
        other => {
            return Err(ModelError::Claim {
                key: "preset".into(),
                reason: format!("unknown preset `{other}` (insurance, credit, custom)"),
            })
        }
    };
    if let Some(k) = raw.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ModelError::UnknownKey(k.clone()));
    }
    match preset.trim() {
        "insurance" => Ok(ClaimSpec::insurance(parse_number(raw, "p")?, parse_number(raw, "L")?)),
        "credit" => {
            let n = parse_number(raw, "n")?;
            if n.fract() != 0.0 || !(1.0..=10_000.0).contains(&n) {
                return Err(ModelError::Claim { key: "n".into(), reason: format!("expected a positive integer, got {n}") });
            }
            ClaimSpec::credit(n as u32, parse_number(raw, "r")?, parse_number(raw, "A")?, horizon)
        }
        _ => {
            let h_a = parse_curve(raw, "h_a")?;
            if let Some(&t) = h_a.node_times().iter().find(|&&t| t > horizon) {
                return Err(ModelError::NodeBeyondHorizon { key: "h_a".into(), t, horizon });
            }
            ClaimSpec::new(parse_number(raw, "h_b")?, h_a)
        }
    }
}
