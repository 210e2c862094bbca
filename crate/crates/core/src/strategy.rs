//! Optimal position, wealth dynamics and the optimal value.

use crate::fsolver::FSolution;
use crate::lift::LiftedStates;
use crate::model::{ClaimSpec, Coeffs, Curve, MarketModel};
use crate::montecarlo::MarketPath;

/// Whether the jump has happened at the evaluation time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// `t ≤ τ`: left-limit states, `λ^G = λ`.
    PreDefault,
    /// `t > τ`: the hedging horizon has ended.
    PostDefault { tau: f64 },
}

/// A self-financing position rule, in currency held in the risky asset.
#[derive(Clone, Debug, PartialEq)]
pub enum StrategyKind {
    Optimal,
    Constant(f64),
    /// `π = k·V₋`.
    Proportional(f64),
    /// `π = base(V₋) + magnitude·direction(t)`, with the base rule fed back
    /// the perturbed wealth.
    Perturbed {
        base: Box<StrategyKind>,
        direction: Curve,
        magnitude: f64,
    },
}

impl StrategyKind {
    /// `π* + magnitude` with a unit direction.
    pub fn perturbed_optimal(magnitude: f64) -> Self {
        StrategyKind::Perturbed { base: Box::new(StrategyKind::Optimal), direction: Curve::constant(1.0), magnitude }
    }

    /// Position at `t` given pre-jump wealth `v` and the hedge coefficients there.
    pub fn position(&self, t: f64, v: f64, h: &HedgePoint) -> f64 {
        match self {
            StrategyKind::Optimal => h.e * v - h.f,
            StrategyKind::Constant(c) => *c,
            StrategyKind::Proportional(k) => k * v,
            StrategyKind::Perturbed { base, direction, magnitude } => base.position(t, v, h) + magnitude * direction.eval(t),
        }
    }

    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match self {
            StrategyKind::Optimal => "optimal".into(),
            StrategyKind::Constant(c) => format!("constant {c}"),
            StrategyKind::Proportional(k) => format!("proportional {k}"),
            StrategyKind::Perturbed { base, direction, magnitude } => {
                if **base == StrategyKind::Optimal && direction.is_constant() && direction.node_values()[0] == 1.0 {
                    format!("perturbed {magnitude}")
                } else {
                    format!("perturbed {magnitude} ({}; {direction})", base.label())
                }
            }
        }
    }
}

/// Wealth along one path up to `T ∧ τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct WealthPath {
    pub times: Vec<f64>,
    /// Wealth at each time; the last entry is `V_{T∧τ}` after any jump.
    pub v: Vec<f64>,
    /// Position held on `(times[k], times[k+1]]`; the last entry is the
    /// position exposed to the jump, or 0 when there is none.
    pub pi: Vec<f64>,
    /// `V_{τ-}` when the jump happens before `T`.
    pub v_before_jump: Option<f64>,
}

impl WealthPath {
    pub fn terminal(&self) -> f64 {
        *self.v.last().expect("wealth path is never empty")
    }
}

/// Coefficients of the optimal feedback `π* = E·V₋ - F` and the market
/// coefficients at one pre-jump instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HedgePoint {
    pub t: f64,
    pub e: f64,
    pub f: f64,
    /// Drift of `dS/S₋` between jumps, `μ - λβ`.
    pub drift: f64,
    pub sigma: f64,
    pub beta: f64,
}

/// `(E, F)` from lifted states:
/// `E = -(μY + σZ + λ^G βU)/D`,
/// `F = -(λ^G β𝒰(Y+U) + μY𝒴 + λ^G βU𝒴 + σZ𝒴 + σ𝒵Y)/D`.
pub fn hedge_coefficients(s: &LiftedStates) -> (f64, f64) {
    let c = &s.coeffs;
    let (y, z, u) = (s.y.y, s.y.z, s.y.u);
    let (yc, zc, uc) = (s.yc.y, s.yc.z, s.yc.u);
    let lb = s.lam_g * c.beta;
    let d = s.denominator();
    let e = -(c.mu * y + c.sigma * z + lb * u) / d;
    let f = -(lb * uc * (y + u) + c.mu * y * yc + lb * u * yc + c.sigma * z * yc + c.sigma * zc * y) / d;
    (e, f)
}

/// Hedge point at `t ≤ τ` using the coefficient values `coeffs`.
pub fn hedge_point_with(sol: &FSolution, claim: &ClaimSpec, t: f64, coeffs: Coeffs) -> HedgePoint {
    let s = LiftedStates::from_values(coeffs, sol.y_b.eval(t), sol.yc_b.eval(t), sol.ups_b.eval(t), claim.h_a.eval(t));
    let (e, f) = hedge_coefficients(&s);
    HedgePoint { t, e, f, drift: coeffs.compensated_drift(), sigma: coeffs.sigma, beta: coeffs.beta }
}

pub fn hedge_point(sol: &FSolution, model: &MarketModel, claim: &ClaimSpec, t: f64) -> HedgePoint {
    hedge_point_with(sol, claim, t, model.coeffs(t))
}

/// Optimal position at `t` for pre-jump wealth `v_minus`; zero once the
/// horizon `T ∧ τ` has passed.
pub fn pi_star(t: f64, v_minus: f64, sol: &FSolution, model: &MarketModel, claim: &ClaimSpec, regime: Regime) -> f64 {
    match regime {
        Regime::PostDefault { .. } => 0.0,
        Regime::PreDefault if t > model.horizon() => 0.0,
        Regime::PreDefault => StrategyKind::Optimal.position(t, v_minus, &hedge_point(sol, model, claim, t)),
    }
}

/// `Y^b(0)(x - 𝒴^b(0))² + Υ^b(0)`.
pub fn optimal_value(x: f64, sol: &FSolution) -> f64 {
    let gap = x - sol.yc_b.values[0];
    sol.y_b.values[0] * gap * gap + sol.ups_b.values[0]
}

/// Hedge points precomputed on a mesh; other instants are computed on demand.
pub struct HedgeTable<'a> {
    sol: &'a FSolution,
    model: &'a MarketModel,
    claim: &'a ClaimSpec,
    points: Vec<HedgePoint>,
}

impl<'a> HedgeTable<'a> {
    pub fn new(sol: &'a FSolution, model: &'a MarketModel, claim: &'a ClaimSpec, times: &[f64]) -> Self {
        let points = times.iter().map(|&t| hedge_point(sol, model, claim, t)).collect();
        HedgeTable { sol, model, claim, points }
    }

    pub fn compute(&self, t: f64) -> HedgePoint {
        hedge_point(self.sol, self.model, self.claim, t)
    }

    /// Hedge points for the increasing `times`, reusing table entries where
    /// the times coincide.
    fn walk<'b>(&'b self, times: &'b [f64]) -> impl Iterator<Item = HedgePoint> + 'b {
        let mut cursor = 0;
        times.iter().map(move |&t| {
            while cursor < self.points.len() && self.points[cursor].t < t {
                cursor += 1;
            }
            match self.points.get(cursor) {
                Some(p) if p.t == t => *p,
                _ => self.compute(t),
            }
        })
    }
}

/// Euler scheme for `dV = π((μ - λ^G β)dt + σ dW) + πβ dN` up to `T ∧ τ`.
pub fn wealth_euler(
    path: &MarketPath,
    kind: &StrategyKind,
    x: f64,
    sol: &FSolution,
    model: &MarketModel,
    claim: &ClaimSpec,
) -> WealthPath {
    let table = HedgeTable::new(sol, model, claim, &[]);
    wealth_euler_with(path, kind, x, &table)
}

/// [`wealth_euler`] reading hedge coefficients from a precomputed table.
pub fn wealth_euler_with(path: &MarketPath, kind: &StrategyKind, x: f64, table: &HedgeTable<'_>) -> WealthPath {
    let end = path.stop_index();
    let times = &path.times[..=end];
    let mut v = Vec::with_capacity(end + 1);
    let mut pi = Vec::with_capacity(end + 1);
    let mut state = x;
    let mut v_before_jump = None;
    for (k, h) in table.walk(times).enumerate() {
        v.push(state);
        if k < end {
            let p = kind.position(h.t, state, &h);
            pi.push(p);
            state += p * (h.drift * (times[k + 1] - times[k]) + h.sigma * path.dw[k]);
        } else if path.jumped() {
            let p = kind.position(h.t, state, &h);
            pi.push(p);
            v_before_jump = Some(state);
            state += p * h.beta;
            v[k] = state;
        } else {
            pi.push(0.0);
        }
    }
    WealthPath { times: times.to_vec(), v, pi, v_before_jump }
}

/// Optimal wealth `V* = Φ(x + Ψ)` with `Φ = exp(∫(Em - σ²E²/2)ds + ∫σE dW)`
/// and `Ψ = -∫(F/Φ)(m - Eσ²)ds - ∫(F/Φ)σ dW`, `m = μ - λβ`, followed by the
/// jump value `(1 + E_τ β_τ)V_{τ-} - F_τ β_τ`.
///
/// The deterministic `ds` integral in `Φ` uses Simpson's rule per step;
/// the stochastic integrals are left-point sums over the path increments.
pub fn wealth_closed_form(path: &MarketPath, x: f64, sol: &FSolution, model: &MarketModel, claim: &ClaimSpec) -> WealthPath {
    let end = path.stop_index();
    let times = &path.times[..=end];
    let point = |t: f64, b: f64| hedge_point_with(sol, claim, t, model.coeffs_within(t, b));
    let exponent = |h: &HedgePoint| h.e * h.drift - 0.5 * h.sigma * h.sigma * h.e * h.e;
    let mut log_phi = 0.0f64;
    let mut psi = 0.0;
    let mut v = Vec::with_capacity(end + 1);
    let mut pi = Vec::with_capacity(end + 1);
    for k in 0..end {
        let (t0, t1) = (times[k], times[k + 1]);
        let dt = t1 - t0;
        let h0 = point(t0, t1);
        let phi = log_phi.exp();
        v.push(phi * (x + psi));
        pi.push(h0.e * v[k] - h0.f);
        let hm = point(t0 + 0.5 * dt, t1);
        let h1 = point(t1, t1);
        log_phi += dt / 6.0 * (exponent(&h0) + 4.0 * exponent(&hm) + exponent(&h1)) + h0.sigma * h0.e * path.dw[k];
        let ratio = h0.f / phi;
        psi -= ratio * (h0.drift - h0.e * h0.sigma * h0.sigma) * dt + ratio * h0.sigma * path.dw[k];
    }
    let v_end = log_phi.exp() * (x + psi);
    if path.jumped() {
        let h = hedge_point(sol, model, claim, times[end]);
        pi.push(h.e * v_end - h.f);
        v.push((1.0 + h.e * h.beta) * v_end - h.f * h.beta);
        WealthPath { times: times.to_vec(), v, pi, v_before_jump: Some(v_end) }
    } else {
        pi.push(0.0);
        v.push(v_end);
        WealthPath { times: times.to_vec(), v, pi, v_before_jump: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsolver::solve;
    use crate::montecarlo::{path_rng, PathSampler};

    fn fixture() -> (MarketModel, ClaimSpec, FSolution) {
        let m = MarketModel::constant(1.0, 100.0, 0.05, 0.2, -0.5, 0.3).unwrap();
        let c = ClaimSpec::insurance(1.0, 0.8);
        let sol = solve(&m, &c, 200).unwrap();
        (m, c, sol)
    }

    #[test]
    fn classical_delta_without_intensity() {
        let m = MarketModel::constant(1.0, 1.0, 0.05, 0.2, -0.5, 0.0).unwrap();
        let c = ClaimSpec::insurance(1.0, 0.8);
        let sol = solve(&m, &c, 100).unwrap();
        for (t, v) in [(0.0, 0.9), (0.5, 1.3), (0.77, -0.2)] {
            let p = pi_star(t, v, &sol, &m, &c, Regime::PreDefault);
            assert!((p - (1.0 - v) * 0.05 / 0.04).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_position_at_target_without_jump_exposure() {
        let (m, _, _) = fixture();
        let c = ClaimSpec::flat(0.8);
        let sol = solve(&m, &c, 100).unwrap();
        assert!(pi_star(0.3, 0.8, &sol, &m, &c, Regime::PreDefault).abs() < 1e-15);
        assert_eq!(pi_star(0.3, 0.2, &sol, &m, &c, Regime::PostDefault { tau: 0.1 }), 0.0);
    }

    #[test]
    fn value_is_a_parabola_with_vertex_at_the_claim_price() {
        let (_, _, sol) = fixture();
        let x0 = sol.yc_b.values[0];
        assert_eq!(optimal_value(x0, &sol), sol.ups_b.values[0]);
        let (l, r) = (optimal_value(x0 - 0.3, &sol), optimal_value(x0 + 0.3, &sol));
        assert!((l - r).abs() < 1e-14);
        assert!(l > optimal_value(x0, &sol));
    }

    #[test]
    fn euler_wealth_is_self_consistent() {
        let (m, c, sol) = fixture();
        let sampler = PathSampler::new(&m, &sol.grid.times);
        for i in 0..20 {
            let path = sampler.sample(&mut path_rng(5, i));
            let w = wealth_euler(&path, &StrategyKind::Optimal, 0.9, &sol, &m, &c);
            assert_eq!(w.v[0], 0.9);
            for k in 0..w.times.len() - 1 {
                let p = pi_star(w.times[k], w.v[k], &sol, &m, &c, Regime::PreDefault);
                assert_eq!(p, w.pi[k]);
            }
            if let Some(before) = w.v_before_jump {
                let t = *w.times.last().unwrap();
                assert_eq!(pi_star(t, before, &sol, &m, &c, Regime::PreDefault), *w.pi.last().unwrap());
            }
            let zero = wealth_euler(&path, &StrategyKind::Constant(0.0), 0.9, &sol, &m, &c);
            assert!(zero.v.iter().all(|&v| v == 0.9));
        }
    }

    #[test]
    fn closed_form_tracks_euler() {
        let (m, c, sol) = fixture();
        let sampler = PathSampler::new(&m, &sol.grid.times);
        for i in 0..20 {
            let path = sampler.sample(&mut path_rng(9, i));
            let e = wealth_euler(&path, &StrategyKind::Optimal, 0.9, &sol, &m, &c).terminal();
            let cf = wealth_closed_form(&path, 0.9, &sol, &m, &c).terminal();
            assert!((e - cf).abs() < 0.05, "{e} vs {cf}");
        }
    }

    #[test]
    fn closed_form_without_offset_is_the_exponential() {
        let m = MarketModel::constant(1.0, 1.0, 0.05, 0.2, -0.5, 0.0).unwrap();
        let c = ClaimSpec::flat(0.0);
        let sol = solve(&m, &c, 50).unwrap();
        let sampler = PathSampler::new(&m, &sol.grid.times);
        let path = sampler.sample(&mut path_rng(1, 0));
        let w = wealth_closed_form(&path, 1.0, &sol, &m, &c);
        let e = -0.05 / 0.04;
        let mut log_phi = 0.0f64;
        for (k, &dw) in path.dw.iter().enumerate() {
            let dt = path.times[k + 1] - path.times[k];
            log_phi += (e * 0.05 - 0.5 * 0.04 * e * e) * dt + 0.2 * e * dw;
        }
        assert!((w.terminal() - f64::exp(log_phi)).abs() < 1e-12);
    }
}
