//! Optimality diagnostics: the drift quadratic `K_t(π) = Aπ² + Bπ + C` of
//! the candidate value process, the residuals that make its minimum vanish,
//! and statistical tests on simulated `J` curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fsolver::Which;
use crate::fsolver::{comparison_lower_bound, solve, FSolution, SolverError};
use crate::lift::{driver_f, driver_g, driver_h, jump_bookkeeping_defect, DriverError, LiftedStates};
use crate::model::{ClaimSpec, Curve, MarketModel};
use crate::montecarlo::{path_rng, run_batch, uniform_probes, Estimate, PathSampler, SimConfig, SimError};
use crate::strategy::{hedge_coefficients, optimal_value, pi_star, Regime, StrategyKind};

/// Coefficients of `K(π) = aπ² + bπ + c` at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl DriftQuadratic {
    /// Coefficients at lifted states `s` and pre-jump wealth `v`.
    pub fn from_states(s: &LiftedStates, v: f64) -> Result<Self, DriverError> {
        let k = &s.coeffs;
        let lam = s.lam_g;
        let (y, z, u) = (s.y.y, s.y.z, s.y.u);
        let (yc, zc, uc) = (s.yc.y, s.yc.z, s.yc.u);
        let x = v - yc;
        let f = driver_f(k, lam, s.y)?;
        let g = driver_g(k, lam, s.y, zc, uc)?;
        let h = driver_h(k, lam, s.y, zc, uc)?;
        let a = k.sigma * k.sigma * y + lam * k.beta * k.beta * (u + y);
        let b =
            2.0 * x * (k.mu * y + k.sigma * z + lam * k.beta * u) - 2.0 * k.sigma * y * zc - 2.0 * lam * k.beta * uc * (y + u);
        let c = -f * x * x + 2.0 * x * (y * g - z * zc - lam * u * uc) + y * zc * zc + lam * uc * uc * (u + y) - h;
        Ok(DriftQuadratic { a, b, c })
    }

    pub fn eval(&self, pi: f64) -> f64 {
        (self.a * pi + self.b) * pi + self.c
    }

    pub fn argmin(&self) -> f64 {
        -self.b / (2.0 * self.a)
    }

    pub fn minimum(&self) -> f64 {
        self.c - self.b * self.b / (4.0 * self.a)
    }

    /// `max(1, |a| + |b| + |c|)`.
    pub fn scale(&self) -> f64 {
        (self.a.abs() + self.b.abs() + self.c.abs()).max(1.0)
    }
}

/// Lifted states at `t`: pre-jump left limits, or post-jump values after a
/// jump at `tau < t`.
pub fn states(sol: &FSolution, model: &MarketModel, claim: &ClaimSpec, t: f64, regime: Regime) -> LiftedStates {
    match regime {
        Regime::PreDefault => LiftedStates::pre_default(sol, model, claim, t),
        Regime::PostDefault { tau } => LiftedStates::post_default(model, claim, tau, t),
    }
}

pub fn drift_quadratic(
    t: f64,
    v_minus: f64,
    sol: &FSolution,
    model: &MarketModel,
    claim: &ClaimSpec,
    regime: Regime,
) -> Result<DriftQuadratic, DriverError> {
    DriftQuadratic::from_states(&states(sol, model, claim, t, regime), v_minus)
}

/// The three expressions that the choice of drivers makes vanish.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrakResiduals {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FrakResiduals {
    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }
}

pub fn frak_residuals(s: &LiftedStates) -> Result<FrakResiduals, DriverError> {
    let k = &s.coeffs;
    let lam = s.lam_g;
    let (y, z, u) = (s.y.y, s.y.z, s.y.u);
    let (zc, uc) = (s.yc.z, s.yc.u);
    let f = driver_f(k, lam, s.y)?;
    let g = driver_g(k, lam, s.y, zc, uc)?;
    let h = driver_h(k, lam, s.y, zc, uc)?;
    let d = s.denominator();
    let p = k.mu * y + k.sigma * z + lam * k.beta * u;
    let q = lam * k.beta * uc * (y + u) + k.sigma * y * zc;
    Ok(FrakResiduals {
        a: -f - p * p / d,
        b: 2.0 * (p * q / d + g * y - z * zc - lam * u * uc),
        c: -h + zc * zc * y + lam * (u + y) * uc * uc - q * q / d,
    })
}

/// One named diagnostic: passes when `value <= threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub checks: Vec<Check>,
    /// Informational remarks that do not affect the outcome.
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    /// Adds a check; names must be unique.
    pub fn push(&mut self, check: Check) {
        assert!(self.get(&check.name).is_none(), "duplicate check `{}`", check.name);
        self.checks.push(check);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Expected shape of a `J` curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveShape {
    /// Martingale: constant mean.
    Flat,
    /// Submartingale: nondecreasing mean.
    Nondecreasing,
}

// gap measured in standard errors; zero gaps count as zero, noiseless
// positive gaps as infinite
fn in_stderrs(gap: f64, se: f64) -> f64 {
    if gap <= 0.0 {
        gap.min(0.0) / se.max(f64::MIN_POSITIVE)
    } else {
        gap / se
    }
}

/// Largest departure of the curve from `shape`, in standard errors.
/// For `Flat` every point is compared with the first one using its own
/// standard error; for `Nondecreasing` every pair `s < t` is compared with
/// the combined standard error.
pub fn submartingale_test(name: &str, curve: &[Estimate], shape: CurveShape) -> Check {
    let mut worst = f64::NEG_INFINITY;
    match shape {
        CurveShape::Flat => {
            let j0 = curve[0].mean;
            for e in &curve[1..] {
                worst = worst.max(in_stderrs((e.mean - j0).abs(), e.stderr.hypot(curve[0].stderr)));
            }
        }
        CurveShape::Nondecreasing => {
            for (i, s) in curve.iter().enumerate() {
                for t in &curve[i + 1..] {
                    worst = worst.max(in_stderrs(s.mean - t.mean, s.stderr.hypot(t.stderr)));
                }
            }
        }
    }
    Check::at_most(name, worst.max(0.0), 3.0)
}

/// Relative gap between the value with `λ ≡ 0` and
/// `exp(-∫_0^T μ²/σ²)(x - h_b)²`.
pub fn classical_limit_check(model: &MarketModel, h_b: f64, x: f64, n_steps: usize) -> Result<Check, SolverError> {
    let m0 = model.with_lambda(Curve::constant(0.0)).expect("zero intensity is valid");
    let sol = solve(&m0, &ClaimSpec::flat(h_b), n_steps)?;
    let expected = (-m0.integrate_coeffs(0.0, m0.horizon(), |c| c.mu * c.mu / (c.sigma * c.sigma))).exp() * (x - h_b).powi(2);
    let got = optimal_value(x, &sol);
    Ok(Check::at_most("classical_limit", (got - expected).abs() / expected.abs().max(1.0), 1e-8))
}

/// Options of [`run_verification`].
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub sim: SimConfig,
    /// Perturbation sizes of `π* + ε`.
    pub perturbations: Vec<f64>,
    /// Number of intervals of the `J` probe grid.
    pub probe_intervals: usize,
    /// Random drift-quadratic probes.
    pub algebra_probes: usize,
}

impl VerifyOptions {
    pub fn new(sim: SimConfig) -> Self {
        VerifyOptions { sim, perturbations: vec![-0.2, -0.05, 0.05, 0.2], probe_intervals: 8, algebra_probes: 1000 }
    }
}

/// Worst values of the algebraic checks over random `(t, V, regime)` probes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraSummary {
    pub min_a: f64,
    /// `max |min K| / scale`.
    pub min_k: f64,
    /// `max |argmin K - π*| / max(1, |π*|)`.
    pub argmin_gap: f64,
    /// `max |K(π* ± 1) - a| / scale`.
    pub symmetry: f64,
    /// `min K(π)/scale` over a scan of positions.
    pub negative_k: f64,
    /// `max` residual `/ scale`.
    pub frak: f64,
}

/// Evaluates the drift algebra at `n` random probes drawn from `seed`.
pub fn algebra_probes(
    sol: &FSolution,
    model: &MarketModel,
    claim: &ClaimSpec,
    n: usize,
    seed: u64,
) -> Result<AlgebraSummary, DriverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = model.horizon();
    let spread = 1.0 + claim.sup_abs();
    let mut out = AlgebraSummary { min_a: f64::INFINITY, min_k: 0.0, argmin_gap: 0.0, symmetry: 0.0, negative_k: 0.0, frak: 0.0 };
    for _ in 0..n {
        let t = rng.random::<f64>() * horizon;
        let v = (2.0 * rng.random::<f64>() - 1.0) * 3.0 * spread;
        let regime =
            if rng.random::<f64>() < 0.25 { Regime::PostDefault { tau: rng.random::<f64>() * t } } else { Regime::PreDefault };
        let s = states(sol, model, claim, t, regime);
        let q = DriftQuadratic::from_states(&s, v)?;
        let scale = q.scale();
        let star = match regime {
            Regime::PreDefault => pi_star(t, v, sol, model, claim, regime),
            // after the horizon the vertex is the classical feedback
            Regime::PostDefault { .. } => {
                let (e, f) = hedge_coefficients(&s);
                e * v - f
            }
        };
        out.min_a = out.min_a.min(q.a);
        out.min_k = out.min_k.max(q.eval(star).abs() / scale);
        out.argmin_gap = out.argmin_gap.max((q.argmin() - star).abs() / star.abs().max(1.0));
        out.symmetry = out.symmetry.max(((q.eval(star + 1.0) - q.a).abs()).max((q.eval(star - 1.0) - q.a).abs()) / scale);
        for k in -10..=10 {
            let p = star + f64::from(k) * 0.37 * spread;
            out.negative_k = out.negative_k.min(q.eval(p) / scale);
        }
        out.frak = out.frak.max(frak_residuals(&s)?.max_abs() / scale);
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

/// Runs every diagnostic on one market, claim and initial wealth.
pub fn run_verification(
    model: &MarketModel,
    claim: &ClaimSpec,
    sol: &FSolution,
    x: f64,
    opts: &VerifyOptions,
) -> Result<DiagnosticsReport, VerifyError> {
    let mut report = DiagnosticsReport::default();
    if claim.h_a_discontinuous() {
        report.notes.push("post-jump payoff curve h_a is discontinuous".into());
    }
    let n = sol.grid.times.len() - 1;
    let terminal = (sol.y_b.values[n] - 1.0).abs().max((sol.yc_b.values[n] - claim.h_b).abs()).max(sol.ups_b.values[n].abs());
    report.push(Check::at_most("terminal_conditions", terminal, 0.0));
    let below = sol
        .grid
        .times
        .iter()
        .zip(&sol.y_b.values)
        .map(|(&t, &y)| comparison_lower_bound(model, t) - y)
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(Check::at_most("y_b_lower_bound", below, 1e-6));
    report.push(Check::at_most("y_b_upper_bound", sol.y_b.max() - 1.0, 1e-12));
    report.push(Check::at_most("ups_b_nonnegative", 0.0 - sol.ups_b.min(), 1e-12));
    report.push(Check::at_most("guard_inactive", f64::from(u8::from(sol.guard_activated)), 0.0));

    let fine = solve(model, claim, 10 * sol.grid.n_steps)?;
    let self_gap = Which::ALL.iter().map(|&w| (sol.curve(w).values[0] - fine.curve(w).values[0]).abs()).fold(0.0, f64::max);
    report.push(Check::at_most("solver_self_convergence", self_gap, 1e-8));

    let alg = algebra_probes(sol, model, claim, opts.algebra_probes, opts.sim.seed)?;
    report.push(Check { name: "drift_a_positive".into(), value: alg.min_a, threshold: 0.0, pass: alg.min_a > 0.0 });
    report.push(Check::at_most("drift_min_zero", alg.min_k, 1e-10));
    report.push(Check::at_most("drift_argmin_is_pi_star", alg.argmin_gap, 1e-10));
    report.push(Check::at_most("drift_symmetric", alg.symmetry, 1e-10));
    report.push(Check::at_most("drift_nonnegative", -alg.negative_k, 1e-10));
    report.push(Check::at_most("frak_residuals", alg.frak, 1e-12));

    let mut kinds = vec![StrategyKind::Optimal, StrategyKind::Constant(0.0)];
    kinds.extend(opts.perturbations.iter().map(|&e| StrategyKind::perturbed_optimal(e)));
    let probes = uniform_probes(model.horizon(), opts.probe_intervals);
    let batch = run_batch(model, claim, sol, &kinds, x, &opts.sim, &probes)?;
    let value = optimal_value(x, sol);
    report.push(Check::at_most("mse_matches_value", batch.mse(0).z_score(value), 3.0));
    for (i, &eps) in opts.perturbations.iter().enumerate() {
        let d = batch.paired_difference(2 + i, 0);
        report.push(Check::at_most(format!("dominance_eps_{eps:+}"), in_stderrs(-d.mean, d.stderr).max(0.0), 3.0));
        if eps.abs() >= 0.2 {
            let strict = Check {
                name: format!("strict_dominance_eps_{eps:+}"),
                value: d.mean / d.stderr,
                threshold: 3.0,
                pass: d.mean > 3.0 * d.stderr,
            };
            report.push(strict);
        }
    }
    report.push(submartingale_test("j_optimal_flat", &batch.j_curve(0), CurveShape::Flat));
    report.push(submartingale_test("j_zero_nondecreasing", &batch.j_curve(1), CurveShape::Nondecreasing));

    report.push(classical_limit_check(model, claim.h_b, x, sol.grid.n_steps)?);
    let p_default = 1.0 - (-model.cumulative_intensity(model.horizon())).exp();
    report.push(Check::at_most("default_frequency", batch.default_frequency().z_score(p_default), 3.0));
    report.push(Check::at_most("brownian_variance", batch.brownian_variance().z_score(model.horizon()), 3.0));
    report.push(Check::at_most("price_martingale", batch.price_martingale().z_score(model.s0()), 3.0));

    let sampler = PathSampler::new(model, &sol.grid.times);
    let mut jump = 0.0f64;
    for i in 0..100 {
        let path = sampler.sample(&mut path_rng(opts.sim.seed ^ 0x9e37_79b9_7f4a_7c15, i));
        for w in Which::ALL {
            if let Some(d) = jump_bookkeeping_defect(&path, sol, model, claim, w) {
                jump = jump.max(d.abs());
            }
        }
    }
    report.push(Check::at_most("jump_bookkeeping", jump, 0.0));
    Ok(report)
}
