//! Before-jump solutions `Y^b`, `𝒴^b`, `Υ^b`.
//!
//! With deterministic coefficients the Brownian components vanish and each
//! equation is a backward ODE, integrated here with classical RK4 on a mesh
//! that contains every node of the model and claim curves.

use thiserror::Error;

use crate::model::{ClaimSpec, Coeffs, Curve, MarketModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error("solver diverged: non-finite {which} at step {step} (t={t})")]
    Diverged { which: Which, step: usize, t: f64 },
    #[error("positivity guard bound at t={t} (Y={y}, eps={eps}): refine grid")]
    GuardBound { t: f64, y: f64, eps: f64 },
    #[error("Y^b not strictly positive at step {step} (t={t}, Y={y})")]
    NonPositiveY { step: usize, t: f64, y: f64 },
}

/// Selects one of the three solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    /// `Y^b`, terminal value 1.
    Y,
    /// `𝒴^b`, terminal value `H^b`.
    Yc,
    /// `Υ^b`, terminal value 0.
    Ups,
}

impl Which {
    pub const ALL: [Which; 3] = [Which::Y, Which::Yc, Which::Ups];

    /// Post-jump terminal curve `ξ^a` of the lifted equation.
    pub fn xi_a(self, claim: &ClaimSpec) -> Curve {
        match self {
            Which::Y => Curve::constant(1.0),
            Which::Yc => claim.h_a.clone(),
            Which::Ups => Curve::constant(0.0),
        }
    }

    /// Terminal value `ξ^b` of the before-jump equation.
    pub fn xi_b(self, claim: &ClaimSpec) -> f64 {
        match self {
            Which::Y => 1.0,
            Which::Yc => claim.h_b,
            Which::Ups => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Which::Y => "y_b",
            Which::Yc => "yc_b",
            Which::Ups => "ups_b",
        }
    }
}

impl std::fmt::Display for Which {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Uniform mesh of `[0, T]` refined with every curve node.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverGrid {
    pub n_steps: usize,
    pub times: Vec<f64>,
}

impl SolverGrid {
    pub fn new(model: &MarketModel, claim: &ClaimSpec, n_steps: usize) -> Result<Self, SolverError> {
        let horizon = model.horizon();
        let extra: Vec<f64> = claim.h_a.node_times().iter().copied().filter(|&t| t <= horizon).collect();
        Self::with_nodes(horizon, n_steps, model.breakpoints().into_iter().chain(extra))
    }

    /// Uniform mesh of `[0, horizon]` merged with `nodes`.
    ///
    /// Uniform points closer than `1e-12·horizon` to a node are replaced by
    /// the node.
    pub fn with_nodes(horizon: f64, n_steps: usize, nodes: impl IntoIterator<Item = f64>) -> Result<Self, SolverError> {
        if n_steps == 0 {
            return Err(SolverError::NoSteps);
        }
        let tol = 1e-12 * horizon;
        let mut nodes: Vec<f64> = nodes.into_iter().filter(|&t| (0.0..=horizon).contains(&t)).collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let mut times: Vec<f64> = (0..=n_steps)
            .map(|i| if i == n_steps { horizon } else { horizon * i as f64 / n_steps as f64 })
            .filter(|&t| nodes.iter().all(|&s| (s - t).abs() > tol))
            .chain(nodes.iter().copied())
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        Ok(SolverGrid { n_steps, times })
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// Index `i` with `times[i] <= t < times[i+1]`, clamped to the last interval.
    pub fn interval(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1).min(self.times.len() - 2)
    }
}

/// Mesh values of one solution with one-sided derivatives, interpolated by
/// cubic Hermite polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Derivative at `times[i]` seen from `[times[i-1], times[i]]`.
    pub d_left: Vec<f64>,
    /// Derivative at `times[i]` seen from `[times[i], times[i+1]]`.
    pub d_right: Vec<f64>,
}

impl SolutionCurve {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(n - 2);
        if t == self.times[i] {
            return self.values[i];
        }
        if t == self.times[i + 1] {
            return self.values[i + 1];
        }
        self.hermite(i, t)
    }

    fn hermite(&self, i: usize, t: f64) -> f64 {
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.d_right[i] * h, self.d_left[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    /// Interpolated value at a point of the open interval `(times[i], times[i+1])`.
    fn inside(&self, i: usize, t: f64) -> f64 {
        self.hermite(i, t)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The three before-jump solutions on a common mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct FSolution {
    pub grid: SolverGrid,
    pub y_b: SolutionCurve,
    pub yc_b: SolutionCurve,
    pub ups_b: SolutionCurve,
    /// Positivity floor `ε` of the truncated generator.
    pub epsilon_guard: f64,
    pub guard_activated: bool,
}

impl FSolution {
    pub fn curve(&self, which: Which) -> &SolutionCurve {
        match which {
            Which::Y => &self.y_b,
            Which::Yc => &self.yc_b,
            Which::Ups => &self.ups_b,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }
}

/// Value of a solution at any `t` in `[0, T]`.
pub fn interpolate(sol: &FSolution, which: Which, t: f64) -> f64 {
    sol.curve(which).eval(t)
}

/// `exp(-∫_t^T (λ + (μ-λβ)²/σ²))`, the comparison lower bound of `Y^b`.
pub fn comparison_lower_bound(model: &MarketModel, t: f64) -> f64 {
    (-model.integrate_coeffs(t, model.horizon(), growth_rate)).exp()
}

fn growth_rate(c: &Coeffs) -> f64 {
    let m = c.compensated_drift();
    c.lambda + m * m / (c.sigma * c.sigma)
}

/// Positivity floor `ε = exp(-∫_0^T (λ + (μ-λβ)²/σ²))`.
pub fn epsilon_guard(model: &MarketModel) -> f64 {
    comparison_lower_bound(model, 0.0)
}

/// Right-hand side of `dY^b/dt` with the truncated denominator
/// `σ²·max(Y, ε) + λβ²`. Returns the slope and whether the floor changed
/// the value.
pub(crate) fn rhs_f(c: &Coeffs, y: f64, eps: f64) -> (f64, bool) {
    let m = c.compensated_drift();
    let a = c.lambda * c.beta;
    let s = c.sigma * c.sigma;
    let q = c.lambda * c.beta * c.beta;
    let k = a - m * q / s;
    let bound = y < eps && k != 0.0;
    let slope = m * m * y / s - q * m * m / (s * s) + 2.0 * m * a / s - c.lambda + c.lambda * y + k * k / (s * y.max(eps) + q);
    (slope, bound)
}

/// Coefficient `a_t` of the linear equation `d𝒴^b/dt = a_t (𝒴^b - H^a_t)`.
pub(crate) fn coefficient_a(c: &Coeffs, y: f64) -> f64 {
    let s = c.sigma * c.sigma;
    let m = c.compensated_drift();
    (c.lambda * s * y - c.lambda * c.beta * m * y) / (y * (s * y + c.lambda * c.beta * c.beta))
}

/// `R_t = λ|H^a-𝒴^b|² - |λβ(H^a-𝒴^b)|²/(σ²Y^b+λβ²)`.
pub(crate) fn driver_r(c: &Coeffs, y: f64, yc: f64, h_a: f64) -> f64 {
    let gap = h_a - yc;
    let lb = c.lambda * c.beta * gap;
    c.lambda * gap * gap - lb * lb / (c.sigma * c.sigma * y + c.lambda * c.beta * c.beta)
}

// Curve value seen from inside `[., b)`: left limit at `b`.
fn curve_within(curve: &Curve, t: f64, b: f64) -> f64 {
    if t < b {
        curve.eval(t)
    } else {
        curve.left_limit(b)
    }
}

// Backward RK4 over the mesh for a scalar equation `dx/dt = f(i, t, x)`,
// where `i` is the index of the current interval `[t_i, t_{i+1}]`.
fn integrate_backward(
    times: &[f64],
    terminal: f64,
    which: Which,
    mut f: impl FnMut(usize, f64, f64) -> f64,
) -> Result<SolutionCurve, SolverError> {
    let n = times.len();
    let mut values = vec![0.0; n];
    let mut d_left = vec![0.0; n];
    let mut d_right = vec![0.0; n];
    values[n - 1] = terminal;
    for i in (0..n - 1).rev() {
        let (t0, t1) = (times[i], times[i + 1]);
        let h = t1 - t0;
        let tm = t0 + 0.5 * h;
        let x1 = values[i + 1];
        let k1 = f(i, t1, x1);
        let k2 = f(i, tm, x1 - 0.5 * h * k1);
        let k3 = f(i, tm, x1 - 0.5 * h * k2);
        let k4 = f(i, t0, x1 - h * k3);
        let x0 = x1 - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !x0.is_finite() {
            return Err(SolverError::Diverged { which, step: i, t: t0 });
        }
        values[i] = x0;
        d_left[i + 1] = k1;
        d_right[i] = f(i, t0, x0);
        if i == 0 {
            d_left[0] = d_right[0];
        }
    }
    d_right[n - 1] = d_left[n - 1];
    Ok(SolutionCurve { times: times.to_vec(), values, d_left, d_right })
}

/// `Y^b` on the grid with an explicit floor `eps`; also reports whether the
/// floor ever changed the generator.
pub(crate) fn solve_f_with_guard(model: &MarketModel, grid: &SolverGrid, eps: f64) -> Result<(SolutionCurve, bool), SolverError> {
    let times = &grid.times;
    let mut activated = false;
    let curve = integrate_backward(times, 1.0, Which::Y, |i, t, y| {
        let (slope, bound) = rhs_f(&model.coeffs_within(t, times[i + 1]), y, eps);
        activated |= bound;
        slope
    })?;
    if let Some(i) = curve.values.iter().position(|&y| y <= 0.0) {
        return Err(SolverError::NonPositiveY { step: i, t: times[i], y: curve.values[i] });
    }
    Ok((curve, activated))
}

/// `Y^b` by backward RK4 from `Y^b(T) = 1`.
pub fn solve_f(model: &MarketModel, grid: &SolverGrid) -> Result<SolutionCurve, SolverError> {
    let eps = epsilon_guard(model);
    let (curve, activated) = solve_f_with_guard(model, grid, eps)?;
    if activated {
        return Err(guard_failure(&curve, eps));
    }
    Ok(curve)
}

fn guard_failure(curve: &SolutionCurve, eps: f64) -> SolverError {
    let i = (0..curve.values.len()).min_by(|&a, &b| curve.values[a].total_cmp(&curve.values[b])).unwrap_or(0);
    SolverError::GuardBound { t: curve.times[i], y: curve.values[i], eps }
}

// `Y^b` at `t` in `[t_i, t_{i+1}]`.
fn y_at(y_b: &SolutionCurve, i: usize, t: f64) -> f64 {
    if t == y_b.times[i] {
        y_b.values[i]
    } else if t == y_b.times[i + 1] {
        y_b.values[i + 1]
    } else {
        y_b.inside(i, t)
    }
}

/// `𝒴^b` by backward RK4 from `𝒴^b(T) = H^b`, given `Y^b` on the same grid.
pub fn solve_g(model: &MarketModel, claim: &ClaimSpec, y_b: &SolutionCurve) -> Result<SolutionCurve, SolverError> {
    let times = &y_b.times;
    integrate_backward(times, claim.h_b, Which::Yc, |i, t, yc| {
        let b = times[i + 1];
        let c = model.coeffs_within(t, b);
        coefficient_a(&c, y_at(y_b, i, t)) * (yc - curve_within(&claim.h_a, t, b))
    })
}

/// `Υ^b` by backward RK4 from `Υ^b(T) = 0`, given `Y^b` and `𝒴^b`.
pub fn solve_h(
    model: &MarketModel,
    claim: &ClaimSpec,
    y_b: &SolutionCurve,
    yc_b: &SolutionCurve,
) -> Result<SolutionCurve, SolverError> {
    let times = &y_b.times;
    integrate_backward(times, 0.0, Which::Ups, |i, t, ups| {
        let b = times[i + 1];
        let c = model.coeffs_within(t, b);
        let r = driver_r(&c, y_at(y_b, i, t), y_at(yc_b, i, t), curve_within(&claim.h_a, t, b));
        c.lambda * ups - r
    })
}

/// Solves all three equations on `grid`.
pub fn solve_on(model: &MarketModel, claim: &ClaimSpec, grid: SolverGrid) -> Result<FSolution, SolverError> {
    let y_b = solve_f(model, &grid)?;
    let yc_b = solve_g(model, claim, &y_b)?;
    let ups_b = solve_h(model, claim, &y_b, &yc_b)?;
    Ok(FSolution { grid, y_b, yc_b, ups_b, epsilon_guard: epsilon_guard(model), guard_activated: false })
}

/// Solves all three equations on the default mesh with `n_steps` uniform steps.
pub fn solve(model: &MarketModel, claim: &ClaimSpec, n_steps: usize) -> Result<FSolution, SolverError> {
    solve_on(model, claim, SolverGrid::new(model, claim, n_steps)?)
}
