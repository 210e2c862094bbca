//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the solver: the before-jump value `Y^b` comes from an
//! implicit Gauss-Legendre Runge-Kutta integrator of the compact generator,
//! and `𝒴^b`, `Υ^b` from the integrating-factor representations evaluated by
//! nested composite Simpson rules.
#![allow(dead_code)]

use jumphedge::{ClaimSpec, Coeffs, MarketModel};

pub fn constants_model() -> MarketModel {
    MarketModel::constant(1.0, 100.0, 0.05, 0.2, -0.5, 0.3).unwrap()
}

pub fn insurance() -> ClaimSpec {
    ClaimSpec::insurance(1.0, 0.8)
}

pub const X0: f64 = 0.9;

/// `dY/dt = ((μ-λβ)Y + λβ)²/(σ²Y + λβ²) - λ + λY`.
pub fn compact_rhs(c: &Coeffs, y: f64) -> f64 {
    let num = c.compensated_drift() * y + c.lambda * c.beta;
    num * num / (c.sigma * c.sigma * y + c.lambda * c.beta * c.beta) - c.lambda + c.lambda * y
}

/// Backward two-stage Gauss-Legendre (order 4, A-stable) solution of
/// `dY/dt = compact_rhs` from `Y(T) = 1` on `m` uniform steps.
/// Returns the values at `t_k = kT/m`.
pub fn gauss_legendre_y(model: &MarketModel, m: usize) -> Vec<f64> {
    let horizon = model.horizon();
    let r3 = 3f64.sqrt();
    let c = [0.5 - r3 / 6.0, 0.5 + r3 / 6.0];
    let a = [[0.25, 0.25 - r3 / 6.0], [0.25 + r3 / 6.0, 0.25]];
    let mut y = vec![0.0; m + 1];
    y[m] = 1.0;
    let h = -horizon / m as f64;
    for k in (0..m).rev() {
        let t1 = horizon * (k + 1) as f64 / m as f64;
        let y1 = y[k + 1];
        let f = |t: f64, v: f64| compact_rhs(&model.coeffs(t.clamp(0.0, horizon)), v);
        let mut kk = [f(t1, y1); 2];
        for _ in 0..100 {
            let next = [
                f(t1 + c[0] * h, y1 + h * (a[0][0] * kk[0] + a[0][1] * kk[1])),
                f(t1 + c[1] * h, y1 + h * (a[1][0] * kk[0] + a[1][1] * kk[1])),
            ];
            let delta = (next[0] - kk[0]).abs().max((next[1] - kk[1]).abs());
            kk = next;
            if delta < 1e-17 {
                break;
            }
        }
        y[k] = y1 + h * 0.5 * (kk[0] + kk[1]);
    }
    y
}

/// Reference values at `t = 0` and on the coarse grid `t = 4jT/m`.
pub struct Reference {
    pub y0: f64,
    pub yc0: f64,
    pub ups0: f64,
    /// `(t, Y^b, 𝒴^b, Υ^b)` on every fourth fine point.
    pub coarse: Vec<(f64, f64, f64, f64)>,
}

fn coefficient_a(c: &Coeffs, y: f64) -> f64 {
    let s = c.sigma * c.sigma;
    let m = c.compensated_drift();
    (c.lambda * s * y - c.lambda * c.beta * m * y) / (y * (s * y + c.lambda * c.beta * c.beta))
}

fn driver_r(c: &Coeffs, y: f64, yc: f64, h_a: f64) -> f64 {
    let gap = h_a - yc;
    c.lambda * gap * gap - (c.lambda * c.beta * gap).powi(2) / (c.sigma * c.sigma * y + c.lambda * c.beta * c.beta)
}

/// `𝒴_t = (Γ_T/Γ_t)H^b + ∫_t^T (Γ_s/Γ_t) a_s H^a_s ds` with `Γ_t = exp(-∫_0^t a)`,
/// and `Υ_t = ∫_t^T R_s exp(-∫_t^s λ) ds`.
///
/// `m` fine steps, a multiple of 4; model and claim curves must be smooth.
pub fn representation_reference(model: &MarketModel, claim: &ClaimSpec, m: usize) -> Reference {
    assert_eq!(m % 4, 0);
    assert_eq!(model.breakpoints(), vec![0.0, model.horizon()], "oracle needs smooth coefficients");
    assert!(!claim.h_a_discontinuous());
    let horizon = model.horizon();
    let h = horizon / m as f64;
    let t = |k: usize| horizon * k as f64 / m as f64;
    let y = gauss_legendre_y(model, m);
    let a: Vec<f64> = (0..=m).map(|k| coefficient_a(&model.coeffs(t(k)), y[k])).collect();

    // Γ exponent at even points: Simpson over pairs of fine steps
    let half = m / 2;
    let mut big_a = vec![0.0; half + 1];
    for j in 0..half {
        big_a[j + 1] = big_a[j] + h / 3.0 * (a[2 * j] + 4.0 * a[2 * j + 1] + a[2 * j + 2]);
    }
    // 𝒴 at points 4j: backward Simpson over pairs of double steps
    let quarter = m / 4;
    let g = |j2: usize| (-big_a[j2]).exp() * a[2 * j2] * claim.h_a.eval(t(2 * j2));
    let mut tail = vec![0.0; quarter + 1];
    for j in (0..quarter).rev() {
        tail[j] = tail[j + 1] + 2.0 * h / 3.0 * (g(2 * j) + 4.0 * g(2 * j + 1) + g(2 * j + 2));
    }
    let gamma_t = (-big_a[half]).exp();
    let yc: Vec<f64> = (0..=quarter).map(|j| (big_a[2 * j]).exp() * (gamma_t * claim.h_b + tail[j])).collect();
    // Υ from R on points 4j, Simpson over pairs of quadruple steps
    let lam = |k: usize| model.cumulative_intensity(t(k));
    let r = |j: usize| driver_r(&model.coeffs(t(4 * j)), y[4 * j], yc[j], claim.h_a.eval(t(4 * j))) * (-lam(4 * j)).exp();
    assert_eq!(quarter % 2, 0);
    let eighth = quarter / 2;
    let mut ups_tail = vec![0.0; eighth + 1];
    for j in (0..eighth).rev() {
        ups_tail[j] = ups_tail[j + 1] + 4.0 * h / 3.0 * (r(2 * j) + 4.0 * r(2 * j + 1) + r(2 * j + 2));
    }
    let coarse = (0..=eighth)
        .map(|j| {
            let k = 8 * j;
            (t(k), y[k], yc[2 * j], lam(k).exp() * ups_tail[j])
        })
        .collect();
    Reference { y0: y[0], yc0: yc[0], ups0: ups_tail[0], coarse }
}

/// `E|x - H|² = (x - H^b)² e^{-Λ(T)} + ∫_0^T (x - H^a_t)² λ_t e^{-Λ(t)} dt`,
/// by composite Simpson on `m` (even) steps between consecutive breakpoints.
pub fn unhedged_mse(model: &MarketModel, claim: &ClaimSpec, x: f64, m: usize) -> f64 {
    let horizon = model.horizon();
    let mut cuts: Vec<f64> = model.breakpoints();
    cuts.extend(claim.h_a.node_times().iter().copied().filter(|&t| t <= horizon));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = (x - claim.h_b).powi(2) * (-model.cumulative_intensity(horizon)).exp();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = (hi - lo) / m as f64;
        // values seen from inside the segment
        let f = |k: usize| {
            let t = lo + h * k as f64;
            let (lam, ha) = if k == m {
                (model.lambda().left_limit(hi), claim.h_a.left_limit(hi))
            } else {
                (model.lambda().eval(t), claim.h_a.eval(t))
            };
            (x - ha).powi(2) * lam * (-model.cumulative_intensity(t)).exp()
        };
        let mut s = f(0) + f(m);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        total += s * h / 3.0;
    }
    total
}
