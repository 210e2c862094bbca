//! Path simulation and Monte Carlo estimates of hedging errors.
//!
//! Every path draws from its own ChaCha stream selected by the path index,
//! so results do not depend on how paths are spread over worker threads.
//! Per-path results are collected in path order and reduced sequentially
//! with compensated sums.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::fsolver::{FSolution, SolverError, SolverGrid};
use crate::model::{claim_payoff, ClaimSpec, MarketModel};
use crate::strategy::{wealth_euler_with, HedgeTable, StrategyKind, WealthPath};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("n_paths must be at least 1")]
    NoPaths,
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error("probe time {0} outside [0, T]")]
    Probe(f64),
    #[error(transparent)]
    Grid(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::NoPaths);
        }
        if self.n_steps == 0 {
            return Err(SimError::NoSteps);
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

impl Estimate {
    /// Two-pass mean and standard error `sd/√n`.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, n_paths: 0 };
        }
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let stderr = if n > 1 {
            let ss = compensated_sum(xs.iter().map(|&x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, n_paths: n }
    }

    /// Number of standard errors separating the mean from `target`
    /// (0 when they coincide exactly, infinite for a nonzero gap with no noise).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.stderr
        }
    }
}

/// One simulated scenario on a mesh that contains `τ` when `τ ≤ T`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketPath {
    pub times: Vec<f64>,
    /// `dw[k] = W(times[k+1]) - W(times[k])`.
    pub dw: Vec<f64>,
    /// Jump time; `f64::INFINITY` when there is no jump before `T`.
    pub tau: f64,
    /// Price at every mesh time, frozen after `T ∧ τ`.
    pub s: Vec<f64>,
    /// Jump indicator `N` at every mesh time.
    pub n: Vec<u8>,
    /// Index of `τ` in `times` when `τ ≤ T`.
    pub tau_index: Option<usize>,
    // whether `τ` was added to the base mesh rather than found on it
    tau_inserted: bool,
}

impl MarketPath {
    pub fn jumped(&self) -> bool {
        self.tau_index.is_some()
    }

    /// Index of `T ∧ τ`.
    pub fn stop_index(&self) -> usize {
        self.tau_index.unwrap_or(self.times.len() - 1)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("path is never empty")
    }

    /// Same scenario on the mesh keeping every `factor`-th base point (and `τ`).
    pub fn coarsen(&self, factor: usize) -> MarketPath {
        assert!(factor >= 1);
        let n = self.times.len();
        let base_index = |k: usize| match self.tau_index {
            Some(j) if self.tau_inserted && k > j => k - 1,
            _ => k,
        };
        let last_base = base_index(n - 1);
        let keep: Vec<usize> = (0..n)
            .filter(|&k| {
                let is_tau = self.tau_inserted && Some(k) == self.tau_index;
                let b = base_index(k);
                is_tau || b % factor == 0 || b == last_base
            })
            .collect();
        let dw = keep.windows(2).map(|w| compensated_sum(self.dw[w[0]..w[1]].iter().copied())).collect();
        let tau_index = self.tau_index.map(|j| keep.iter().position(|&k| k == j).expect("tau is kept"));
        MarketPath {
            times: keep.iter().map(|&k| self.times[k]).collect(),
            dw,
            tau: self.tau,
            s: keep.iter().map(|&k| self.s[k]).collect(),
            n: keep.iter().map(|&k| self.n[k]).collect(),
            tau_index,
            tau_inserted: self.tau_inserted,
        }
    }
}

/// Jump time by inversion of the cumulative intensity:
/// `τ = inf{t : Λ(t) ≥ -ln u}`, or infinity when `Λ(T) < -ln u`.
pub fn sample_default(model: &MarketModel, uniform: f64) -> f64 {
    let target = -uniform.ln();
    model.lambda().integral_inverse(target, model.horizon()).unwrap_or(f64::INFINITY)
}

/// Random stream of path `index` under master seed `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Path generator on a fixed base mesh with per-step coefficients cached.
pub struct PathSampler<'a> {
    model: &'a MarketModel,
    times: Vec<f64>,
    sqrt_dt: Vec<f64>,
    // (μ - λβ - σ²/2) and σ on each step, left-point values
    log_drift: Vec<f64>,
    sigma: Vec<f64>,
}

impl<'a> PathSampler<'a> {
    pub fn new(model: &'a MarketModel, times: &[f64]) -> Self {
        let steps = times.windows(2);
        let coeffs: Vec<_> = times[..times.len() - 1].iter().map(|&t| model.coeffs(t)).collect();
        PathSampler {
            model,
            times: times.to_vec(),
            sqrt_dt: steps.map(|w| (w[1] - w[0]).sqrt()).collect(),
            log_drift: coeffs.iter().map(|c| c.compensated_drift() - 0.5 * c.sigma * c.sigma).collect(),
            sigma: coeffs.iter().map(|c| c.sigma).collect(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Draws a path: first the jump time, then one normal per step, plus a
    /// Brownian-bridge normal for the step that `τ` splits. The log-price is
    /// advanced exactly for coefficients constant over each step.
    pub fn sample(&self, rng: &mut impl Rng) -> MarketPath {
        let horizon = *self.times.last().expect("mesh is never empty");
        let tau = sample_default(self.model, rng.sample(Open01));
        let n_steps = self.times.len() - 1;
        let cap = n_steps + 2;
        let mut times = Vec::with_capacity(cap);
        let mut dw = Vec::with_capacity(cap);
        let mut s = Vec::with_capacity(cap);
        let mut n = Vec::with_capacity(cap);
        let mut tau_index = None;
        let mut tau_inserted = false;
        let mut price = self.model.s0();
        let mut jumped = false;
        times.push(self.times[0]);
        s.push(price);
        n.push(0);
        for i in 0..n_steps {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            let z: f64 = rng.sample(StandardNormal);
            let dw_full = self.sqrt_dt[i] * z;
            if !jumped && tau > t0 && tau < t1 {
                let z2: f64 = rng.sample(StandardNormal);
                let h = t1 - t0;
                let a = tau - t0;
                let dw1 = a / h * dw_full + (a * (t1 - tau) / h).sqrt() * z2;
                price *= (self.log_drift[i] * a + self.sigma[i] * dw1).exp();
                price *= 1.0 + self.model.coeffs(tau).beta;
                jumped = true;
                tau_index = Some(times.len());
                tau_inserted = true;
                times.push(tau);
                dw.push(dw1);
                s.push(price);
                n.push(1);
                dw.push(dw_full - dw1);
            } else {
                if !jumped {
                    price *= (self.log_drift[i] * (t1 - t0) + self.sigma[i] * dw_full).exp();
                    if tau == t1 {
                        price *= 1.0 + self.model.coeffs(tau).beta;
                        jumped = true;
                        tau_index = Some(times.len());
                    }
                }
                dw.push(dw_full);
            }
            times.push(t1);
            s.push(price);
            n.push(u8::from(jumped));
        }
        debug_assert!(tau > horizon || jumped);
        MarketPath { times, dw, tau, s, n, tau_index, tau_inserted }
    }
}

/// Simulates one path on the base mesh `times` (which should contain all
/// curve nodes).
pub fn simulate_path(model: &MarketModel, times: &[f64], rng: &mut impl Rng) -> MarketPath {
    PathSampler::new(model, times).sample(rng)
}

/// Per-path results of a batch.
#[derive(Clone, Debug, PartialEq)]
struct PathOutcome {
    losses: Vec<f64>,
    // [kind][probe]
    j: Vec<Vec<f64>>,
    tau: f64,
    w_total: f64,
    discounted_price: f64,
}

/// Hedging errors of several strategies evaluated on a common set of paths.
#[derive(Clone, Debug, PartialEq)]
pub struct MseBatch {
    pub kinds: Vec<StrategyKind>,
    pub probes: Vec<f64>,
    /// `losses[kind][path] = |V_{T∧τ} - H|²`.
    pub losses: Vec<Vec<f64>>,
    /// `j[kind][probe][path]`.
    pub j: Vec<Vec<Vec<f64>>>,
    pub taus: Vec<f64>,
    /// `W_T` per path.
    pub w_total: Vec<f64>,
    /// `S_{T∧τ} exp(-∫_0^{T∧τ} μ)` per path.
    pub discounted_price: Vec<f64>,
    pub horizon: f64,
}

impl MseBatch {
    pub fn n_paths(&self) -> usize {
        self.taus.len()
    }

    pub fn mse(&self, kind: usize) -> Estimate {
        Estimate::from_samples(&self.losses[kind])
    }

    /// Estimate of `MSE(a) - MSE(b)` from paired per-path differences.
    pub fn paired_difference(&self, a: usize, b: usize) -> Estimate {
        let d: Vec<f64> = self.losses[a].iter().zip(&self.losses[b]).map(|(x, y)| x - y).collect();
        Estimate::from_samples(&d)
    }

    pub fn j_curve(&self, kind: usize) -> Vec<Estimate> {
        self.j[kind].iter().map(|col| Estimate::from_samples(col)).collect()
    }

    /// Fraction of paths with `τ ≤ T`.
    pub fn default_frequency(&self) -> Estimate {
        let hits: Vec<f64> = self.taus.iter().map(|&t| f64::from(u8::from(t <= self.horizon))).collect();
        Estimate::from_samples(&hits)
    }

    /// Sample second moment of `W_T`, to compare with `T`.
    pub fn brownian_variance(&self) -> Estimate {
        let sq: Vec<f64> = self.w_total.iter().map(|w| w * w).collect();
        Estimate::from_samples(&sq)
    }

    pub fn price_martingale(&self) -> Estimate {
        Estimate::from_samples(&self.discounted_price)
    }
}

/// `J_t = Y_t|V_{t∧τ} - 𝒴_t|² + Υ_t` for each probe, with probes read at
/// the last mesh time not after them.
fn j_values(w: &WealthPath, path: &MarketPath, sol: &FSolution, claim: &ClaimSpec, probes: &[f64]) -> Vec<f64> {
    probes
        .iter()
        .map(|&t| {
            if t >= path.tau {
                let gap = w.terminal() - claim.h_a.eval(path.tau);
                return gap * gap;
            }
            let k = w.times.partition_point(|&s| s <= t * (1.0 + 1e-12) + 1e-300).saturating_sub(1);
            let tk = w.times[k];
            let gap = w.v[k] - sol.yc_b.eval(tk);
            sol.y_b.eval(tk) * gap * gap + sol.ups_b.eval(tk)
        })
        .collect()
}

/// Evaluates every strategy in `kinds` on the same `sim.n_paths` paths.
pub fn run_batch(
    model: &MarketModel,
    claim: &ClaimSpec,
    sol: &FSolution,
    kinds: &[StrategyKind],
    x: f64,
    sim: &SimConfig,
    probes: &[f64],
) -> Result<MseBatch, SimError> {
    sim.validate()?;
    let horizon = model.horizon();
    if let Some(&p) = probes.iter().find(|&&p| !(0.0..=horizon).contains(&p)) {
        return Err(SimError::Probe(p));
    }
    let grid = SolverGrid::new(model, claim, sim.n_steps)?;
    let sampler = PathSampler::new(model, &grid.times);
    let table = HedgeTable::new(sol, model, claim, &grid.times);
    let outcomes: Vec<PathOutcome> = (0..sim.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(&mut path_rng(sim.seed, i));
            let payoff = claim_payoff(claim, path.tau, horizon);
            let mut losses = Vec::with_capacity(kinds.len());
            let mut j = Vec::with_capacity(kinds.len());
            for kind in kinds {
                let w = wealth_euler_with(&path, kind, x, &table);
                let gap = w.terminal() - payoff;
                losses.push(gap * gap);
                j.push(j_values(&w, &path, sol, claim, probes));
            }
            let stop = path.stop_index();
            let t_stop = path.times[stop];
            PathOutcome {
                losses,
                j,
                tau: path.tau,
                w_total: compensated_sum(path.dw.iter().copied()),
                discounted_price: path.s[stop] * (-model.mu().integral(0.0, t_stop)).exp(),
            }
        })
        .collect();
    let column = |f: &dyn Fn(&PathOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
    Ok(MseBatch {
        kinds: kinds.to_vec(),
        probes: probes.to_vec(),
        losses: (0..kinds.len()).map(|k| column(&|o| o.losses[k])).collect(),
        j: (0..kinds.len()).map(|k| (0..probes.len()).map(|p| column(&|o| o.j[k][p])).collect()).collect(),
        taus: column(&|o| o.tau),
        w_total: column(&|o| o.w_total),
        discounted_price: column(&|o| o.discounted_price),
        horizon,
    })
}

/// Mean and standard error of `|V_{T∧τ} - H|²` for one strategy.
pub fn estimate_mse(
    model: &MarketModel,
    claim: &ClaimSpec,
    sol: &FSolution,
    kind: &StrategyKind,
    x: f64,
    sim: &SimConfig,
) -> Result<Estimate, SimError> {
    Ok(run_batch(model, claim, sol, std::slice::from_ref(kind), x, sim, &[])?.mse(0))
}

/// Sample means of `J_t` at each probe time for one strategy.
pub fn estimate_j_curve(
    model: &MarketModel,
    claim: &ClaimSpec,
    sol: &FSolution,
    kind: &StrategyKind,
    x: f64,
    sim: &SimConfig,
    probe_times: &[f64],
) -> Result<Vec<Estimate>, SimError> {
    Ok(run_batch(model, claim, sol, std::slice::from_ref(kind), x, sim, probe_times)?.j_curve(0))
}

/// `k·T/m` for `k = 0..=m`.
pub fn uniform_probes(horizon: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|k| if k == m { horizon } else { horizon * k as f64 / m as f64 }).collect()
}
