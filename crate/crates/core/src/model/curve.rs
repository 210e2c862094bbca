use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Interpolation rule between curve nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    /// Right-continuous step function with left limits.
    PiecewiseConstant,
    /// Continuous linear interpolation, flat beyond the last node.
    PiecewiseLinear,
}

impl Interp {
    pub fn tag(self) -> &'static str {
        match self {
            Interp::PiecewiseConstant => "pc",
            Interp::PiecewiseLinear => "pl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("curve has no nodes")]
    Empty,
    #[error("first node must sit at t=0, found t={0}")]
    FirstNodeNotAtZero(f64),
    #[error("node times must be strictly increasing (t={prev} followed by t={next})")]
    Unordered { prev: f64, next: f64 },
    #[error("non-finite node ({t}, {v})")]
    NonFinite { t: f64, v: f64 },
    #[error("malformed curve `{text}`: {reason}")]
    Malformed { text: String, reason: String },
}

/// A deterministic function of time on `[0, T]` given by nodes.
///
/// Evaluation beyond the last node holds the last value.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    times: Vec<f64>,
    values: Vec<f64>,
    interp: Interp,
}

impl Curve {
    pub fn new(nodes: &[(f64, f64)], interp: Interp) -> Result<Self, CurveError> {
        let first = nodes.first().ok_or(CurveError::Empty)?;
        if first.0 != 0.0 {
            return Err(CurveError::FirstNodeNotAtZero(first.0));
        }
        for &(t, v) in nodes {
            if !t.is_finite() || !v.is_finite() {
                return Err(CurveError::NonFinite { t, v });
            }
        }
        for w in nodes.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(CurveError::Unordered { prev: w[0].0, next: w[1].0 });
            }
        }
        Ok(Curve { times: nodes.iter().map(|n| n.0).collect(), values: nodes.iter().map(|n| n.1).collect(), interp })
    }

    pub fn constant(v: f64) -> Self {
        Curve { times: vec![0.0], values: vec![v], interp: Interp::PiecewiseConstant }
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn node_times(&self) -> &[f64] {
        &self.times
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    /// True when the curve has jumps.
    pub fn is_discontinuous(&self) -> bool {
        self.interp == Interp::PiecewiseConstant && !self.is_constant()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    // index of the last node with time <= t (0 for t < 0)
    fn segment(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    fn linear(&self, k: usize, t: f64) -> f64 {
        match self.times.get(k + 1) {
            Some(&t1) => {
                let (t0, v0, v1) = (self.times[k], self.values[k], self.values[k + 1]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
            None => self.values[k],
        }
    }

    /// Right-continuous value at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.segment(t);
        match self.interp {
            Interp::PiecewiseConstant => self.values[k],
            Interp::PiecewiseLinear => self.linear(k, t),
        }
    }

    /// Left limit at `t` (the value itself at `t = 0`).
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.interp {
            Interp::PiecewiseConstant => {
                let k = self.times.partition_point(|&s| s < t).saturating_sub(1);
                self.values[k]
            }
            Interp::PiecewiseLinear => self.eval(t),
        }
    }

    /// Exact `∫_a^b curve(s) ds` for `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let mut k = self.segment(a);
        let mut lo = a;
        loop {
            let hi = self.times.get(k + 1).map_or(b, |&t| t.min(b));
            total += match self.interp {
                Interp::PiecewiseConstant => self.values[k] * (hi - lo),
                Interp::PiecewiseLinear => 0.5 * (self.linear(k, lo) + self.linear(k, hi)) * (hi - lo),
            };
            if hi >= b {
                return total;
            }
            lo = hi;
            k += 1;
        }
    }

    /// Smallest `t` in `[0, t_max]` with `∫_0^t curve = target`, if any.
    ///
    /// Requires a nonnegative curve. The inversion is closed-form on every
    /// segment.
    pub fn integral_inverse(&self, target: f64, t_max: f64) -> Option<f64> {
        if target <= 0.0 {
            return Some(0.0);
        }
        let mut acc = 0.0;
        for k in 0..self.times.len() {
            let lo = self.times[k];
            if lo >= t_max {
                break;
            }
            let hi = self.times.get(k + 1).map_or(t_max, |&t| t.min(t_max));
            let piece = match self.interp {
                Interp::PiecewiseConstant => self.values[k] * (hi - lo),
                Interp::PiecewiseLinear => 0.5 * (self.linear(k, lo) + self.linear(k, hi)) * (hi - lo),
            };
            if acc + piece >= target {
                let rem = target - acc;
                let v0 = self.values[k];
                let ds = match self.interp {
                    Interp::PiecewiseConstant => rem / v0,
                    Interp::PiecewiseLinear => {
                        let slope = match self.times.get(k + 1) {
                            Some(&t1) => (self.values[k + 1] - v0) / (t1 - lo),
                            None => 0.0,
                        };
                        // root of v0·s + slope·s²/2 = rem, written to avoid cancellation
                        2.0 * rem / (v0 + (v0 * v0 + 2.0 * slope * rem).max(0.0).sqrt())
                    }
                };
                return Some((lo + ds).min(hi));
            }
            acc += piece;
        }
        None
    }

    /// Same curve with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Curve {
        Curve { times: self.times.clone(), values: self.values.iter().map(|&v| f(v)).collect(), interp: self.interp }
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.times.len() == 1 && self.interp == Interp::PiecewiseConstant {
            return write!(f, "constant {}", self.values[0]);
        }
        write!(f, "nodes {} ", self.interp.tag())?;
        for (i, (t, v)) in self.nodes().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}:{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Curve {
    type Err = CurveError;

    /// Parses `constant <v>` or `nodes <pc|pl> t1:v1,t2:v2,...`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let malformed = |reason: &str| CurveError::Malformed { text: text.to_string(), reason: reason.to_string() };
        let text_trim = text.trim();
        let (head, rest) = text_trim.split_once(char::is_whitespace).unwrap_or((text_trim, ""));
        match head {
            "constant" => {
                let v: f64 = rest.trim().parse().map_err(|_| malformed("expected a number"))?;
                if !v.is_finite() {
                    return Err(CurveError::NonFinite { t: 0.0, v });
                }
                Ok(Curve::constant(v))
            }
            "nodes" => {
                let rest = rest.trim();
                let (kind, list) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                let interp = match kind {
                    "pc" => Interp::PiecewiseConstant,
                    "pl" => Interp::PiecewiseLinear,
                    _ => return Err(malformed("expected interpolation kind `pc` or `pl`")),
                };
                let mut nodes = Vec::new();
                for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (t, v) = item.split_once(':').ok_or_else(|| malformed("node must read `t:v`"))?;
                    let t: f64 = t.trim().parse().map_err(|_| malformed("bad node time"))?;
                    let v: f64 = v.trim().parse().map_err(|_| malformed("bad node value"))?;
                    nodes.push((t, v));
                }
                Curve::new(&nodes, interp)
            }
            _ => Err(malformed("expected `constant <v>` or `nodes <pc|pl> t:v,...`")),
        }
    }
}
