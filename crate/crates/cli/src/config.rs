//! Experiment files: `[section]` headers, `key = value` lines, `#` comments.
//!
//! Sections are `market`, `claim`, `solve`, `sim` and `run`; `solve` and
//! `sim` are optional and fall back to defaults. Every error carries the line it was detected on when one exists.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use jumphedge::{build_claim, build_market, ClaimSpec, MarketModel, ModelError, RawSection, SimConfig, StrategyKind};
use thiserror::Error;

const SECTIONS: [&str; 5] = ["market", "claim", "solve", "sim", "run"];
const MARKET_KEYS: [&str; 6] = ["T", "s0", "mu", "sigma", "beta", "lambda"];
const CURVE_KEYS: [&str; 4] = ["mu", "sigma", "beta", "lambda"];

pub const DEFAULT_SOLVE_STEPS: usize = 2000;
pub const DEFAULT_SIM: SimConfig = SimConfig { n_paths: 10_000, n_steps: 500, seed: 0 };
pub const DEFAULT_PERTURBATIONS: [f64; 4] = [-0.2, -0.05, 0.05, 0.2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    At { line: usize, message: String },
    #[error("{0}")]
    Missing(String),
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError::At { line, message: message.into() }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::At { line, .. } => Some(*line),
            ConfigError::Missing(_) => None,
        }
    }
}

/// One axis of a `sweep` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

/// Options of the `[run]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Initial wealth.
    pub x: f64,
    /// Strategies compared by `simulate`.
    pub strategies: Vec<StrategyKind>,
    /// Perturbation sizes used by `verify`.
    pub perturbations: Vec<f64>,
    pub probe_intervals: usize,
    pub algebra_probes: usize,
    /// At most two axes.
    pub sweep: Vec<SweepAxis>,
}

/// A fully validated experiment.
///
/// The market and claim sections are kept as text so that sweeps can
/// substitute single keys and rebuild.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub market: RawSection,
    pub claim: RawSection,
    pub solve_steps: usize,
    pub sim: SimConfig,
    pub run: RunOptions,
}

struct Entry {
    value: String,
    line: usize,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn lex(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{content}`")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::at(line, format!("unknown section [{name}] (expected one of {})", SECTIONS.join(", "))));
            }
            if let Some(first) = sections.get(name) {
                return Err(ConfigError::at(line, format!("duplicate section [{name}] (first declared on line {})", first.line)));
            }
            sections.insert(name.to_string(), Section { line, entries: BTreeMap::new() });
            current = Some(name.to_string());
            continue;
        }
        let (key, value) =
            content.split_once('=').ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::at(line, "empty key"));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("empty value for `{key}`")));
        }
        let name = current.as_ref().ok_or_else(|| ConfigError::at(line, format!("`{key}` appears before any section header")))?;
        let section = sections.get_mut(name).expect("current section exists");
        if let Some(first) = section.entries.get(key) {
            return Err(ConfigError::at(line, format!("duplicate key `{key}` in [{name}] (first on line {})", first.line)));
        }
        section.entries.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(sections)
}

fn required<'a>(sections: &'a BTreeMap<String, Section>, name: &str) -> Result<&'a Section, ConfigError> {
    sections.get(name).ok_or_else(|| ConfigError::Missing(format!("missing required section [{name}]")))
}

fn raw_section(s: &Section) -> RawSection {
    s.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
}

fn model_error(s: &Section, name: &str, e: &ModelError) -> ConfigError {
    let line = e.key().and_then(|k| s.entries.get(k)).map_or(s.line, |e| e.line);
    ConfigError::at(line, format!("[{name}] {e}"))
}

fn check_keys(s: &Section, name: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    match s.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, e)) => {
            Err(ConfigError::at(e.line, format!("unknown key `{k}` in [{name}] (expected one of {})", allowed.join(", "))))
        }
        None => Ok(()),
    }
}

fn number<T: std::str::FromStr>(e: &Entry, key: &str, what: &str) -> Result<T, ConfigError> {
    e.value.parse().map_err(|_| ConfigError::at(e.line, format!("`{key}`: expected {what}, got `{}`", e.value)))
}

fn count(e: &Entry, key: &str) -> Result<usize, ConfigError> {
    let n: usize = number(e, key, "a positive integer")?;
    if n == 0 {
        return Err(ConfigError::at(e.line, format!("`{key}` must be at least 1")));
    }
    Ok(n)
}

fn number_list(e: &Entry, key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| ConfigError::at(e.line, format!("`{key}`: expected a comma-separated list of numbers, got `{text}`")))?;
    Ok(values)
}

/// Parses one strategy: `optimal`, `constant <c>`, `proportional <k>` or
/// `perturbed <eps>` (the optimal rule shifted by `eps`).
pub fn parse_strategy(text: &str) -> Option<StrategyKind> {
    let text = text.trim();
    let (head, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let value = rest.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    match (head, value) {
        ("optimal", _) if rest.trim().is_empty() => Some(StrategyKind::Optimal),
        ("constant", Some(v)) => Some(StrategyKind::Constant(v)),
        ("proportional", Some(v)) => Some(StrategyKind::Proportional(v)),
        ("perturbed", Some(v)) => Some(StrategyKind::perturbed_optimal(v)),
        _ => None,
    }
}

fn join_numbers(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

/// Parses and validates an experiment file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = lex(text)?;

    let market_s = required(&sections, "market")?;
    let market = raw_section(market_s);
    let model = build_market(&market).map_err(|e| model_error(market_s, "market", &e))?;

    let claim_s = required(&sections, "claim")?;
    let claim = raw_section(claim_s);
    build_claim(&claim, model.horizon()).map_err(|e| model_error(claim_s, "claim", &e))?;

    let mut solve_steps = DEFAULT_SOLVE_STEPS;
    if let Some(s) = sections.get("solve") {
        check_keys(s, "solve", &["n_steps"])?;
        if let Some(e) = s.entries.get("n_steps") {
            solve_steps = count(e, "n_steps")?;
        }
    }

    let mut sim = DEFAULT_SIM;
    if let Some(s) = sections.get("sim") {
        check_keys(s, "sim", &["n_paths", "n_steps", "seed"])?;
        if let Some(e) = s.entries.get("n_paths") {
            sim.n_paths = count(e, "n_paths")?;
        }
        if let Some(e) = s.entries.get("n_steps") {
            sim.n_steps = count(e, "n_steps")?;
        }
        if let Some(e) = s.entries.get("seed") {
            sim.seed = number(e, "seed", "an unsigned 64-bit integer")?;
        }
    }

    let run_s = required(&sections, "run")?;
    check_keys(run_s, "run", &["x", "strategies", "perturbations", "probe_intervals", "algebra_probes", "sweep", "sweep2"])?;
    let x_entry =
        run_s.entries.get("x").ok_or_else(|| ConfigError::at(run_s.line, "[run] missing required key `x` (initial wealth)"))?;
    let x: f64 = number(x_entry, "x", "a number")?;
    if !x.is_finite() {
        return Err(ConfigError::at(x_entry.line, "`x` must be finite"));
    }

    let strategies = match run_s.entries.get("strategies") {
        Some(e) => e
            .value
            .split(',')
            .map(|item| {
                parse_strategy(item).ok_or_else(|| {
                    ConfigError::at(
                        e.line,
                        format!(
                            "`strategies`: unknown strategy `{}` (optimal, constant <c>, proportional <k>, perturbed <eps>)",
                            item.trim()
                        ),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => {
            let mut v = vec![StrategyKind::Optimal, StrategyKind::Constant(0.0)];
            v.extend(DEFAULT_PERTURBATIONS.iter().map(|&e| StrategyKind::perturbed_optimal(e)));
            v
        }
    };
    let perturbations = match run_s.entries.get("perturbations") {
        Some(e) => number_list(e, "perturbations", &e.value)?,
        None => DEFAULT_PERTURBATIONS.to_vec(),
    };
    let probe_intervals = run_s.entries.get("probe_intervals").map(|e| count(e, "probe_intervals")).transpose()?.unwrap_or(8);
    let algebra_probes = run_s.entries.get("algebra_probes").map(|e| count(e, "algebra_probes")).transpose()?.unwrap_or(1000);

    let mut sweep = Vec::new();
    for key in ["sweep", "sweep2"] {
        let Some(e) = run_s.entries.get(key) else { continue };
        if key == "sweep2" && sweep.is_empty() {
            return Err(ConfigError::at(e.line, "`sweep2` requires `sweep`"));
        }
        let (param, list) = e
            .value
            .split_once(':')
            .ok_or_else(|| ConfigError::at(e.line, format!("`{key}`: expected `<param>: v1, v2, ...`, got `{}`", e.value)))?;
        let param = param.trim().to_string();
        let known = param == "x" || MARKET_KEYS.contains(&param.as_str()) || (param != "preset" && claim.contains_key(&param));
        if !known {
            return Err(ConfigError::at(
                e.line,
                format!("`{key}`: `{param}` is not x, a market key or a key of the claim section"),
            ));
        }
        if sweep.iter().any(|a: &SweepAxis| a.param == param) {
            return Err(ConfigError::at(e.line, format!("`{key}`: `{param}` is already swept")));
        }
        sweep.push(SweepAxis { param, values: number_list(e, key, list)? });
    }

    let cfg = ExperimentConfig {
        market,
        claim,
        solve_steps,
        sim,
        run: RunOptions { x, strategies, perturbations, probe_intervals, algebra_probes, sweep },
    };
    for (i, axis) in cfg.run.sweep.iter().enumerate() {
        let line = run_s.entries[if i == 0 { "sweep" } else { "sweep2" }].line;
        for &v in &axis.values {
            cfg.point(&[(axis.param.as_str(), v)]).map_err(|e| ConfigError::at(line, format!("`{}` = {v}: {e}", axis.param)))?;
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn model(&self) -> Result<MarketModel, ModelError> {
        build_market(&self.market)
    }

    pub fn claim_spec(&self) -> Result<ClaimSpec, ModelError> {
        build_claim(&self.claim, self.model()?.horizon())
    }

    /// Market, claim and initial wealth with the given parameters replaced.
    /// Curve parameters become constant curves.
    pub fn point(&self, overrides: &[(&str, f64)]) -> Result<(MarketModel, ClaimSpec, f64), ModelError> {
        let mut market = self.market.clone();
        let mut claim = self.claim.clone();
        let mut x = self.run.x;
        for &(param, v) in overrides {
            if param == "x" {
                x = v;
            } else if CURVE_KEYS.contains(&param) {
                market.insert(param.to_string(), format!("constant {v}"));
            } else if MARKET_KEYS.contains(&param) {
                market.insert(param.to_string(), v.to_string());
            } else {
                claim.insert(param.to_string(), v.to_string());
            }
        }
        let model = build_market(&market)?;
        let claim = build_claim(&claim, model.horizon())?;
        Ok((model, claim, x))
    }

    /// Canonical text; parsing it gives back an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, entries: &mut dyn Iterator<Item = (String, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        section("market", &mut self.market.clone().into_iter());
        section("claim", &mut self.claim.clone().into_iter());
        section("solve", &mut std::iter::once(("n_steps".into(), self.solve_steps.to_string())));
        section(
            "sim",
            &mut [
                ("n_paths".to_string(), self.sim.n_paths.to_string()),
                ("n_steps".to_string(), self.sim.n_steps.to_string()),
                ("seed".to_string(), self.sim.seed.to_string()),
            ]
            .into_iter(),
        );
        let r = &self.run;
        let mut run = vec![
            ("x".to_string(), r.x.to_string()),
            ("strategies".to_string(), r.strategies.iter().map(StrategyKind::label).collect::<Vec<_>>().join(", ")),
            ("perturbations".to_string(), join_numbers(&r.perturbations)),
            ("probe_intervals".to_string(), r.probe_intervals.to_string()),
            ("algebra_probes".to_string(), r.algebra_probes.to_string()),
        ];
        for (axis, key) in r.sweep.iter().zip(["sweep", "sweep2"]) {
            run.push((key.to_string(), format!("{}: {}", axis.param, join_numbers(&axis.values))));
        }
        section("run", &mut run.into_iter());
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}
