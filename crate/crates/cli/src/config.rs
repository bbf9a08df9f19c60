//! Experiment configuration: a TOML file with `[params]` and `[window]`
//! sections, overridden key by key from the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SleTrace,
    GffProbes,
    Gmc,
    Minkowski,
    NaturalParam,
    Zipper,
    MarkovCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SleTrace => "sle-trace",
            Experiment::GffProbes => "gff-probes",
            Experiment::Gmc => "gmc",
            Experiment::Minkowski => "minkowski",
            Experiment::NaturalParam => "natural-param",
            Experiment::Zipper => "zipper",
            Experiment::MarkovCheck => "markov-check",
        }
    }

    /// Whether the experiment samples SLE curves with a matching `γ = √κ`,
    /// which needs `κ > 0`.
    fn needs_gamma(self) -> bool {
        matches!(self, Experiment::NaturalParam | Experiment::Zipper | Experiment::MarkovCheck)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Numeric parameters. Every field is optional; each experiment falls back
/// to its own defaults for the ones it reads.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Only checked against `κ`; the experiments use `γ = √κ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Capacity horizon `T` of the sampled driving paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_lift: Option<f64>,
    /// Probe scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Decreasing scales for neighbourhood areas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    /// `"bulk"` or `"boundary"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    /// `"dirichlet"` or `"neumann"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    /// Real interval of a reference measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    /// Imaginary interval of a bulk reference measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Moment orders reported for chaos masses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<f64>>,
    /// Number of curves when `replicates` counts field draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_gap: Option<f64>,
    /// Largest gap between consecutive trace points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gap: Option<f64>,
    /// Number of quantum-time checkpoints of the zipper clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
    /// Stationarity checkpoints as fractions of the quantum time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Counting region `exclusion ≤ |z| ≤ radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub radius: f64,
    #[serde(default)]
    pub exclusion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicates: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
}

fn default_out() -> PathBuf {
    PathBuf::from("slelab-out")
}

/// A configuration problem, located at a line of the file or at a flag.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub origin: Option<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Some(o) => write!(f, "{o}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Where the text of the configuration came from, for error locations.
struct Source<'a> {
    name: String,
    text: &'a str,
    overridden: Vec<String>,
}

impl Source<'_> {
    /// Location of `key`, written `section.name` for keys inside a section.
    fn locate(&self, key: &str) -> Option<String> {
        // A bare name (as in serde messages) may sit in any section.
        let bare = !key.contains('.');
        if let Some(k) = self.overridden.iter().rev().find(|k| *k == key || bare && k.ends_with(&format!(".{key}"))) {
            return Some(format!("flag --set {k}"));
        }
        let (section, name) = match key.rsplit_once('.') {
            Some((s, n)) => (Some(s), n),
            None => (None, key),
        };
        let mut current: Option<String> = None;
        for (i, line) in self.text.lines().enumerate() {
            let l = line.trim();
            if let Some(h) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                current = Some(h.trim().to_string());
                continue;
            }
            let Some((k, _)) = l.split_once('=') else { continue };
            let k = k.trim().trim_matches('"');
            let in_section = current.as_deref() == section || bare;
            if (k == name && in_section) || (current.is_none() && k == key) {
                return Some(format!("{}:{}", self.name, i + 1));
            }
        }
        Some(self.name.clone())
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { message: message.into(), origin: self.locate(key) }
    }
}

/// Parses `key=value`, reading the value as TOML and falling back to a
/// bare string.
pub fn parse_override(arg: &str) -> Result<(String, toml::Value), ConfigError> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| ConfigError { message: format!("expected key=value, got `{arg}`"), origin: Some("flag --set".into()) })?;
    let key = key.trim().to_string();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| format!("empty key `{key}`"))?;
    let mut t = table;
    for p in parts {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| format!("`{p}` is not a section"))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `overrides` in order and validates.
    /// `experiment` from the command line must agree with the file.
    pub fn load(
        path: Option<&Path>,
        experiment: Option<Experiment>,
        overrides: &[(String, toml::Value)],
    ) -> Result<Self, ConfigError> {
        let (name, text) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError { message: format!("cannot read config: {e}"), origin: Some(p.display().to_string()) })?;
                (p.display().to_string(), text)
            }
            None => ("<flags>".to_string(), String::new()),
        };
        Self::parse_with(&name, &text, experiment, overrides)
    }

    /// [`ExperimentConfig::load`] on text already in memory.
    pub fn parse_with(
        name: &str,
        text: &str,
        experiment: Option<Experiment>,
        overrides: &[(String, toml::Value)],
    ) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1));
            ConfigError {
                message: e.message().to_string(),
                origin: Some(match line {
                    Some(l) => format!("{name}:{l}"),
                    None => name.to_string(),
                }),
            }
        })?;
        let mut source = Source { name: name.to_string(), text, overridden: Vec::new() };
        if let Some(exp) = experiment {
            match table.get("experiment").and_then(|v| v.as_str()) {
                Some(given) if given != exp.name() => {
                    return Err(source.error("experiment", format!("config is for `{given}` but `{exp}` was requested")));
                }
                _ => {
                    table.insert("experiment".into(), toml::Value::String(exp.name().into()));
                }
            }
        }
        for (key, value) in overrides {
            set_path(&mut table, key, value.clone())
                .map_err(|m| ConfigError { message: m, origin: Some(format!("flag --set {key}")) })?;
            source.overridden.push(key.clone());
        }
        let config: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            // Point at the offending key when the message names one.
            let key = msg.split('`').nth(1).map(str::to_string);
            match key {
                Some(k) => source.error(&k, msg),
                None => ConfigError { message: msg, origin: Some(name.to_string()) },
            }
        })?;
        config.check(&source)?;
        Ok(config)
    }

    /// The configuration as TOML; parsing it back gives the same value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn check(&self, src: &Source) -> Result<(), ConfigError> {
        let p = &self.params;
        if self.replicates < 1 {
            return Err(src.error("replicates", "replicates must be at least 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(src.error("seed", "seed must fit in 63 bits"));
        }
        if let Some(k) = p.kappa {
            if !(0.0..4.0).contains(&k) {
                return Err(src.error("params.kappa", format!("kappa = {k} outside [0, 4)")));
            }
            if self.experiment.needs_gamma() && k == 0.0 {
                return Err(src.error("params.kappa", format!("{} needs kappa > 0", self.experiment)));
            }
        }
        if let Some(g) = p.gamma {
            let k = p.kappa.unwrap_or(g * g);
            if !(g > 0.0) || (g * g - k).abs() > 1e-12 * k.max(1.0) {
                return Err(src.error("params.gamma", format!("gamma = {g} does not satisfy gamma^2 = kappa = {k}")));
            }
        }
        if let Some(s) = &p.schedule {
            if s.is_empty() || s.iter().any(|e| !(*e > 0.0)) {
                return Err(src.error("params.schedule", "schedule entries must be positive"));
            }
            if s.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(src.error("params.schedule", "schedule must be strictly decreasing"));
            }
        }
        let positive = [
            ("params.dt", p.dt),
            ("params.horizon", p.horizon),
            ("params.t", p.t),
            ("params.eps", p.eps),
            ("params.eps_lift", p.eps_lift),
            ("params.spacing", p.spacing),
            ("params.curve_gap", p.curve_gap),
            ("params.max_gap", p.max_gap),
            ("params.delta", p.delta),
        ];
        for (key, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(src.error(key, format!("{} must be positive, got {v}", key.trim_start_matches("params."))));
                }
            }
        }
        if let Some(s) = p.s {
            let t = p.t.unwrap_or(f64::INFINITY);
            if !(s > 0.0 && s <= t) {
                return Err(src.error("params.s", format!("need 0 < s <= t, got s = {s}")));
            }
        }
        if let Some(g) = p.gamma_tilde {
            if !(g >= 0.0) {
                return Err(src.error("params.gamma_tilde", "gamma_tilde must be non-negative"));
            }
        }
        for (key, v) in [("params.segments", p.segments), ("params.traces", p.traces), ("params.checkpoints", p.checkpoints)] {
            if v == Some(0) {
                return Err(src.error(key, "must be at least 1"));
            }
        }
        if let Some(r) = &p.regime {
            if r != "bulk" && r != "boundary" {
                return Err(src.error("params.regime", format!("regime must be `bulk` or `boundary`, got `{r}`")));
            }
        }
        if let Some(f) = &p.field {
            if f != "dirichlet" && f != "neumann" {
                return Err(src.error("params.field", format!("field must be `dirichlet` or `neumann`, got `{f}`")));
            }
        }
        for (key, iv) in [("params.interval", p.interval), ("params.height", p.height)] {
            if let Some([a, b]) = iv {
                if !(a < b) {
                    return Err(src.error(key, format!("empty interval [{a}, {b}]")));
                }
            }
        }
        if let Some(q) = &p.stationarity {
            let delta = p.delta.unwrap_or(0.0);
            if q.len() < 2 || q.iter().any(|v| !(*v >= 0.0 && v + delta <= 1.0)) {
                return Err(src.error("params.stationarity", "need at least two checkpoint fractions with windows inside [0, 1]"));
            }
        }
        if let Some(w) = self.window {
            if !(w.radius > 0.0 && w.exclusion >= 0.0 && w.exclusion < w.radius) {
                let key = if w.radius > 0.0 { "window.exclusion" } else { "window.radius" };
                return Err(src.error(key, format!("window needs 0 <= exclusion < radius, got {w:?}")));
            }
        }
        Ok(())
    }
}
