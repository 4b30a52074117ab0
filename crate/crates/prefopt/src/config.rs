//! Run configuration: defaults, validation, the flat key=value file format,
//! and single-key overrides used by CLI flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Severity;

/// How the gas reward is computed from the chosen/rejected gas pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GasRewardMode {
    /// Raw signed difference `gas_rejected - gas_chosen`, in gas units.
    Raw,
    /// Difference normalized by the larger of the two costs and clipped to
    /// `[-1, 1]`, so gas and security rewards share a scale.
    RelativeClipped,
}

impl GasRewardMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GasRewardMode::Raw => "raw",
            GasRewardMode::RelativeClipped => "relative_clipped",
        }
    }
}

impl FromStr for GasRewardMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(GasRewardMode::Raw),
            "relative_clipped" => Ok(GasRewardMode::RelativeClipped),
            other => Err(format!(
                "unknown gas_reward_mode '{other}' (expected raw or relative_clipped)"
            )),
        }
    }
}

/// Which candidates count toward the Secure@k denominatorless numerator:
/// only compiled ones (analysis can actually run) or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecureScope {
    Compiled,
    All,
}

impl SecureScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            SecureScope::Compiled => "compiled",
            SecureScope::All => "all",
        }
    }
}

impl FromStr for SecureScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compiled" => Ok(SecureScope::Compiled),
            "all" => Ok(SecureScope::All),
            other => Err(format!(
                "unknown secure_scope '{other}' (expected compiled or all)"
            )),
        }
    }
}

/// Edge weighting for the mutual-validation ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// Unit weight per link: a node's contribution is counted once per edge.
    Literal,
    /// Outdegree-normalized weights: each node splits its score across its
    /// links, which keeps total mass bounded.
    Stochastic,
}

impl RankMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RankMode::Literal => "literal",
            RankMode::Stochastic => "stochastic",
        }
    }
}

impl FromStr for RankMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(RankMode::Literal),
            "stochastic" => Ok(RankMode::Stochastic),
            other => Err(format!(
                "unknown rank_mode '{other}' (expected literal or stochastic)"
            )),
        }
    }
}

/// All tunables in one place. Constructed via [`Config::default`], then
/// optionally updated from a config file and per-key CLI overrides, then
/// checked once with [`Config::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Ranker damping factor `d` in `[0, 1]`.
    pub damping: f64,
    /// Fixed number of ranker iterations; no early-stopping.
    pub iterations: u32,
    /// Gas reward weight `alpha`.
    pub alpha: f64,
    /// Security reward weight `beta`.
    pub beta: f64,
    /// Weight `lambda` of the combined extra reward in the total loss.
    pub lambda: f64,
    /// Preference sharpness `tau` in the DPO logit.
    pub tau: f64,
    /// Minimum score gap for correctness preference pairs.
    pub epsilon: f64,
    /// Expected candidates per problem (`n` in Task@k).
    pub samples_per_problem: u32,
    /// The `k` values reported by the metrics stage.
    pub k_values: Vec<u32>,
    pub gas_reward_mode: GasRewardMode,
    /// Findings at or above this severity make a candidate insecure.
    pub severity_threshold: Severity,
    pub secure_scope: SecureScope,
    pub rank_mode: RankMode,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            damping: 0.85,
            iterations: 10,
            alpha: 1.0,
            beta: 1.0,
            lambda: 0.5,
            tau: 0.1,
            epsilon: 1e-6,
            samples_per_problem: 10,
            k_values: vec![1, 5, 10],
            gas_reward_mode: GasRewardMode::RelativeClipped,
            severity_threshold: Severity::High,
            secure_scope: SecureScope::Compiled,
            rank_mode: RankMode::Stochastic,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "damping",
    "iterations",
    "alpha",
    "beta",
    "lambda",
    "tau",
    "epsilon",
    "samples_per_problem",
    "k_values",
    "gas_reward_mode",
    "severity_threshold",
    "secure_scope",
    "rank_mode",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("failed to read config '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_value<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("key '{key}': cannot parse '{value}' as {expected}: {e}"))
}

fn parse_k_values(value: &str) -> Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(format!(
                "key 'k_values': empty entry in '{value}' (expected comma-separated integers)"
            ));
        }
        out.push(
            part.parse::<u32>()
                .map_err(|e| format!("key 'k_values': cannot parse '{part}' as integer: {e}"))?,
        );
    }
    Ok(out)
}

impl Config {
    /// Sets a single key from its textual value. Shared by the file parser
    /// and the CLI override flags, so both accept identical syntax.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "damping" => self.damping = parse_value(key, value, "a number")?,
            "iterations" => self.iterations = parse_value(key, value, "an integer")?,
            "alpha" => self.alpha = parse_value(key, value, "a number")?,
            "beta" => self.beta = parse_value(key, value, "a number")?,
            "lambda" => self.lambda = parse_value(key, value, "a number")?,
            "tau" => self.tau = parse_value(key, value, "a number")?,
            "epsilon" => self.epsilon = parse_value(key, value, "a number")?,
            "samples_per_problem" => {
                self.samples_per_problem = parse_value(key, value, "an integer")?
            }
            "k_values" => self.k_values = parse_k_values(value)?,
            "gas_reward_mode" => self.gas_reward_mode = value.parse()?,
            "severity_threshold" => self.severity_threshold = value.parse()?,
            "secure_scope" => self.secure_scope = value.parse()?,
            "rank_mode" => self.rank_mode = value.parse()?,
            other => {
                return Err(format!(
                    "unknown config key '{other}' (known keys: {})",
                    CONFIG_KEYS.join(", ")
                ))
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` file on top of `self`. Blank lines and
    /// `#` comments are skipped; unknown keys, repeated keys, and malformed
    /// values are errors that name the line.
    pub fn apply_str(&mut self, text: &str, path: &str) -> Result<(), ConfigError> {
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    path: path.to_string(),
                    line: line_no,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if let Some(known) = CONFIG_KEYS.iter().find(|k| **k == key) {
                if seen.contains(known) {
                    return Err(ConfigError::Parse {
                        path: path.to_string(),
                        line: line_no,
                        message: format!("key '{key}' set more than once"),
                    });
                }
                seen.push(known);
            }
            self.set(key, value).map_err(|message| ConfigError::Parse {
                path: path.to_string(),
                line: line_no,
                message,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Config::default();
        config.apply_str(&text, &path.display().to_string())?;
        config.validate()?;
        Ok(config)
    }

    /// Checks cross-field consistency. Call after all overrides are applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::Invalid(m));
        if !(0.0..=1.0).contains(&self.damping) {
            return err(format!("damping must be in [0, 1], got {}", self.damping));
        }
        if self.iterations == 0 {
            return err("iterations must be at least 1".to_string());
        }
        for field in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
        ] {
            if !field.1.is_finite() {
                return err(format!("{} must be finite, got {}", field.0, field.1));
            }
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return err(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return err(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if self.samples_per_problem == 0 {
            return err("samples_per_problem must be at least 1".to_string());
        }
        if self.k_values.is_empty() {
            return err("k_values must not be empty".to_string());
        }
        let mut prev = 0u32;
        for &k in &self.k_values {
            if k == 0 {
                return err("k_values entries must be at least 1".to_string());
            }
            if k <= prev && prev != 0 {
                return err(format!(
                    "k_values must be strictly increasing, got {} after {}",
                    k, prev
                ));
            }
            if k > self.samples_per_problem {
                return err(format!(
                    "k={k} exceeds samples_per_problem={}",
                    self.samples_per_problem
                ));
            }
            prev = k;
        }
        Ok(())
    }

    /// Deterministic full rendering, used both to write config files and to
    /// digest the effective configuration into the run manifest.
    pub fn canonical_string(&self) -> String {
        let ks: Vec<String> = self.k_values.iter().map(|k| k.to_string()).collect();
        format!(
            "damping = {}\niterations = {}\nalpha = {}\nbeta = {}\nlambda = {}\ntau = {}\n\
             epsilon = {}\nsamples_per_problem = {}\nk_values = {}\ngas_reward_mode = {}\n\
             severity_threshold = {}\nsecure_scope = {}\nrank_mode = {}\n",
            self.damping,
            self.iterations,
            self.alpha,
            self.beta,
            self.lambda,
            self.tau,
            self.epsilon,
            self.samples_per_problem,
            ks.join(","),
            self.gas_reward_mode.as_str(),
            self.severity_threshold.as_str(),
            self.secure_scope.as_str(),
            self.rank_mode.as_str(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let c = Config::default();
        assert_eq!(c.damping, 0.85);
        assert_eq!(c.iterations, 10);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.tau, 0.1);
        assert_eq!(c.epsilon, 1e-6);
        assert_eq!(c.samples_per_problem, 10);
        assert_eq!(c.k_values, vec![1, 5, 10]);
        assert_eq!(c.gas_reward_mode, GasRewardMode::RelativeClipped);
        assert_eq!(c.severity_threshold, Severity::High);
        assert_eq!(c.secure_scope, SecureScope::Compiled);
        assert_eq!(c.rank_mode, RankMode::Stochastic);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn canonical_string_round_trips() {
        let base = Config {
            damping: 0.5,
            k_values: vec![1, 2, 4, 8],
            severity_threshold: Severity::Medium,
            ..Config::default()
        };
        let mut parsed = Config::default();
        parsed.apply_str(&base.canonical_string(), "inline").unwrap();
        assert_eq!(parsed, base);
    }

    #[test]
    fn file_parser_handles_comments_and_blanks() {
        let text = "# run settings\n\n  tau = 0.2\nk_values = 1, 3, 5\n";
        let mut c = Config::default();
        c.apply_str(text, "inline").unwrap();
        assert_eq!(c.tau, 0.2);
        assert_eq!(c.k_values, vec![1, 3, 5]);
    }

    #[test]
    fn unknown_key_error_names_the_line() {
        let mut c = Config::default();
        let err = c.apply_str("tau = 0.2\nbogus = 3\n", "conf").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("conf:2:"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn repeated_key_is_an_error() {
        let mut c = Config::default();
        let err = c.apply_str("tau = 0.2\ntau = 0.3\n", "conf").unwrap_err();
        assert!(err.to_string().contains("more than once"), "{err}");
    }

    #[test]
    fn malformed_value_error_names_key_and_line() {
        let mut c = Config::default();
        let err = c.apply_str("iterations = ten\n", "conf").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("conf:1:"), "{msg}");
        assert!(msg.contains("iterations"), "{msg}");
    }

    #[test]
    fn k_beyond_sample_budget_is_rejected_and_named() {
        let c = Config {
            k_values: vec![1, 11],
            ..Config::default()
        };
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("k=11"), "{err}");
    }

    #[test]
    fn damping_outside_unit_interval_is_rejected() {
        let mut c = Config {
            damping: 1.2,
            ..Config::default()
        };
        assert!(c.validate().is_err());
        c.damping = -0.1;
        assert!(c.validate().is_err());
        c.damping = 0.0;
        assert!(c.validate().is_ok());
        c.damping = 1.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn overrides_share_file_syntax() {
        let mut c = Config::default();
        c.set("gas_reward_mode", "raw").unwrap();
        assert_eq!(c.gas_reward_mode, GasRewardMode::Raw);
        assert!(c.set("gas_reward_mode", "fast").is_err());
    }
}
