//! Flat `key = value` scenario files.
//!
//! Keys left out of a file take the defaults of the file's `dynamics`
//! (integrator when absent).

use std::path::{Path, PathBuf};

use vocbf::{ConfigError, ControllerKind, Dynamics, ScenarioConfig};

use crate::error::CliError;

/// Command-line values that replace file values.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub controller: Option<ControllerKind>,
    pub agents: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(k) = self.controller {
            cfg.controller = k;
        }
        if let Some(n) = self.agents {
            cfg.n_agents = n;
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `key` is assigned, if it is.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        l.trim_start()
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

pub fn parse_config(text: &str, path: &Path) -> Result<ScenarioConfig, CliError> {
    // Messages name the key assigned on the offending line when there is one.
    let at = |line: usize, message: String| {
        let key = text
            .lines()
            .nth(line - 1)
            .and_then(|l| l.split_once('='))
            .map(|(k, _)| k.trim())
            .filter(|k| !k.is_empty() && !k.contains(char::is_whitespace));
        CliError::ConfigAt {
            path: path.to_path_buf(),
            line,
            message: match key {
                Some(k) if !message.contains(k) => format!("`{k}`: {message}"),
                _ => message,
            },
        }
    };
    let user: toml::Table = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => at(line_of(text, span.start), e.message().to_string()),
        None => CliError::Config {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        },
    })?;
    let dynamics = match user.get("dynamics") {
        Some(toml::Value::String(s)) if s == "car" => Dynamics::Car,
        _ => Dynamics::Integrator,
    };

    // Defaults for missing keys go in front so error spans past them still
    // point into the user's text.
    let defaults = toml::Table::try_from(ScenarioConfig::defaults_for(dynamics))
        .map_err(|e| CliError::Runtime(format!("serializing defaults: {e}")))?;
    let mut prefix = toml::Table::new();
    for (k, v) in defaults {
        if !user.contains_key(&k) {
            prefix.insert(k, v);
        }
    }
    let prefix = toml::to_string(&prefix)
        .map_err(|e| CliError::Runtime(format!("serializing defaults: {e}")))?;
    let shift = prefix.matches('\n').count();
    let merged = format!("{prefix}{text}");
    let cfg: ScenarioConfig = toml::from_str(&merged).map_err(|e| {
        let line = e
            .span()
            .map(|s| line_of(&merged, s.start))
            .filter(|&l| l > shift);
        match line {
            Some(l) => at(l - shift, e.message().to_string()),
            None => CliError::Config {
                path: path.to_path_buf(),
                message: e.message().to_string(),
            },
        }
    })?;
    Ok(cfg)
}

pub fn validation_error(err: ConfigError, text: &str, path: &Path) -> CliError {
    let line = match &err {
        ConfigError::InvalidField { field, .. } => key_line(text, field),
        ConfigError::UnsupportedCombination { .. } => key_line(text, "controller"),
    };
    match line {
        Some(line) => CliError::ConfigAt {
            path: path.to_path_buf(),
            line,
            message: err.to_string(),
        },
        None => CliError::Config {
            path: path.to_path_buf(),
            message: err.to_string(),
        },
    }
}

/// Reads, merges and validates a scenario file. Without a path the
/// integrator defaults are used.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    let (mut cfg, text, path) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config {
                path: p.to_path_buf(),
                message: format!("cannot read config: {e}"),
            })?;
            (parse_config(&text, p)?, text, p.to_path_buf())
        }
        None => (ScenarioConfig::default(), String::new(), PathBuf::from("<defaults>")),
    };
    overrides.apply(&mut cfg);
    cfg.validate().map_err(|e| validation_error(e, &text, &path))?;
    Ok(cfg)
}

#[cfg(test)]
pub fn to_toml(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config serializes to TOML")
}
