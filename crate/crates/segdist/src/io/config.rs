//! Evaluation config: the class list, clipping thresholds, and run options.
//!
//! The on-disk form is TOML. Class ids are assigned by position in the
//! `classes` array; thresholds are keyed by class name and must cover
//! every class exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distance::ThresholdConfig;
use crate::error::{Error, ParseError, ValidationError};
use crate::model::ClassId;

/// Which scopes an evaluation run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeSelection {
    Full,
    Hard,
    #[default]
    Both,
}

impl std::str::FromStr for ScopeSelection {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "hard" => Ok(Self::Hard),
            "both" => Ok(Self::Both),
            other => Err(ParseError::Config(format!(
                "scope must be full, hard, or both, got '{other}'"
            ))),
        }
    }
}

/// Validated evaluation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    class_names: Vec<String>,
    thresholds: ThresholdConfig,
    /// Restricts evaluation to these models; `None` takes every model
    /// present in the input file.
    pub models: Option<Vec<String>>,
    pub scope: ScopeSelection,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ConfigToml {
    classes: Vec<String>,
    thresholds: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    models: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scope: Option<ScopeSelection>,
}

impl EvalConfig {
    /// Builds a config from parallel class-name and threshold lists.
    pub fn from_parts(
        class_names: Vec<String>,
        thresholds: Vec<f64>,
    ) -> Result<Self, ValidationError> {
        if class_names.is_empty() {
            return Err(ValidationError::NoClasses);
        }
        let mut seen = std::collections::HashSet::new();
        for name in &class_names {
            // names become report keys and CSV cells
            if name.is_empty() || name.contains([',', '\t', '\n', '\r']) {
                return Err(ValidationError::InvalidClassName(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(ValidationError::DuplicateClassName(name.clone()));
            }
        }
        if thresholds.len() < class_names.len() {
            return Err(ValidationError::MissingThreshold {
                class: class_names[thresholds.len()].clone(),
            });
        }
        if thresholds.len() > class_names.len() {
            return Err(ValidationError::UnknownThresholdClass(format!(
                "#{}",
                class_names.len()
            )));
        }
        for (name, &tau) in class_names.iter().zip(&thresholds) {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(ValidationError::InvalidThreshold {
                    class: name.clone(),
                    value: tau,
                });
            }
        }
        Ok(Self {
            class_names,
            thresholds: ThresholdConfig::new(thresholds)?,
            models: None,
            scope: ScopeSelection::default(),
        })
    }

    pub fn parse_toml(text: &str) -> Result<Self, Error> {
        let raw: ConfigToml =
            toml::from_str(text).map_err(|e| ParseError::Config(e.to_string()))?;
        if raw.classes.is_empty() {
            return Err(ValidationError::NoClasses.into());
        }
        for key in raw.thresholds.keys() {
            if !raw.classes.contains(key) {
                return Err(ValidationError::UnknownThresholdClass(key.clone()).into());
            }
        }
        let mut thresholds = Vec::with_capacity(raw.classes.len());
        for class in &raw.classes {
            match raw.thresholds.get(class) {
                Some(&tau) => thresholds.push(tau),
                None => {
                    return Err(ValidationError::MissingThreshold {
                        class: class.clone(),
                    }
                    .into())
                }
            }
        }
        let mut config = Self::from_parts(raw.classes, thresholds)?;
        config.models = raw.models;
        config.scope = raw.scope.unwrap_or_default();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        let raw = ConfigToml {
            classes: self.class_names.clone(),
            thresholds: self
                .class_names
                .iter()
                .cloned()
                .zip(self.thresholds.values().iter().copied())
                .collect(),
            models: self.models.clone(),
            scope: Some(self.scope),
        };
        toml::to_string(&raw).expect("config serializes")
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    #[inline]
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, class: ClassId) -> &str {
        &self.class_names[class.index()]
    }

    #[inline]
    pub fn thresholds(&self) -> &ThresholdConfig {
        &self.thresholds
    }
}
