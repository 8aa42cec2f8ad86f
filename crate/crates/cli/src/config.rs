//! Run configuration: a JSON file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use catdep::{DependencyCoefficient, GeneratorSpec, Marginal, SequenceModel, DEFAULT_ENUMERATION_CAP};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// On-disk config. Every field is optional here so that flags can fill gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration_cap: Option<u64>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand. Any flag given wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Number of categories K.
    #[arg(short = 'K', long = "categories", global = true)]
    pub categories: Option<usize>,
    /// Sequence length N.
    #[arg(short = 'N', long = "length", global = true)]
    pub length: Option<usize>,
    /// Base marginal as comma-separated probabilities.
    #[arg(long, value_delimiter = ',', global = true)]
    pub p: Option<Vec<f64>>,
    /// Dependency coefficient in [0, 1].
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Builtin generator name, or a generator JSON object.
    #[arg(long, global = true)]
    pub generator: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of sampled sequences.
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Upper bound on K^N for exhaustive enumeration.
    #[arg(long, global = true)]
    pub enumeration_cap: Option<u64>,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub categories: usize,
    pub length: usize,
    pub p: Marginal,
    pub delta: DependencyCoefficient,
    pub generator: GeneratorSpec,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub enumeration_cap: u64,
}

fn parse_generator(text: &str) -> Result<GeneratorSpec, CliError> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| CliError::Usage(format!("malformed generator: {e}")))
    } else {
        GeneratorSpec::builtin(trimmed).ok_or_else(|| CliError::Usage(format!("unknown generator {trimmed:?}")))
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => RunConfigFile::load(path)?,
            None => RunConfigFile::default(),
        };
        let generator = match &self.generator {
            Some(text) => Some(parse_generator(text)?),
            None => file.generator,
        };
        let merged = RunConfigFile {
            categories: self.categories.or(file.categories),
            length: self.length.or(file.length),
            p: self.p.clone().or(file.p),
            delta: self.delta.or(file.delta),
            generator,
            seed: self.seed.or(file.seed),
            count: self.count.or(file.count),
            enumeration_cap: self.enumeration_cap.or(file.enumeration_cap),
        };
        RunConfig::from_file(merged)
    }
}

fn missing(field: &str) -> CliError {
    CliError::Usage(format!("missing required setting {field:?} (config file or flag)"))
}

impl RunConfig {
    pub fn from_file(file: RunConfigFile) -> Result<Self, CliError> {
        let probs = file.p.ok_or_else(|| missing("p"))?;
        let p = Marginal::new(probs).map_err(|e| CliError::Usage(format!("invalid p: {e}")))?;
        let categories = file.categories.unwrap_or(p.categories());
        if categories != p.categories() {
            return Err(CliError::Usage(format!(
                "K = {categories} but p has {} entries",
                p.categories()
            )));
        }
        let length = file.length.ok_or_else(|| missing("N"))?;
        if length == 0 {
            return Err(CliError::Usage("N must be at least 1".into()));
        }
        let delta = DependencyCoefficient::new(file.delta.ok_or_else(|| missing("delta"))?)
            .map_err(|e| CliError::Usage(format!("invalid delta: {e}")))?;
        Ok(RunConfig {
            categories,
            length,
            p,
            delta,
            generator: file.generator.ok_or_else(|| missing("generator"))?,
            seed: file.seed,
            count: file.count,
            enumeration_cap: file.enumeration_cap.unwrap_or(DEFAULT_ENUMERATION_CAP),
        })
    }

    pub fn model(&self) -> SequenceModel {
        SequenceModel::new(self.p.clone(), self.delta, self.generator.clone())
            .with_enumeration_cap(self.enumeration_cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> ConfigArgs {
        ConfigArgs {
            length: Some(4),
            p: Some(vec![0.5, 0.5]),
            delta: Some(0.3),
            generator: Some("sequential".into()),
            ..ConfigArgs::default()
        }
    }

    #[test]
    fn flags_alone() {
        let cfg = args().resolve().unwrap();
        assert_eq!(cfg.categories, 2);
        assert_eq!(cfg.generator, GeneratorSpec::Sequential);
        assert_eq!(cfg.enumeration_cap, DEFAULT_ENUMERATION_CAP);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"K":3,"N":6,"p":[0.5,0.3,0.2],"delta":0.4,"generator":{"kind":"fk"},"seed":7,"count":10}"#,
        )
        .unwrap();
        let from_file = ConfigArgs {
            config: Some(path.clone()),
            ..ConfigArgs::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(from_file.length, 6);
        assert_eq!(from_file.generator, GeneratorSpec::Fk);
        assert_eq!(from_file.seed, Some(7));

        let overridden = ConfigArgs {
            config: Some(path),
            length: Some(3),
            generator: Some(r#"{"kind":"table","table":{"2":1,"3":1}}"#.into()),
            ..ConfigArgs::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(overridden.length, 3);
        assert_eq!(overridden.count, Some(10));
        assert!(matches!(overridden.generator, GeneratorSpec::Table(_)));
    }

    #[test]
    fn malformed_settings_are_usage_errors() {
        let cases = [
            ConfigArgs { p: None, ..args() },
            ConfigArgs {
                p: Some(vec![0.5, 0.6]),
                ..args()
            },
            ConfigArgs {
                categories: Some(3),
                ..args()
            },
            ConfigArgs {
                delta: Some(1.5),
                ..args()
            },
            ConfigArgs {
                length: Some(0),
                ..args()
            },
            ConfigArgs {
                generator: Some("spiral".into()),
                ..args()
            },
            ConfigArgs {
                generator: None,
                ..args()
            },
            ConfigArgs {
                config: Some("/nonexistent/cfg.json".into()),
                ..args()
            },
        ];
        for case in cases {
            assert!(matches!(case.resolve(), Err(CliError::Usage(_))), "{case:?}");
        }
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"N":3,"p":[0.5,0.5],"delta":0.1,"generator":{"kind":"fk"},"sigma":2}"#,
        )
        .unwrap();
        let result = ConfigArgs {
            config: Some(path),
            ..ConfigArgs::default()
        }
        .resolve();
        assert!(matches!(result, Err(CliError::Usage(_))));
    }
}
