use std::path::{Path, PathBuf};

use nrqfl_core::flsim::{ExperimentConfig, Strategy};

use crate::error::CliError;

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strategies: Option<Vec<String>>,
}

/// Parses a JSON config, filling defaults and rejecting unknown keys.
/// Errors name the offending key path, e.g. `noise.p_depol`.
pub fn parse_config_str(json: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })?;
    Ok(cfg)
}

/// Loads `path` (or an empty object when absent), applies `overrides` and
/// validates the result.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn apply_overrides(cfg: &mut ExperimentConfig, o: &Overrides) -> Result<(), CliError> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &o.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    if let Some(list) = &o.strategies {
        cfg.strategies = list
            .iter()
            .map(|s| s.parse::<Strategy>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("--strategy: {e}")))?;
    }
    Ok(())
}
