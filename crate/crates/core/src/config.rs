//! File-pinned run configuration (`config.toml` in the workspace).
//!
//! Every section is optional and defaults field by field. The environment is
//! consulted only for secrets and endpoints (LLM key and URL, staging hook).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::composer::{CalibrationConfig, CostModel, GeneratorConfig, StagingConfig};
use crate::deploy_sim::{DeployConfig, FixtureDataset, ENV_STAGING_HOOK};
use crate::extraction::{ExtractionError, Extractor, LlmBackend, LlmBackendConfig};
use crate::sentinel::{FaultPlan, SentinelConfig, SimulatorConfig};
use crate::skills::{load_dir, select_skillset, SkillConfig, SkillDocument, SkillError, SkillSet};
use crate::assets;

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Skills(#[from] SkillError),
    #[error("fixture dataset {path}: {message}")]
    Fixtures { path: PathBuf, message: String },
    #[error(transparent)]
    Extractor(#[from] ExtractionError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    #[default]
    Rule,
    Llm,
    /// LLM responses replayed from `paths.recordings`.
    Recorded,
}

impl std::str::FromStr for ExtractorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rule" => Ok(ExtractorKind::Rule),
            "llm" => Ok(ExtractorKind::Llm),
            "recorded" => Ok(ExtractorKind::Recorded),
            other => Err(format!("unknown extractor `{other}` (expected rule, llm or recorded)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provisioner {
    /// Staging against the bundled fixture dataset.
    #[default]
    Fixtures,
    /// Staging through an external hook command.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConductorConfig {
    pub skill_config: SkillConfig,
    pub extractor: ExtractorKind,
    pub provisioner: Provisioner,
    pub max_clarification_rounds: u32,
}

impl Default for ConductorConfig {
    fn default() -> Self {
        ConductorConfig {
            skill_config: SkillConfig::S3,
            extractor: ExtractorKind::Rule,
            provisioner: Provisioner::Fixtures,
            max_clarification_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub cpu_request: u32,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection {
            cpu_request: GeneratorConfig::default().cpu_request,
        }
    }
}

/// Locations; relative paths resolve against the workspace directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Skill documents directory; the bundled library when unset.
    pub skills: Option<PathBuf>,
    /// Fixture dataset JSON; the bundled fixture when unset.
    pub fixtures: Option<PathBuf>,
    /// Query dataset for `eval`; the bundled dataset when unset.
    pub dataset: Option<PathBuf>,
    /// Recorded LLM responses.
    pub recordings: Option<PathBuf>,
    /// Session journals; `<workspace>/sessions` when unset.
    pub sessions: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub calibration: CalibrationConfig,
    pub generator: GeneratorSection,
    pub staging: StagingConfig,
    pub cost: CostModel,
    pub sentinel: SentinelConfig,
    pub simulator: SimulatorConfig,
    pub faults: FaultPlan,
    pub deploy: DeployConfig,
    pub paths: PathsConfig,
    pub llm: LlmBackendConfig,
    pub conductor: ConductorConfig,
    /// Resolution base for `paths`; set by the loader, never read from the file.
    #[serde(skip)]
    pub workspace: PathBuf,
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    /// Reads `<workspace>/config.toml` if present, defaults otherwise.
    pub fn load_workspace(workspace: &Path) -> Result<Self, ConfigError> {
        let path = workspace.join(CONFIG_FILE);
        let mut config = if path.exists() {
            Config::load(&path)?
        } else {
            Config::default()
        };
        config.workspace = workspace.to_path_buf();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Config::parse(&text, path)?;
        config.workspace = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workspace.join(p)
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            calibration: self.calibration.clone(),
            cpu_request: self.generator.cpu_request,
        }
    }

    pub fn sessions_dir(&self) -> PathBuf {
        match &self.paths.sessions {
            Some(p) => self.resolve(p),
            None => self.workspace.join("sessions"),
        }
    }

    pub fn skill_library(&self) -> Result<Vec<SkillDocument>, ConfigError> {
        match &self.paths.skills {
            Some(dir) => Ok(load_dir(&self.resolve(dir))?),
            None => Ok(assets::skill_library()),
        }
    }

    pub fn skill_set(&self) -> Result<SkillSet, ConfigError> {
        Ok(select_skillset(self.conductor.skill_config, &self.skill_library()?)?)
    }

    pub fn fixtures(&self) -> Result<FixtureDataset, ConfigError> {
        let Some(p) = &self.paths.fixtures else {
            return Ok(FixtureDataset::bundled());
        };
        let path = self.resolve(p);
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        FixtureDataset::parse(&text).map_err(|e| ConfigError::Fixtures {
            path,
            message: e.to_string(),
        })
    }

    pub fn extractor(&self) -> Result<Extractor, ConfigError> {
        Ok(match self.conductor.extractor {
            ExtractorKind::Rule => Extractor::Rule,
            ExtractorKind::Llm => Extractor::Llm(LlmBackend::http(self.llm.clone().with_env())?),
            ExtractorKind::Recorded => {
                let dir = self.paths.recordings.as_ref().ok_or_else(|| ExtractionError::NotConfigured {
                    message: "paths.recordings is not set".into(),
                })?;
                Extractor::Llm(LlmBackend::recorded(self.resolve(dir), self.llm.clone()))
            }
        })
    }

    /// External staging hook command, taken from the environment.
    pub fn staging_hook(&self) -> Option<String> {
        std::env::var(ENV_STAGING_HOOK).ok().filter(|h| !h.trim().is_empty())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
