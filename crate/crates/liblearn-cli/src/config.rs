//! Run configuration: stage flags, named ablation conditions, scale
//! profiles, and the TOML config file the `run` subcommand consumes.

use std::path::{Path, PathBuf};

use liblearn_core::compress::CompressionConfig;
use liblearn_core::task::SearchBudget;
use liblearn_llm::autodoc::AutoDocConfig;
use liblearn_llm::solve::LlmBackendConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which pipeline stages run. Any combination is accepted as long as at
/// least one solver stays on; the named conditions cover the standard
/// ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionFlags {
    pub llm_solver: bool,
    pub enum_search: bool,
    pub compression: bool,
    pub autodoc: bool,
}

impl Default for ConditionFlags {
    fn default() -> Self {
        ConditionFlags {
            llm_solver: true,
            enum_search: true,
            compression: true,
            autodoc: true,
        }
    }
}

/// The standard ablation grid: enumerative baseline, LLM-only baseline,
/// then adding compression, naming, and search back in.
pub const CONDITIONS: &[(&str, ConditionFlags)] = &[
    (
        "search-compress",
        ConditionFlags {
            llm_solver: false,
            enum_search: true,
            compression: true,
            autodoc: false,
        },
    ),
    (
        "llm-only",
        ConditionFlags {
            llm_solver: true,
            enum_search: false,
            compression: false,
            autodoc: false,
        },
    ),
    (
        "llm-compress",
        ConditionFlags {
            llm_solver: true,
            enum_search: false,
            compression: true,
            autodoc: false,
        },
    ),
    (
        "llm-compress-doc",
        ConditionFlags {
            llm_solver: true,
            enum_search: false,
            compression: true,
            autodoc: true,
        },
    ),
    (
        "full",
        ConditionFlags {
            llm_solver: true,
            enum_search: true,
            compression: true,
            autodoc: true,
        },
    ),
];

impl ConditionFlags {
    pub fn named(name: &str) -> Option<ConditionFlags> {
        CONDITIONS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, flags)| *flags)
    }

    /// The condition's name in the standard grid, or `custom`.
    pub fn name(&self) -> &'static str {
        CONDITIONS
            .iter()
            .find(|(_, flags)| flags == self)
            .map(|(name, _)| *name)
            .unwrap_or("custom")
    }
}

/// Which completion backend a run talks to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    /// Scripted backend answering every task description with its bundled
    /// ground-truth program; `script` entries are merged on top, which is
    /// how documentation answers are supplied.
    Oracle,
    /// Scripted backend driven entirely by a JSON pattern → completions file.
    Script,
    /// Scripted backend repeating one fixed completion.
    Constant,
    /// Scripted backend emitting seeded nonsense; exercises failure paths.
    Garbage,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSpec {
    pub mode: BackendMode,
    /// JSON object mapping a prompt-target pattern to completion texts.
    pub script: Option<PathBuf>,
    pub constant: String,
    pub garbage_seed: u64,
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec {
            mode: BackendMode::Oracle,
            script: None,
            constant: "(lambda $0)".into(),
            garbage_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub domain: String,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Test-set evaluation runs every this many iterations.
    pub test_cadence: usize,
    pub workers: usize,
    /// Laplace smoothing for the per-iteration grammar refit.
    pub weight_alpha: f64,
    /// Verified solutions retained per task.
    pub frontier_cap: usize,
    /// Exemplar embeddings JSONL; when set, prompts select exemplars by
    /// cosine similarity instead of seeded random choice.
    pub embeddings: Option<PathBuf>,
    pub condition: ConditionFlags,
    pub search: SearchBudget,
    pub compression: CompressionConfig,
    pub llm: LlmBackendConfig,
    pub autodoc: AutoDocConfig,
    pub backend: BackendSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: "toylist".into(),
            iterations: 10,
            batch_size: 96,
            seed: 0,
            test_cadence: 3,
            workers: 4,
            weight_alpha: 1.0,
            frontier_cap: liblearn_core::enumerate::FRONTIER_CAP,
            embeddings: None,
            condition: ConditionFlags::default(),
            search: SearchBudget::default(),
            compression: CompressionConfig::default(),
            llm: LlmBackendConfig::default(),
            autodoc: AutoDocConfig::default(),
            backend: BackendSpec::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown condition {0:?}; expected one of {}", condition_names())]
    UnknownCondition(String),
    #[error("unknown profile {0:?}; expected desk or paper")]
    UnknownProfile(String),
}

fn condition_names() -> String {
    CONDITIONS
        .iter()
        .map(|(name, _)| *name)
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    /// Defaults tuned per domain: the string-rewriting corpus needs more
    /// iterations to converge than the toy domain.
    pub fn for_domain(domain: &str) -> RunConfig {
        let mut cfg = RunConfig {
            domain: domain.into(),
            ..RunConfig::default()
        };
        if domain == "stringrw" {
            cfg.iterations = 16;
        }
        cfg
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// `desk` shrinks batches and the search budget so a full run finishes
    /// in seconds; `paper` restores the full-scale defaults.
    pub fn apply_profile(&mut self, profile: &str) -> Result<(), ConfigError> {
        match profile {
            "desk" => {
                self.batch_size = 24;
                self.search.timeout_secs = 30.0;
                self.search.max_candidates = 50_000;
            }
            "paper" => {
                self.batch_size = 96;
                self.search = SearchBudget::default();
            }
            other => return Err(ConfigError::UnknownProfile(other.to_owned())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.condition.llm_solver && !self.condition.enum_search {
            return Err(ConfigError::Invalid(
                "at least one solver stage (llm_solver or enum_search) must be enabled".into(),
            ));
        }
        if self.test_cadence == 0 {
            return Err(ConfigError::Invalid("test_cadence must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(ConfigError::Invalid("iterations must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be >= 1".into()));
        }
        if self.frontier_cap == 0 {
            return Err(ConfigError::Invalid("frontier_cap must be >= 1".into()));
        }
        if self.backend.mode == BackendMode::Script && self.backend.script.is_none() {
            return Err(ConfigError::Invalid(
                "backend.mode = script requires backend.script".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates_and_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let parsed: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn named_conditions_are_distinct_and_reversible() {
        let mut seen = std::collections::BTreeSet::new();
        for (name, flags) in CONDITIONS {
            let shape = (
                flags.llm_solver,
                flags.enum_search,
                flags.compression,
                flags.autodoc,
            );
            assert!(seen.insert(shape), "duplicate condition shape {name}");
            assert_eq!(ConditionFlags::named(name), Some(*flags));
            assert_eq!(flags.name(), *name);
        }
        assert_eq!(CONDITIONS.len(), 5);
        let custom = ConditionFlags {
            llm_solver: true,
            enum_search: true,
            compression: false,
            autodoc: false,
        };
        assert_eq!(custom.name(), "custom");
        assert_eq!(ConditionFlags::named("nope"), None);
    }

    #[test]
    fn no_solver_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.condition.llm_solver = false;
        cfg.condition.enum_search = false;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn zero_cadence_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.test_cadence = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn profiles_adjust_scale() {
        let mut cfg = RunConfig::default();
        cfg.apply_profile("desk").unwrap();
        assert_eq!(cfg.batch_size, 24);
        cfg.apply_profile("paper").unwrap();
        assert_eq!(cfg.batch_size, 96);
        assert!(cfg.apply_profile("galactic").is_err());
    }

    #[test]
    fn domain_defaults_differ() {
        assert_eq!(RunConfig::for_domain("stringrw").iterations, 16);
        assert_eq!(RunConfig::for_domain("toylist").iterations, 10);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: RunConfig = toml::from_str(
            "domain = \"stringrw\"\nseed = 9\n[condition]\nautodoc = false\n",
        )
        .unwrap();
        assert_eq!(cfg.domain, "stringrw");
        assert_eq!(cfg.seed, 9);
        assert!(!cfg.condition.autodoc);
        assert!(cfg.condition.llm_solver);
        assert_eq!(cfg.batch_size, 96);
    }
}
