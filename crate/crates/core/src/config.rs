//! The versioned JSON run configuration and the inputs it points at.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Seeds have no defaults: every run names the numbers it used.

use crate::backend::{
    default_temperature, load_rules, Backend, BackendParams, HttpBackend, HttpConfig, ScriptedBackend,
    ScriptedRule, DEFAULT_N_SAMPLES,
};
use crate::chrf::{ChrfConfig, ChrfError, ChrfIndex};
use crate::demo::{SelectionStrategy, UnknownStrategy, DEFAULT_K};
use crate::eval::{EvalSettings, Harness, Seeds};
use crate::probe_data::{
    load_probes, load_survey, LanguageCountryMap, MajorityTable, ProbeDataError, ProbeSet, SurveyTable,
};
use crate::prompt::{InstructionCatalog, PromptError, PromptMode};
use crate::report::RunMeta;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{field} file not found: {path}")]
    MissingFile { field: &'static str, path: PathBuf },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Data(#[from] ProbeDataError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Chrf(#[from] ChrfError),
    #[error("scripted rules: {0}")]
    Rules(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub probes: PathBuf,
    pub survey: PathBuf,
    /// CSV with a `language,country` header; the built-in table when absent.
    #[serde(default)]
    pub language_country: Option<PathBuf>,
    /// Instruction catalog JSON; the built-in English catalog when absent.
    #[serde(default)]
    pub instructions: Option<PathBuf>,
    /// Scripted backend rules (JSON lines).
    #[serde(default)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendConfig {
    Scripted {
        #[serde(default = "scripted_model_id")]
        model_id: String,
        #[serde(default)]
        temperature: Option<f64>,
        /// Wrap answers in filler sentences.
        #[serde(default)]
        noisy: bool,
    },
    Http {
        model_id: String,
        #[serde(default)]
        temperature: Option<f64>,
        #[serde(flatten)]
        http: HttpConfig,
    },
}

fn scripted_model_id() -> String {
    "scripted".to_string()
}

impl BackendConfig {
    pub fn model_id(&self) -> &str {
        match self {
            BackendConfig::Scripted { model_id, .. } | BackendConfig::Http { model_id, .. } => model_id,
        }
    }

    /// Explicit temperature, else the model's documented default. Scripted runs fall back to 1.0.
    pub fn temperature(&self) -> Result<f64, ConfigError> {
        match self {
            BackendConfig::Scripted { temperature, model_id, .. } => {
                Ok(temperature.or_else(|| default_temperature(model_id)).unwrap_or(1.0))
            }
            BackendConfig::Http { temperature, model_id, .. } => temperature
                .or_else(|| default_temperature(model_id))
                .ok_or_else(|| ConfigError::Invalid(format!("no default temperature known for {model_id:?}; set backend.temperature"))),
        }
    }
}

fn default_strategy() -> String {
    SelectionStrategy::ChrfAcrossCategories.name().to_string()
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_n_samples() -> u32 {
    DEFAULT_N_SAMPLES
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_parallelism() -> usize {
    DEFAULT_PARALLELISM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub paths: Paths,
    pub backend: BackendConfig,
    pub language: String,
    /// Overrides the language's default country.
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n_samples")]
    pub n_samples: u32,
    /// Defaults to the prompt mode's own cap.
    #[serde(default)]
    pub max_new_tokens: Option<u32>,
    #[serde(default)]
    pub mode: PromptMode,
    pub seeds: Seeds,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Response cache (JSON lines); enables resume and replay.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn cache_path(&self) -> Option<PathBuf> {
        self.cache.as_deref().map(|p| self.resolve(p))
    }

    pub fn strategy(&self) -> Result<SelectionStrategy, UnknownStrategy> {
        self.strategy.parse()
    }

    pub fn max_new_tokens(&self) -> u32 {
        self.max_new_tokens.unwrap_or_else(|| self.mode.default_max_new_tokens())
    }

    /// Checks field values and that every referenced file exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.strategy()?;
        if self.k == 0 {
            return Err(ConfigError::Invalid("k must be >= 1".into()));
        }
        if self.n_samples == 0 {
            return Err(ConfigError::Invalid("n_samples must be >= 1".into()));
        }
        if self.max_new_tokens == Some(0) {
            return Err(ConfigError::Invalid("max_new_tokens must be >= 1".into()));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be >= 1".into()));
        }
        if self.language.trim().is_empty() {
            return Err(ConfigError::Invalid("language must not be empty".into()));
        }
        let t = self.backend.temperature()?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(ConfigError::Invalid(format!("temperature must be nonnegative, got {t}")));
        }
        let mut files: Vec<(&'static str, &Path)> = vec![("probes", &self.paths.probes), ("survey", &self.paths.survey)];
        if let Some(p) = &self.paths.language_country {
            files.push(("language_country", p));
        }
        if let Some(p) = &self.paths.instructions {
            files.push(("instructions", p));
        }
        match (&self.backend, &self.paths.rules) {
            (BackendConfig::Scripted { .. }, Some(p)) => files.push(("rules", p)),
            (BackendConfig::Scripted { .. }, None) => {
                return Err(ConfigError::Invalid("the scripted backend needs paths.rules".into()))
            }
            _ => {}
        }
        for (field, p) in files {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(ConfigError::MissingFile { field, path: full });
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of every field that can change results.
    pub fn digest(&self) -> String {
        let mut view = self.clone();
        view.output_dir = PathBuf::new();
        view.cache = None;
        view.parallelism = 0;
        let json = serde_json::to_string(&view).expect("configs serialize");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Short identifier embedded in every artifact row.
    pub fn run_id(&self) -> String {
        self.digest()[..16].to_string()
    }

    pub fn params(&self) -> Result<BackendParams, ConfigError> {
        Ok(BackendParams {
            model_id: self.backend.model_id().to_string(),
            temperature: self.backend.temperature()?,
            max_new_tokens: self.max_new_tokens(),
            n_samples: self.n_samples,
        })
    }

    pub fn settings(&self, country: &str) -> Result<EvalSettings, ConfigError> {
        Ok(EvalSettings {
            language: self.language.clone(),
            country: country.to_string(),
            strategy: self.strategy()?,
            k: self.k,
            mode: self.mode,
            params: self.params()?,
            seeds: self.seeds,
            parallelism: self.parallelism,
        })
    }
}

/// Everything a run reads from disk, loaded and cross-checked.
pub struct Inputs {
    pub probes: ProbeSet,
    pub survey: SurveyTable,
    pub mapping: LanguageCountryMap,
    pub country: String,
    pub majorities: MajorityTable,
    pub catalog: InstructionCatalog,
    pub chrf: ChrfIndex,
    pub rules: Vec<ScriptedRule>,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let probes = load_probes(&cfg.resolve(&cfg.paths.probes))?;
        let survey = load_survey(&cfg.resolve(&cfg.paths.survey))?;
        let mapping = match &cfg.paths.language_country {
            Some(p) => LanguageCountryMap::load(&cfg.resolve(p))?,
            None => LanguageCountryMap::default(),
        };
        let catalog = match &cfg.paths.instructions {
            Some(p) => InstructionCatalog::load(&cfg.resolve(p))?,
            None => InstructionCatalog::default(),
        };
        catalog.get(&cfg.language)?;
        let country = match &cfg.country {
            Some(c) => c.clone(),
            None => mapping.country_for(&cfg.language)?.to_string(),
        };
        let language_probes = probes.by_language(&cfg.language);
        if language_probes.is_empty() {
            return Err(ConfigError::Invalid(format!("no probes for language {:?}", cfg.language)));
        }
        let majorities = MajorityTable::resolve(language_probes.iter().copied(), &survey, &country)?;
        let chrf = ChrfIndex::build(language_probes.iter().copied(), ChrfConfig::default())?;
        let rules = match (&cfg.backend, &cfg.paths.rules) {
            (BackendConfig::Scripted { .. }, Some(p)) => load_rules(&cfg.resolve(p)).map_err(ConfigError::Rules)?,
            _ => Vec::new(),
        };
        Ok(Self { probes, survey, mapping, country, majorities, catalog, chrf, rules })
    }

    pub fn harness(&self, cfg: &RunConfig) -> Result<Harness<'_>, ConfigError> {
        Ok(Harness {
            probes: &self.probes,
            majorities: &self.majorities,
            catalog: &self.catalog,
            chrf: &self.chrf,
            settings: cfg.settings(&self.country)?,
        })
    }

    /// The uncached backend described by the config.
    pub fn backend(&self, cfg: &RunConfig) -> Box<dyn Backend> {
        match &cfg.backend {
            BackendConfig::Scripted { noisy, .. } => {
                Box::new(ScriptedBackend::new(self.rules.clone(), &self.probes, &self.majorities, *noisy))
            }
            BackendConfig::Http { http, .. } => Box::new(HttpBackend::new(http.clone(), http.retry_policy())),
        }
    }

    pub fn meta(&self, cfg: &RunConfig) -> Result<RunMeta, ConfigError> {
        Ok(RunMeta {
            run_id: cfg.run_id(),
            config_digest: cfg.digest(),
            model_id: cfg.backend.model_id().to_string(),
            language: cfg.language.clone(),
            country: self.country.clone(),
            strategy: cfg.strategy()?.name().to_string(),
            mode: match cfg.mode {
                PromptMode::AnswerOnly => "answer-only",
                PromptMode::AnswerWithExplanation => "answer-with-explanation",
            }
            .to_string(),
            k: cfg.k,
            n_samples: cfg.n_samples,
            seeds: cfg.seeds,
            instruction_catalog: self.catalog.version.clone(),
            rng: RunMeta::rng_algorithm(),
            trial: None,
        })
    }
}
