use clap::{Args, Parser, Subcommand, ValueEnum};
use selfalign::config::RunConfig;
use selfalign::prompt::PromptMode;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "selfalign",
    version,
    about = "Probe cultural value alignment of language models and self-align them with survey-completed demonstrations",
    after_help = "Run settings come from the JSON file given with --config. Flags override file values; \
                  fields absent from both take their defaults (flags > file > defaults).\n\n\
                  Exit codes: 0 success, 1 configuration or data error, 2 backend failure."
)]
pub struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check probes, survey, mapping and catalog consistency without calling a backend.
    Validate(RunArgs),
    /// Score a hypothesis against a reference with chrF++ (printed on a 0-100 scale).
    Chrf {
        hypothesis: String,
        reference: String,
    },
    /// Show the demonstrations a strategy picks for one probe.
    Select {
        #[command(flatten)]
        run: RunArgs,
        /// Test probe id.
        #[arg(long)]
        probe: String,
        /// Selection seed (defaults to the per-probe seed derived from the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample every probe without demonstrations and list the misaligned ones.
    ZeroShot(RunArgs),
    /// Zero-shot detection followed by self-alignment of every misaligned probe.
    SelfAlign(RunArgs),
    /// Self-alignment repeated over shuffled demonstration orders.
    Robustness {
        #[command(flatten)]
        run: RunArgs,
        /// Number of shuffled orders per probe.
        #[arg(long, default_value_t = 10)]
        trials: u32,
    },
    /// Rebuild the summary files of a run directory from its outcomes.csv.
    Report {
        /// Directory holding summary.json and outcomes.csv.
        dir: PathBuf,
        /// Only compare; exit 1 if the rebuilt summary differs from the stored one.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    AnswerOnly,
    AnswerWithExplanation,
}

impl From<ModeArg> for PromptMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::AnswerOnly => PromptMode::AnswerOnly,
            ModeArg::AnswerWithExplanation => PromptMode::AnswerWithExplanation,
        }
    }
}

/// Flags mirroring the run config fields.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (JSON).
    #[arg(short, long)]
    pub config: PathBuf,
    #[arg(long)]
    pub language: Option<String>,
    /// Survey country; defaults to the language's mapped country.
    #[arg(long)]
    pub country: Option<String>,
    /// fully-random, random-within-category, chrf-within-category or chrf-across-categories.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Demonstrations per prompt.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_samples: Option<u32>,
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Response cache file.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Ignore the configured cache.
    #[arg(long, conflicts_with = "cache")]
    pub no_cache: bool,
    /// Serve every sample from the cache and fail on a miss instead of calling the backend.
    #[arg(long, conflicts_with = "no_cache")]
    pub cache_only: bool,
    /// Concurrent backend requests.
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub seed_selection: Option<u64>,
    #[arg(long)]
    pub seed_option_order: Option<u64>,
    #[arg(long)]
    pub seed_sampling: Option<u64>,
    #[arg(long)]
    pub seed_shuffle: Option<u64>,
}

impl RunArgs {
    /// Applies flag values on top of the loaded file. Flag paths are relative to the working directory.
    pub fn apply(&self, cfg: &mut RunConfig) {
        let cwd = |p: &PathBuf| std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.clone());
        if let Some(v) = &self.language {
            cfg.language = v.clone();
        }
        if let Some(v) = &self.country {
            cfg.country = Some(v.clone());
        }
        if let Some(v) = &self.strategy {
            cfg.strategy = v.clone();
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.n_samples {
            cfg.n_samples = v;
        }
        if let Some(v) = self.max_new_tokens {
            cfg.max_new_tokens = Some(v);
        }
        if let Some(v) = self.mode {
            cfg.mode = v.into();
        }
        if let Some(v) = self.temperature {
            match &mut cfg.backend {
                selfalign::config::BackendConfig::Scripted { temperature, .. }
                | selfalign::config::BackendConfig::Http { temperature, .. } => *temperature = Some(v),
            }
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = cwd(v);
        }
        if let Some(v) = &self.cache {
            cfg.cache = Some(cwd(v));
        }
        if self.no_cache {
            cfg.cache = None;
        }
        if let Some(v) = self.parallelism {
            cfg.parallelism = v;
        }
        if let Some(v) = self.seed_selection {
            cfg.seeds.selection = v;
        }
        if let Some(v) = self.seed_option_order {
            cfg.seeds.option_order = v;
        }
        if let Some(v) = self.seed_sampling {
            cfg.seeds.sampling = v;
        }
        if let Some(v) = self.seed_shuffle {
            cfg.seeds.shuffle = v;
        }
    }
}
