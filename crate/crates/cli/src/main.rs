mod args;

use args::{Cli, Command, RunArgs};
use clap::Parser;
use selfalign::backend::{Backend, BackendError, CachedBackend, GenerationRequest, ResponseCache};
use selfalign::chrf::{chrf_pp, ChrfConfig};
use selfalign::config::{ConfigError, Inputs, RunConfig};
use selfalign::demo::select;
use selfalign::eval::EvalError;
use selfalign::prompt::render_completed;
use selfalign::report::{self, ReportError, RunSummary};
use std::fmt::Display;
use std::path::Path;
use std::process::ExitCode;

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl Display) -> Self {
        Self { code: 1, message: e.to_string() }
    }

    fn backend(e: impl Display) -> Self {
        Self { code: 2, message: e.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::config(e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Backend { .. } => Failure::backend(e),
            other => Failure::config(other),
        }
    }
}

fn load(run: &RunArgs) -> Result<(RunConfig, Inputs), Failure> {
    let mut cfg = RunConfig::load(&run.config)?;
    run.apply(&mut cfg);
    let inputs = Inputs::load(&cfg)?;
    Ok((cfg, inputs))
}

/// Stands in for the model during cache-only replays.
struct CacheMiss;

impl Backend for CacheMiss {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError> {
        Err(BackendError::Unavailable { context: req.context.to_string(), reason: "not in the response cache".into() })
    }
}

/// The configured backend, behind the response cache when one is set.
fn open_backend(cfg: &RunConfig, inputs: &Inputs, cache_only: bool) -> Result<Box<dyn Backend>, Failure> {
    let inner = if cache_only { Box::new(CacheMiss) } else { inputs.backend(cfg) };
    match cfg.cache_path() {
        Some(path) => {
            let cache = ResponseCache::open(&path).map_err(Failure::backend)?;
            log::info!("response cache {} holds {} samples", path.display(), cache.len());
            Ok(Box::new(CachedBackend::new(inner, cache)))
        }
        None if cache_only => Err(Failure::config("--cache-only needs a cache path")),
        None => Ok(inner),
    }
}

fn print_summary(summary: &RunSummary) {
    let t = &summary.totals;
    println!(
        "{} {} ({}): misaligned {}, improved {} ({:.2}%), unchanged {}, decreased {}, skipped {}",
        summary.meta.model_id,
        summary.meta.language,
        summary.meta.country,
        t.misaligned,
        t.improved,
        summary.improvement_rate * 100.0,
        t.unchanged,
        t.decreased,
        t.skipped,
    );
}

fn cmd_validate(run: &RunArgs) -> Result<(), Failure> {
    let (cfg, inputs) = load(run)?;
    let language_probes = inputs.probes.by_language(&cfg.language);
    println!("config digest {}", cfg.digest());
    println!("probes: {} loaded, {} in {:?}", inputs.probes.len(), language_probes.len(), cfg.language);
    println!("languages: {}", inputs.probes.languages().join(", "));
    for lang in inputs.probes.languages() {
        if inputs.mapping.country_for(&lang).is_err() {
            println!("warning: language {lang:?} has no mapped country");
        }
    }
    println!("survey rows: {} ({} countries)", inputs.survey.len(), inputs.survey.countries().len());
    println!("country: {}", inputs.country);
    println!("majorities: {}", inputs.majorities.len());
    println!("missing survey answers: {}", inputs.majorities.missing.len());
    for id in &inputs.majorities.missing {
        println!("  {id}");
    }
    println!("tied survey answers: {}", inputs.majorities.ties.len());
    for id in &inputs.majorities.ties {
        println!("  {id}");
    }
    println!("instruction catalog: {}", inputs.catalog.version);
    println!("ok");
    Ok(())
}

fn cmd_chrf(hypothesis: &str, reference: &str) -> Result<(), Failure> {
    let score = chrf_pp(hypothesis, reference, &ChrfConfig::default()).map_err(Failure::config)?;
    println!("{:.4}", score * 100.0);
    Ok(())
}

fn cmd_select(run: &RunArgs, probe_id: &str, seed: Option<u64>) -> Result<(), Failure> {
    let (cfg, inputs) = load(run)?;
    let probe = inputs
        .probes
        .get(probe_id)
        .ok_or_else(|| Failure::config(format!("unknown probe {probe_id:?}")))?;
    let strategy = cfg.strategy().map_err(Failure::config)?;
    let seed = seed.unwrap_or_else(|| cfg.seeds.for_probe(probe_id).selection);
    let demos = select(probe, &inputs.probes, &inputs.majorities, strategy, cfg.k, seed, &inputs.chrf)
        .map_err(Failure::config)?;
    let scores = if strategy.uses_chrf() {
        let ranked = inputs
            .chrf
            .rank(probe, demos.items.iter().filter_map(|d| inputs.probes.get(&d.probe_id)), demos.len())
            .map_err(Failure::config)?;
        ranked.into_iter().map(|r| (r.probe_id, r.score)).collect()
    } else {
        std::collections::HashMap::new()
    };
    println!("{} ({}): {}", probe.probe_id, strategy, probe.template);
    for d in &demos.items {
        let p = inputs.probes.get(&d.probe_id).expect("demos come from the pool");
        match scores.get(&d.probe_id) {
            Some(s) => println!("{}\t{:.4}\t{}", d.probe_id, s * 100.0, render_completed(p, d.answer)),
            None => println!("{}\t-\t{}", d.probe_id, render_completed(p, d.answer)),
        }
    }
    Ok(())
}

fn cmd_zero_shot(run: &RunArgs) -> Result<(), Failure> {
    let (cfg, inputs) = load(run)?;
    let backend = open_backend(&cfg, &inputs, run.cache_only)?;
    let harness = inputs.harness(&cfg)?;
    let meta = inputs.meta(&cfg)?;
    let zero = harness.detect_misaligned(backend.as_ref())?;
    let summary = report::summarize_zero_shot(&meta, &zero);
    let out = cfg.output_path();
    report::emit_zero_shot(&out, &summary, &zero)?;
    println!(
        "{} {} ({}): {} of {} probes misaligned; wrote {}",
        meta.model_id,
        meta.language,
        meta.country,
        summary.misaligned,
        summary.evaluated,
        out.display()
    );
    Ok(())
}

fn cmd_self_align(run: &RunArgs) -> Result<(), Failure> {
    let (cfg, inputs) = load(run)?;
    let backend = open_backend(&cfg, &inputs, run.cache_only)?;
    let harness = inputs.harness(&cfg)?;
    let meta = inputs.meta(&cfg)?;
    let (zero, outcomes) = harness.run_self_align(backend.as_ref())?;
    let out = cfg.output_path();
    report::emit_zero_shot(&out, &report::summarize_zero_shot(&meta, &zero), &zero)?;
    let rows = report::rows(&meta.run_id, &outcomes);
    let summary = report::summarize(&meta, &rows);
    report::emit(&out, &summary, &rows)?;
    print_summary(&summary);
    Ok(())
}

fn cmd_robustness(run: &RunArgs, trials: u32) -> Result<(), Failure> {
    if trials == 0 {
        return Err(Failure::config("--trials must be at least 1"));
    }
    let (cfg, inputs) = load(run)?;
    let backend = open_backend(&cfg, &inputs, run.cache_only)?;
    let harness = inputs.harness(&cfg)?;
    let meta = inputs.meta(&cfg)?;
    let (zero, per_trial) = harness.run_robustness(backend.as_ref(), trials)?;
    let out = cfg.output_path().join("robustness");
    report::emit_zero_shot(&out, &report::summarize_zero_shot(&meta, &zero), &zero)?;
    let summaries = report::emit_robustness(&out, &meta, &per_trial)?;
    for s in &summaries {
        print!("trial {}: ", s.meta.trial.unwrap_or_default());
        print_summary(s);
    }
    Ok(())
}

fn cmd_report(dir: &Path, check: bool) -> Result<(), Failure> {
    let summary_path = dir.join("summary.json");
    let stored = report::read_summary(&summary_path)?;
    let rows = report::read_outcomes_csv(&dir.join("outcomes.csv"))?;
    let rebuilt = report::summarize(&stored.meta, &rows);
    if check {
        let on_disk = std::fs::read_to_string(&summary_path).map_err(Failure::config)?;
        if report::summary_json(&rebuilt) != on_disk {
            return Err(Failure::config(format!("{} does not match outcomes.csv", summary_path.display())));
        }
        println!("{} matches outcomes.csv", summary_path.display());
    } else {
        report::emit(dir, &rebuilt, &rows)?;
    }
    print_summary(&rebuilt);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Validate(run) => cmd_validate(run),
        Command::Chrf { hypothesis, reference } => cmd_chrf(hypothesis, reference),
        Command::Select { run, probe, seed } => cmd_select(run, probe, *seed),
        Command::ZeroShot(run) => cmd_zero_shot(run),
        Command::SelfAlign(run) => cmd_self_align(run),
        Command::Robustness { run, trials } => cmd_robustness(run, *trials),
        Command::Report { dir, check } => cmd_report(dir, *check),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
