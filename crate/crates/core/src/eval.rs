//! Misalignment detection, self-alignment and error-rate reduction.
//!
//! Every probe is first sampled zero-shot. Probes whose responses are not
//! 100% in line with the survey majority are then re-sampled with survey
//! completed demonstrations prepended, and the two response distributions
//! are compared. Error rates are kept as exact fractions of sample counts so
//! the reduction `(before - after) / before` is computed with one rounding.

use crate::backend::{Backend, BackendError, BackendParams, GenerationRequest};
use crate::chrf::ChrfIndex;
use crate::demo::{select, shuffle_demos, DemoSet, SelectError, SelectionStrategy};
use crate::probe_data::{Answer, Category, MajorityTable, Probe, ProbeSet};
use crate::prompt::{build_prompt, parse_response, serialize_prompt, InstructionCatalog, ParsedValue, PromptError, PromptMode};
use crate::seed::derive_seed;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("probe {probe_id}: {source}")]
    Backend {
        probe_id: String,
        #[source]
        source: BackendError,
    },
    #[error("probe {probe_id}: {source}")]
    Prompt {
        probe_id: String,
        #[source]
        source: PromptError,
    },
    #[error("probe {0} has no survey majority")]
    NoMajority(String),
    #[error("{0}")]
    Domain(#[from] DomainError),
    #[error("robustness needs at least one trial")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("error reduction is undefined when the original error is zero")]
    ZeroOriginalError,
    #[error("error reduction is only defined for improvements ({corrected} >= {original})")]
    NotImproved { original: Fraction, corrected: Fraction },
    #[error("fraction with zero denominator")]
    ZeroDenominator,
}

/// A nonnegative rational number.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self, DomainError> {
        if den == 0 {
            return Err(DomainError::ZeroDenominator);
        }
        Ok(Self { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// Index of the equal-width bin of `[0, 1]` holding this value. Values on
    /// an inner edge go to the higher bin; 1 goes to the last bin.
    pub fn bin(self, bins: usize) -> usize {
        let idx = (u128::from(self.num) * bins as u128 / u128::from(self.den)) as usize;
        idx.min(bins - 1)
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fraction {}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        (u128::from(self.num) * u128::from(other.den)).cmp(&(u128::from(other.num) * u128::from(self.den)))
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Relative decrease of the error rate: `(original - corrected) / original`.
pub fn error_reduction(original: Fraction, corrected: Fraction) -> Result<Fraction, DomainError> {
    if original.is_zero() {
        return Err(DomainError::ZeroOriginalError);
    }
    if corrected >= original {
        return Err(DomainError::NotImproved { original, corrected });
    }
    // (o_n/o_d - c_n/c_d) / (o_n/o_d) = (o_n c_d - c_n o_d) / (o_n c_d)
    let den = original.num * corrected.den;
    let num = den - corrected.num * original.den;
    Fraction::new(num, den)
}

/// Parsed answer counts over the samples of one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseDistribution {
    pub n: u32,
    pub count_a: u32,
    pub count_b: u32,
    pub count_unparsed: u32,
}

impl ResponseDistribution {
    pub fn from_values<I: IntoIterator<Item = ParsedValue>>(values: I) -> Self {
        let mut d = ResponseDistribution { n: 0, count_a: 0, count_b: 0, count_unparsed: 0 };
        for v in values {
            d.n += 1;
            match v {
                ParsedValue::OptionA => d.count_a += 1,
                ParsedValue::OptionB => d.count_b += 1,
                ParsedValue::Unparsed => d.count_unparsed += 1,
            }
        }
        d
    }

    pub fn from_responses(texts: &[String], probe: &Probe) -> Self {
        Self::from_values(texts.iter().map(|t| parse_response(t, probe).value))
    }

    pub fn count(&self, answer: Answer) -> u32 {
        match answer {
            Answer::OptionA => self.count_a,
            Answer::OptionB => self.count_b,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.count_a + self.count_b + self.count_unparsed == self.n
    }

    /// Fraction of samples that do not give the majority answer; unparsed samples count as wrong.
    pub fn error_rate(&self, majority: Answer) -> Fraction {
        Fraction { num: u64::from(self.n - self.count(majority)), den: u64::from(self.n.max(1)) }
    }
}

/// Share of samples in line with the survey majority.
pub fn alignment_fraction(dist: &ResponseDistribution, majority: Answer) -> f64 {
    if dist.n == 0 {
        return 0.0;
    }
    f64::from(dist.count(majority)) / f64::from(dist.n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Improved,
    Unchanged,
    Decreased,
    Skipped,
}

impl Classification {
    pub fn from_rates(original: Fraction, corrected: Fraction) -> Self {
        match corrected.cmp(&original) {
            Ordering::Less => Classification::Improved,
            Ordering::Equal => Classification::Unchanged,
            Ordering::Greater => Classification::Decreased,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Classification::Improved => "+",
            Classification::Unchanged => "/",
            Classification::Decreased => "-",
            Classification::Skipped => "skip",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Improved => "improved",
            Classification::Unchanged => "unchanged",
            Classification::Decreased => "decreased",
            Classification::Skipped => "skipped",
        }
    }
}

impl std::str::FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "improved" => Ok(Classification::Improved),
            "unchanged" => Ok(Classification::Unchanged),
            "decreased" => Ok(Classification::Decreased),
            "skipped" => Ok(Classification::Skipped),
            other => Err(format!("unknown classification {other:?}")),
        }
    }
}

/// Seeds that decide every random choice in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub selection: u64,
    pub option_order: u64,
    pub sampling: u64,
    pub shuffle: u64,
}

impl Seeds {
    pub fn for_probe(&self, probe_id: &str) -> ProbeSeeds {
        ProbeSeeds {
            selection: derive_seed(self.selection, &["selection", probe_id]),
            option_order: derive_seed(self.option_order, &["option-order", probe_id]),
            sampling: derive_seed(self.sampling, &["sampling", probe_id]),
            shuffle: None,
        }
    }

    pub fn shuffle_seed(&self, probe_id: &str, trial: u32) -> u64 {
        derive_seed(self.shuffle, &["shuffle", probe_id, &trial.to_string()])
    }
}

/// The derived seeds actually used for one probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSeeds {
    pub selection: u64,
    pub option_order: u64,
    pub sampling: u64,
    pub shuffle: Option<u64>,
}

/// Zero-shot result for one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotRecord {
    pub probe_id: String,
    pub category: Category,
    pub majority: Answer,
    pub distribution: ResponseDistribution,
}

impl ZeroShotRecord {
    pub fn error_rate(&self) -> Fraction {
        self.distribution.error_rate(self.majority)
    }

    pub fn is_misaligned(&self) -> bool {
        !self.error_rate().is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotRun {
    /// Every probe with a survey majority, sorted by probe_id.
    pub records: Vec<ZeroShotRecord>,
    /// Probes without a survey row for the target country.
    pub missing_survey: Vec<String>,
    /// Probes whose survey shares tie after aggregation.
    pub ties: Vec<String>,
}

impl ZeroShotRun {
    pub fn misaligned(&self) -> impl Iterator<Item = &ZeroShotRecord> {
        self.records.iter().filter(|r| r.is_misaligned())
    }
}

/// Per-probe result of the self-alignment pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOutcome {
    pub probe_id: String,
    pub language: String,
    pub country: String,
    pub category: Category,
    pub majority: Answer,
    pub zero_shot: ResponseDistribution,
    pub corrected: Option<ResponseDistribution>,
    pub delta_original: Fraction,
    pub delta_corrected: Option<Fraction>,
    pub error_reduction: Option<Fraction>,
    pub classification: Classification,
    pub skip_reason: Option<String>,
    pub strategy: SelectionStrategy,
    pub demos: Vec<String>,
    pub trial: Option<u32>,
    pub seeds: ProbeSeeds,
}

impl AlignmentOutcome {
    /// Builds a classified outcome from the two distributions.
    #[allow(clippy::too_many_arguments)]
    pub fn classified(
        probe: &Probe,
        country: &str,
        majority: Answer,
        zero_shot: ResponseDistribution,
        corrected: ResponseDistribution,
        strategy: SelectionStrategy,
        demos: Vec<String>,
        trial: Option<u32>,
        seeds: ProbeSeeds,
    ) -> Self {
        let delta_original = zero_shot.error_rate(majority);
        let delta_corrected = corrected.error_rate(majority);
        let classification = Classification::from_rates(delta_original, delta_corrected);
        let error_reduction = match classification {
            Classification::Improved => error_reduction(delta_original, delta_corrected).ok(),
            _ => None,
        };
        Self {
            probe_id: probe.probe_id.clone(),
            language: probe.language.clone(),
            country: country.to_string(),
            category: probe.category,
            majority,
            zero_shot,
            corrected: Some(corrected),
            delta_original,
            delta_corrected: Some(delta_corrected),
            error_reduction,
            classification,
            skip_reason: None,
            strategy,
            demos,
            trial,
            seeds,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn skipped(
        probe: &Probe,
        country: &str,
        majority: Answer,
        zero_shot: ResponseDistribution,
        strategy: SelectionStrategy,
        reason: String,
        trial: Option<u32>,
        seeds: ProbeSeeds,
    ) -> Self {
        Self {
            probe_id: probe.probe_id.clone(),
            language: probe.language.clone(),
            country: country.to_string(),
            category: probe.category,
            majority,
            zero_shot,
            corrected: None,
            delta_original: zero_shot.error_rate(majority),
            delta_corrected: None,
            error_reduction: None,
            classification: Classification::Skipped,
            skip_reason: Some(reason),
            strategy,
            demos: Vec::new(),
            trial,
            seeds,
        }
    }
}

/// Run-wide settings for the evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub language: String,
    pub country: String,
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub mode: PromptMode,
    pub params: BackendParams,
    pub seeds: Seeds,
    pub parallelism: usize,
}

/// Everything needed to evaluate probes of one language against one country.
pub struct Harness<'a> {
    pub probes: &'a ProbeSet,
    pub majorities: &'a MajorityTable,
    pub catalog: &'a InstructionCatalog,
    pub chrf: &'a ChrfIndex,
    pub settings: EvalSettings,
}

/// Runs `f` over `items` on up to `parallelism` threads; results keep input order.
pub fn run_bounded<T, R, F>(items: &[T], parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let out: Result<Vec<R>, std::convert::Infallible> = try_run_bounded(items, parallelism, |x| Ok(f(x)));
    match out {
        Ok(v) => v,
        Err(never) => match never {},
    }
}

/// Like [`run_bounded`], but stops handing out items once one fails and
/// returns the failure with the lowest input index.
pub fn try_run_bounded<T, R, E, F>(items: &[T], parallelism: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let workers = parallelism.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<R, E>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(AtomicOrdering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, AtomicOrdering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                if r.is_err() {
                    failed.store(true, AtomicOrdering::SeqCst);
                }
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    let slots = slots.into_inner().expect("result slots poisoned");
    if failed.load(AtomicOrdering::SeqCst) {
        let err = slots.into_iter().flatten().find_map(Result::err).expect("a failure was recorded");
        return Err(err);
    }
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

impl<'a> Harness<'a> {
    /// Probes of the configured language, sorted by probe_id.
    pub fn language_probes(&self) -> Vec<&'a Probe> {
        self.probes.by_language(&self.settings.language)
    }

    fn sample(
        &self,
        backend: &dyn Backend,
        probe: &Probe,
        demos: Option<&DemoSet>,
        seeds: &ProbeSeeds,
    ) -> Result<ResponseDistribution, EvalError> {
        let spec = build_prompt(probe, demos, self.probes, self.settings.mode, seeds.option_order, self.catalog)
            .map_err(|source| EvalError::Prompt { probe_id: probe.probe_id.clone(), source })?;
        let prompt = serialize_prompt(&spec);
        let req = GenerationRequest {
            prompt: &prompt,
            params: &self.settings.params,
            run_seed: seeds.sampling,
            context: &probe.probe_id,
        };
        let texts = backend
            .generate(&req)
            .map_err(|source| EvalError::Backend { probe_id: probe.probe_id.clone(), source })?;
        if texts.len() != self.settings.params.n_samples as usize {
            return Err(EvalError::Backend {
                probe_id: probe.probe_id.clone(),
                source: BackendError::Protocol {
                    context: probe.probe_id.clone(),
                    reason: format!("expected {} samples, got {}", self.settings.params.n_samples, texts.len()),
                },
            });
        }
        Ok(ResponseDistribution::from_responses(&texts, probe))
    }

    fn majority(&self, probe: &Probe) -> Result<Answer, EvalError> {
        self.majorities
            .majority(&probe.probe_id)
            .ok_or_else(|| EvalError::NoMajority(probe.probe_id.clone()))
    }

    /// Zero-shot response distribution for one probe.
    pub fn zero_shot(&self, backend: &dyn Backend, probe: &Probe) -> Result<ZeroShotRecord, EvalError> {
        let majority = self.majority(probe)?;
        let seeds = self.settings.seeds.for_probe(&probe.probe_id);
        let distribution = self.sample(backend, probe, None, &seeds)?;
        Ok(ZeroShotRecord { probe_id: probe.probe_id.clone(), category: probe.category, majority, distribution })
    }

    /// Samples every probe of the language zero-shot and flags the misaligned ones.
    pub fn detect_misaligned(&self, backend: &dyn Backend) -> Result<ZeroShotRun, EvalError> {
        let probes = self.language_probes();
        let mut missing_survey = Vec::new();
        let mut ties = Vec::new();
        let mut evaluable = Vec::new();
        for p in probes {
            if self.majorities.majority(&p.probe_id).is_some() {
                evaluable.push(p);
            } else if self.majorities.ties.contains(&p.probe_id) {
                ties.push(p.probe_id.clone());
            } else {
                missing_survey.push(p.probe_id.clone());
            }
        }
        if !missing_survey.is_empty() {
            log::warn!("{} probes have no survey answer for {}", missing_survey.len(), self.settings.country);
        }
        let records = try_run_bounded(&evaluable, self.settings.parallelism, |p| self.zero_shot(backend, p))?;
        Ok(ZeroShotRun { records, missing_survey, ties })
    }

    /// Selects demonstrations for `probe` with the configured strategy.
    pub fn select_demos(&self, probe: &Probe) -> Result<DemoSet, SelectError> {
        let seeds = self.settings.seeds.for_probe(&probe.probe_id);
        select(
            probe,
            self.probes,
            self.majorities,
            self.settings.strategy,
            self.settings.k,
            seeds.selection,
            self.chrf,
        )
    }

    /// Self-alignment of one misaligned probe, reusing its zero-shot distribution.
    pub fn self_align(&self, backend: &dyn Backend, probe: &Probe, zero: &ZeroShotRecord) -> Result<AlignmentOutcome, EvalError> {
        match self.select_demos(probe) {
            Ok(demos) => self.align_with_demos(backend, probe, zero, &demos, None, None),
            Err(e) => Ok(AlignmentOutcome::skipped(
                probe,
                &self.settings.country,
                zero.majority,
                zero.distribution,
                self.settings.strategy,
                e.to_string(),
                None,
                self.settings.seeds.for_probe(&probe.probe_id),
            )),
        }
    }

    /// Samples the few-shot prompt built from `demos` and compares it to the zero-shot distribution.
    pub fn align_with_demos(
        &self,
        backend: &dyn Backend,
        probe: &Probe,
        zero: &ZeroShotRecord,
        demos: &DemoSet,
        trial: Option<u32>,
        shuffle_seed: Option<u64>,
    ) -> Result<AlignmentOutcome, EvalError> {
        let mut seeds = self.settings.seeds.for_probe(&probe.probe_id);
        seeds.shuffle = shuffle_seed;
        let corrected = self.sample(backend, probe, Some(demos), &seeds)?;
        Ok(AlignmentOutcome::classified(
            probe,
            &self.settings.country,
            zero.majority,
            zero.distribution,
            corrected,
            demos.strategy,
            demos.items.iter().map(|d| d.probe_id.clone()).collect(),
            trial,
            seeds,
        ))
    }

    /// One outcome per shuffled ordering of the probe's selected demonstrations.
    pub fn robustness_reorder(
        &self,
        backend: &dyn Backend,
        probe: &Probe,
        zero: &ZeroShotRecord,
        demos: &DemoSet,
        trials: u32,
    ) -> Result<Vec<AlignmentOutcome>, EvalError> {
        if trials == 0 {
            return Err(EvalError::NoTrials);
        }
        (0..trials)
            .map(|t| {
                let seed = self.settings.seeds.shuffle_seed(&probe.probe_id, t);
                let shuffled = shuffle_demos(demos, seed);
                self.align_with_demos(backend, probe, zero, &shuffled, Some(t), Some(seed))
            })
            .collect()
    }

    /// Full protocol: zero-shot detection followed by self-alignment of every misaligned probe.
    pub fn run_self_align(&self, backend: &dyn Backend) -> Result<(ZeroShotRun, Vec<AlignmentOutcome>), EvalError> {
        let zero = self.detect_misaligned(backend)?;
        let misaligned: Vec<&ZeroShotRecord> = zero.misaligned().collect();
        let mut outcomes = try_run_bounded(&misaligned, self.settings.parallelism, |rec| {
            let probe = self.probes.get(&rec.probe_id).expect("zero-shot records come from the probe set");
            self.self_align(backend, probe, rec)
        })?;
        outcomes.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
        Ok((zero, outcomes))
    }

    /// Robustness protocol: outcomes grouped per trial, each sorted by probe_id.
    pub fn run_robustness(
        &self,
        backend: &dyn Backend,
        trials: u32,
    ) -> Result<(ZeroShotRun, Vec<Vec<AlignmentOutcome>>), EvalError> {
        if trials == 0 {
            return Err(EvalError::NoTrials);
        }
        let zero = self.detect_misaligned(backend)?;
        let misaligned: Vec<&ZeroShotRecord> = zero.misaligned().collect();
        let per_probe = try_run_bounded(&misaligned, self.settings.parallelism, |rec| {
            let probe = self.probes.get(&rec.probe_id).expect("zero-shot records come from the probe set");
            match self.select_demos(probe) {
                Ok(demos) => self.robustness_reorder(backend, probe, rec, &demos, trials),
                Err(e) => Ok((0..trials)
                    .map(|t| {
                        AlignmentOutcome::skipped(
                            probe,
                            &self.settings.country,
                            rec.majority,
                            rec.distribution,
                            self.settings.strategy,
                            e.to_string(),
                            Some(t),
                            self.settings.seeds.for_probe(&probe.probe_id),
                        )
                    })
                    .collect()),
            }
        })?;
        let mut per_trial: Vec<Vec<AlignmentOutcome>> = (0..trials).map(|_| Vec::new()).collect();
        for outcomes in per_probe {
            for o in outcomes {
                let t = o.trial.expect("robustness outcomes carry a trial") as usize;
                per_trial[t].push(o);
            }
        }
        for trial in &mut per_trial {
            trial.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
        }
        Ok((zero, per_trial))
    }
}
