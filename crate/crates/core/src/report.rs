//! Run summaries and their CSV/JSON artifacts.
//!
//! All files are byte-deterministic given their inputs: no timestamps, fixed
//! column order, struct-ordered JSON keys. Every row carries the run id, and
//! `summary.json` records the config digest and seeds behind it.

use crate::eval::{AlignmentOutcome, Classification, Fraction, ZeroShotRun};
use crate::probe_data::{Answer, Category};
use crate::seed::RNG_ALGORITHM;
use crate::eval::Seeds;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const ERROR_SIZE_BINS: usize = 10;
pub const ERROR_REDUCTION_BINS: usize = 5;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

/// Identifies the invocation a report came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub config_digest: String,
    pub model_id: String,
    pub language: String,
    pub country: String,
    pub strategy: String,
    pub mode: String,
    pub k: usize,
    pub n_samples: u32,
    pub seeds: Seeds,
    pub instruction_catalog: String,
    pub rng: String,
    pub trial: Option<u32>,
}

impl RunMeta {
    pub fn rng_algorithm() -> String {
        RNG_ALGORITHM.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub misaligned: u64,
    pub improved: u64,
    pub unchanged: u64,
    pub decreased: u64,
    pub skipped: u64,
}

impl Totals {
    pub fn evaluated(&self) -> u64 {
        self.improved + self.unchanged + self.decreased
    }
}

/// Counts over equal-width percentage bins of `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub name: String,
    pub bin_edges: Vec<u32>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(name: &str, bins: usize) -> Self {
        let width = 100 / bins as u32;
        Self {
            name: name.to_string(),
            bin_edges: (0..=bins as u32).map(|i| i * width).collect(),
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, value: Fraction) {
        let bin = value.bin(self.counts.len());
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub index: u8,
    pub name: String,
    pub improved: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub meta: RunMeta,
    pub totals: Totals,
    /// improved / (improved + unchanged + decreased); zero for an empty run.
    pub improvement_rate: f64,
    pub unchanged_rate: f64,
    pub decreased_rate: f64,
    /// Zero-shot error sizes of the misaligned probes, 10-point bins.
    pub error_sizes: Histogram,
    /// Error-rate reductions of improved probes, 20-point bins.
    pub error_reductions: Histogram,
    pub categories: Vec<CategoryCount>,
}

/// One row of `outcomes.csv`; also the input of [`summarize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub run_id: String,
    pub probe_id: String,
    pub language: String,
    pub country: String,
    pub category: Category,
    pub majority: Answer,
    pub n_zero_shot: u32,
    pub wrong_zero_shot: u32,
    pub n_corrected: Option<u32>,
    pub wrong_corrected: Option<u32>,
    pub delta_original: f64,
    pub delta_corrected: Option<f64>,
    pub error_reduction: Option<f64>,
    pub classification: Classification,
    pub strategy: String,
    pub trial: Option<u32>,
    pub demos: String,
    pub skip_reason: Option<String>,
}

impl OutcomeRow {
    pub fn from_outcome(run_id: &str, o: &AlignmentOutcome) -> Self {
        let wrong = |d: &crate::eval::ResponseDistribution| d.n - d.count(o.majority);
        Self {
            run_id: run_id.to_string(),
            probe_id: o.probe_id.clone(),
            language: o.language.clone(),
            country: o.country.clone(),
            category: o.category,
            majority: o.majority,
            n_zero_shot: o.zero_shot.n,
            wrong_zero_shot: wrong(&o.zero_shot),
            n_corrected: o.corrected.map(|d| d.n),
            wrong_corrected: o.corrected.as_ref().map(wrong),
            delta_original: o.delta_original.value(),
            delta_corrected: o.delta_corrected.map(Fraction::value),
            error_reduction: o.error_reduction.map(Fraction::value),
            classification: o.classification,
            strategy: o.strategy.to_string(),
            trial: o.trial,
            demos: o.demos.join(";"),
            skip_reason: o.skip_reason.clone(),
        }
    }

    pub fn delta_original_fraction(&self) -> Fraction {
        Fraction { num: u64::from(self.wrong_zero_shot), den: u64::from(self.n_zero_shot.max(1)) }
    }

    pub fn delta_corrected_fraction(&self) -> Option<Fraction> {
        match (self.wrong_corrected, self.n_corrected) {
            (Some(w), Some(n)) => Some(Fraction { num: u64::from(w), den: u64::from(n.max(1)) }),
            _ => None,
        }
    }

    pub fn error_reduction_fraction(&self) -> Option<Fraction> {
        if self.classification != Classification::Improved {
            return None;
        }
        crate::eval::error_reduction(self.delta_original_fraction(), self.delta_corrected_fraction()?).ok()
    }
}

pub fn rows(run_id: &str, outcomes: &[AlignmentOutcome]) -> Vec<OutcomeRow> {
    outcomes.iter().map(|o| OutcomeRow::from_outcome(run_id, o)).collect()
}

fn rate(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

/// Aggregates the outcomes of one run (or one robustness trial).
pub fn summarize(meta: &RunMeta, rows: &[OutcomeRow]) -> RunSummary {
    if rows.is_empty() {
        log::warn!("run {} has no outcomes; writing an all-zero summary", meta.run_id);
    }
    let mut totals = Totals { misaligned: rows.len() as u64, ..Default::default() };
    let mut error_sizes = Histogram::new("error_size", ERROR_SIZE_BINS);
    let mut error_reductions = Histogram::new("error_reduction", ERROR_REDUCTION_BINS);
    let mut by_category: BTreeMap<Category, u64> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for row in rows {
        error_sizes.add(row.delta_original_fraction());
        match row.classification {
            Classification::Improved => {
                totals.improved += 1;
                *by_category.entry(row.category).or_default() += 1;
                if let Some(r) = row.error_reduction_fraction() {
                    error_reductions.add(r);
                }
            }
            Classification::Unchanged => totals.unchanged += 1,
            Classification::Decreased => totals.decreased += 1,
            Classification::Skipped => totals.skipped += 1,
        }
    }
    let evaluated = totals.evaluated();
    RunSummary {
        meta: meta.clone(),
        improvement_rate: rate(totals.improved, evaluated),
        unchanged_rate: rate(totals.unchanged, evaluated),
        decreased_rate: rate(totals.decreased, evaluated),
        totals,
        error_sizes,
        error_reductions,
        categories: by_category
            .into_iter()
            .map(|(c, improved)| CategoryCount { index: c.index(), name: c.name().to_string(), improved })
            .collect(),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn csv_bytes<F>(path: &Path, fill: F) -> Result<Vec<u8>, ReportError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    fill(&mut w).map_err(|e| ReportError::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
    w.into_inner().map_err(|e| ReportError::Parse { path: path.to_path_buf(), reason: e.to_string() })
}

pub fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summaries serialize");
    s.push('\n');
    s
}

pub fn outcomes_csv(rows: &[OutcomeRow]) -> Result<Vec<u8>, ReportError> {
    csv_bytes(Path::new("outcomes.csv"), |w| {
        if rows.is_empty() {
            w.write_record(OUTCOME_COLUMNS)?;
        }
        for row in rows {
            w.serialize(row)?;
        }
        Ok(())
    })
}

const OUTCOME_COLUMNS: [&str; 18] = [
    "run_id",
    "probe_id",
    "language",
    "country",
    "category",
    "majority",
    "n_zero_shot",
    "wrong_zero_shot",
    "n_corrected",
    "wrong_corrected",
    "delta_original",
    "delta_corrected",
    "error_reduction",
    "classification",
    "strategy",
    "trial",
    "demos",
    "skip_reason",
];

pub fn histograms_csv(summary: &RunSummary) -> Result<Vec<u8>, ReportError> {
    csv_bytes(Path::new("histograms.csv"), |w| {
        w.write_record(["run_id", "histogram", "bin_lower_pct", "bin_upper_pct", "count"])?;
        for h in [&summary.error_sizes, &summary.error_reductions] {
            for (i, count) in h.counts.iter().enumerate() {
                w.write_record([
                    summary.meta.run_id.as_str(),
                    h.name.as_str(),
                    &h.bin_edges[i].to_string(),
                    &h.bin_edges[i + 1].to_string(),
                    &count.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

pub fn categories_csv(summary: &RunSummary) -> Result<Vec<u8>, ReportError> {
    csv_bytes(Path::new("categories.csv"), |w| {
        w.write_record(["run_id", "category_index", "category_name", "improved"])?;
        for c in &summary.categories {
            w.write_record([
                summary.meta.run_id.as_str(),
                &c.index.to_string(),
                c.name.as_str(),
                &c.improved.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// The `+ / -` percentages of a run, two decimals.
pub fn effects_csv(summary: &RunSummary) -> Result<Vec<u8>, ReportError> {
    csv_bytes(Path::new("effects.csv"), |w| {
        w.write_record([
            "run_id", "model_id", "language", "country", "strategy", "misaligned", "evaluated", "skipped",
            "improved_pct", "unchanged_pct", "decreased_pct",
        ])?;
        let t = &summary.totals;
        w.write_record([
            summary.meta.run_id.clone(),
            summary.meta.model_id.clone(),
            summary.meta.language.clone(),
            summary.meta.country.clone(),
            summary.meta.strategy.clone(),
            t.misaligned.to_string(),
            t.evaluated().to_string(),
            t.skipped.to_string(),
            format!("{:.2}", summary.improvement_rate * 100.0),
            format!("{:.2}", summary.unchanged_rate * 100.0),
            format!("{:.2}", summary.decreased_rate * 100.0),
        ])?;
        Ok(())
    })
}

/// Writes summary.json, outcomes.csv, histograms.csv, categories.csv and effects.csv into `dir`.
pub fn emit(dir: &Path, summary: &RunSummary, rows: &[OutcomeRow]) -> Result<(), ReportError> {
    write(&dir.join("summary.json"), summary_json(summary).as_bytes())?;
    write(&dir.join("outcomes.csv"), &outcomes_csv(rows)?)?;
    write(&dir.join("histograms.csv"), &histograms_csv(summary)?)?;
    write(&dir.join("categories.csv"), &categories_csv(summary)?)?;
    write(&dir.join("effects.csv"), &effects_csv(summary)?)?;
    Ok(())
}

pub fn read_outcomes_csv(path: &Path) -> Result<Vec<OutcomeRow>, ReportError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    reader
        .deserialize()
        .collect::<Result<Vec<OutcomeRow>, _>>()
        .map_err(|e| ReportError::Parse { path: path.to_path_buf(), reason: e.to_string() })
}

pub fn read_summary(path: &Path) -> Result<RunSummary, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Parse { path: path.to_path_buf(), reason: e.to_string() })
}

/// Zero-shot stage summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotSummary {
    pub meta: RunMeta,
    pub evaluated: u64,
    pub misaligned: u64,
    pub misaligned_rate: f64,
    pub missing_survey: Vec<String>,
    pub ties: Vec<String>,
    pub error_sizes: Histogram,
}

pub fn summarize_zero_shot(meta: &RunMeta, run: &ZeroShotRun) -> ZeroShotSummary {
    let mut error_sizes = Histogram::new("error_size", ERROR_SIZE_BINS);
    let mut misaligned = 0u64;
    for rec in run.misaligned() {
        misaligned += 1;
        error_sizes.add(rec.error_rate());
    }
    let evaluated = run.records.len() as u64;
    ZeroShotSummary {
        meta: meta.clone(),
        evaluated,
        misaligned,
        misaligned_rate: rate(misaligned, evaluated),
        missing_survey: run.missing_survey.clone(),
        ties: run.ties.clone(),
        error_sizes,
    }
}

/// Writes misaligned.csv, zero_shot_histogram.csv and zero_shot_summary.json.
pub fn emit_zero_shot(dir: &Path, summary: &ZeroShotSummary, run: &ZeroShotRun) -> Result<(), ReportError> {
    let run_id = summary.meta.run_id.as_str();
    let misaligned = csv_bytes(Path::new("misaligned.csv"), |w| {
        w.write_record([
            "run_id", "probe_id", "category", "majority", "n", "count_a", "count_b", "count_unparsed",
            "delta_original",
        ])?;
        for rec in run.misaligned() {
            let d = &rec.distribution;
            w.write_record([
                run_id.to_string(),
                rec.probe_id.clone(),
                rec.category.index().to_string(),
                rec.majority.to_string(),
                d.n.to_string(),
                d.count_a.to_string(),
                d.count_b.to_string(),
                d.count_unparsed.to_string(),
                rec.error_rate().value().to_string(),
            ])?;
        }
        Ok(())
    })?;
    let hist = csv_bytes(Path::new("zero_shot_histogram.csv"), |w| {
        w.write_record(["run_id", "histogram", "bin_lower_pct", "bin_upper_pct", "count"])?;
        let h = &summary.error_sizes;
        for (i, count) in h.counts.iter().enumerate() {
            w.write_record([
                run_id,
                h.name.as_str(),
                &h.bin_edges[i].to_string(),
                &h.bin_edges[i + 1].to_string(),
                &count.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let mut json = serde_json::to_string_pretty(summary).expect("summaries serialize");
    json.push('\n');
    write(&dir.join("misaligned.csv"), &misaligned)?;
    write(&dir.join("zero_shot_histogram.csv"), &hist)?;
    write(&dir.join("zero_shot_summary.json"), json.as_bytes())?;
    Ok(())
}

/// Per-probe share of robustness trials classified as improved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRobustness {
    pub probe_id: String,
    pub trials: u32,
    pub improved_trials: u32,
    pub improved_fraction: f64,
}

pub fn probe_robustness(per_trial: &[Vec<AlignmentOutcome>]) -> Vec<ProbeRobustness> {
    let mut by_probe: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for trial in per_trial {
        for o in trial {
            let e = by_probe.entry(&o.probe_id).or_default();
            e.0 += 1;
            if o.classification == Classification::Improved {
                e.1 += 1;
            }
        }
    }
    by_probe
        .into_iter()
        .map(|(id, (trials, improved))| ProbeRobustness {
            probe_id: id.to_string(),
            trials,
            improved_trials: improved,
            improved_fraction: rate(u64::from(improved), u64::from(trials)),
        })
        .collect()
}

/// Writes one summary directory per trial plus robustness.csv and robustness_probes.csv.
pub fn emit_robustness(
    dir: &Path,
    meta: &RunMeta,
    per_trial: &[Vec<AlignmentOutcome>],
) -> Result<Vec<RunSummary>, ReportError> {
    let mut summaries = Vec::with_capacity(per_trial.len());
    for (t, outcomes) in per_trial.iter().enumerate() {
        let trial_meta = RunMeta { trial: Some(t as u32), ..meta.clone() };
        let trial_rows = rows(&meta.run_id, outcomes);
        let summary = summarize(&trial_meta, &trial_rows);
        emit(&dir.join(format!("trial-{t:03}")), &summary, &trial_rows)?;
        summaries.push(summary);
    }
    let table = csv_bytes(Path::new("robustness.csv"), |w| {
        w.write_record(["run_id", "trial", "misaligned", "improved", "unchanged", "decreased", "skipped", "improved_pct"])?;
        for s in &summaries {
            let t = &s.totals;
            w.write_record([
                meta.run_id.clone(),
                s.meta.trial.unwrap_or_default().to_string(),
                t.misaligned.to_string(),
                t.improved.to_string(),
                t.unchanged.to_string(),
                t.decreased.to_string(),
                t.skipped.to_string(),
                format!("{:.2}", s.improvement_rate * 100.0),
            ])?;
        }
        Ok(())
    })?;
    let probes = csv_bytes(Path::new("robustness_probes.csv"), |w| {
        w.write_record(["run_id", "probe_id", "trials", "improved_trials", "improved_fraction"])?;
        for p in probe_robustness(per_trial) {
            w.write_record([
                meta.run_id.clone(),
                p.probe_id,
                p.trials.to_string(),
                p.improved_trials.to_string(),
                format!("{:.2}", p.improved_fraction),
            ])?;
        }
        Ok(())
    })?;
    write(&dir.join("robustness.csv"), &table)?;
    write(&dir.join("robustness_probes.csv"), &probes)?;
    Ok(summaries)
}
