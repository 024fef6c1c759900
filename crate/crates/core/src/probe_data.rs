//! Probes, survey answer tables and the language to country mapping.
//!
//! Probe and survey files are JSON-lines; the mapping is a two-column CSV.
//! Loaded tables are immutable and can be shared across threads.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Blank marker used in probe templates.
pub const BLANK: char = '_';

/// Tolerance on the sum of Likert shares.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-6;

/// Aggregated shares closer than this are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProbeDataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("{path}:{line}: duplicate probe_id {probe_id:?}")]
    DuplicateProbeId { path: PathBuf, line: usize, probe_id: String },
    #[error("{path}:{line}: category {index} is excluded (no probes can be built from it)")]
    ExcludedCategory { path: PathBuf, line: usize, index: u8 },
    #[error("{path}:{line}: unknown category index {index}")]
    UnknownCategory { path: PathBuf, line: usize, index: i64 },
    #[error("{path}:{line}: shares for ({question_id}, {country}) sum to {sum}, expected 1")]
    SharesSum { path: PathBuf, line: usize, question_id: String, country: String, sum: f64 },
    #[error("{path}:{line}: duplicate survey key ({question_id}, {country})")]
    DuplicateSurveyKey { path: PathBuf, line: usize, question_id: String, country: String },
    #[error("invalid Likert distribution for ({question_id}, {country}): {reason}")]
    InvalidDistribution { question_id: String, country: String, reason: String },
    #[error("tie after aggregation for ({question_id}, {country})")]
    Tie { question_id: String, country: String },
    #[error("no country mapped for language {0:?}")]
    UnmappedLanguage(String),
}

/// One of the two answer options of a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    OptionA,
    OptionB,
}

impl Answer {
    pub fn other(self) -> Answer {
        match self {
            Answer::OptionA => Answer::OptionB,
            Answer::OptionB => Answer::OptionA,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::OptionA => "option_a",
            Answer::OptionB => "option_b",
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Survey question categories that probes are drawn from.
///
/// Economic Values (4) and the Post-materialist Index (8) have no probes and
/// are rejected at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Category {
    SocialValues,
    Wellbeing,
    SocialCapital,
    Corruption,
    Migration,
    Security,
    ScienceTechnology,
    ReligiousValues,
    EthicalValues,
    PoliticalInterest,
    PoliticalCulture,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::SocialValues,
        Category::Wellbeing,
        Category::SocialCapital,
        Category::Corruption,
        Category::Migration,
        Category::Security,
        Category::ScienceTechnology,
        Category::ReligiousValues,
        Category::EthicalValues,
        Category::PoliticalInterest,
        Category::PoliticalCulture,
    ];

    pub fn index(self) -> u8 {
        match self {
            Category::SocialValues => 1,
            Category::Wellbeing => 2,
            Category::SocialCapital => 3,
            Category::Corruption => 5,
            Category::Migration => 6,
            Category::Security => 7,
            Category::ScienceTechnology => 9,
            Category::ReligiousValues => 10,
            Category::EthicalValues => 11,
            Category::PoliticalInterest => 12,
            Category::PoliticalCulture => 13,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::SocialValues => "Social Values, Attitudes and Stereotypes",
            Category::Wellbeing => "Happiness and Well-being",
            Category::SocialCapital => "Social Capital, Trust and Organisational Membership",
            Category::Corruption => "Corruption",
            Category::Migration => "Migration",
            Category::Security => "Security",
            Category::ScienceTechnology => "Science and Technology",
            Category::ReligiousValues => "Religious Values",
            Category::EthicalValues => "Ethical Values and Norms",
            Category::PoliticalInterest => "Political Interest and Political Participation",
            Category::PoliticalCulture => "Political Culture and Regimes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryError {
    #[error("category {0} is excluded")]
    Excluded(u8),
    #[error("unknown category index {0}")]
    Unknown(u8),
}

impl TryFrom<u8> for Category {
    type Error = CategoryError;

    fn try_from(index: u8) -> Result<Self, Self::Error> {
        match index {
            4 | 8 => Err(CategoryError::Excluded(index)),
            _ => Category::ALL
                .into_iter()
                .find(|c| c.index() == index)
                .ok_or(CategoryError::Unknown(index)),
        }
    }
}

impl From<Category> for u8 {
    fn from(c: Category) -> u8 {
        c.index()
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.index(), self.name())
    }
}

/// A cloze-style value probe with exactly two answer options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub probe_id: String,
    pub question_id: String,
    pub language: String,
    pub category: Category,
    pub template: String,
    pub option_a: String,
    pub option_b: String,
}

impl Probe {
    pub fn option(&self, answer: Answer) -> &str {
        match answer {
            Answer::OptionA => &self.option_a,
            Answer::OptionB => &self.option_b,
        }
    }

    /// Checks the probe invariants, returning a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.probe_id.trim().is_empty() {
            return Err("empty probe_id".into());
        }
        if self.language.trim().is_empty() {
            return Err("empty language".into());
        }
        let blanks = self.template.chars().filter(|&c| c == BLANK).count();
        if blanks != 1 {
            return Err(format!("template must contain exactly one '_' marker, found {blanks}"));
        }
        for (name, text) in [("option_a", &self.option_a), ("option_b", &self.option_b)] {
            if text.trim().is_empty() {
                return Err(format!("{name} is empty"));
            }
            if text.contains(BLANK) {
                return Err(format!("{name} contains the blank marker"));
            }
            if text.contains(['\n', '\r']) {
                return Err(format!("{name} contains a line break"));
            }
        }
        if self.template.contains(['\n', '\r']) {
            return Err("template contains a line break".into());
        }
        if self.option_a.trim() == self.option_b.trim() {
            return Err("option_a and option_b are identical".into());
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeRecord {
    probe_id: String,
    question_id: String,
    language: String,
    category_index: i64,
    template: String,
    option_a: String,
    option_b: String,
}

/// An immutable collection of probes with unique ids, in file order.
#[derive(Debug, Clone, Default)]
pub struct ProbeSet {
    probes: Vec<Probe>,
    index: HashMap<String, usize>,
}

impl ProbeSet {
    /// Builds a set from probes, failing on the first duplicate id or invalid probe.
    pub fn new(probes: Vec<Probe>) -> Result<Self, String> {
        let mut index = HashMap::with_capacity(probes.len());
        for (i, p) in probes.iter().enumerate() {
            p.validate().map_err(|e| format!("{}: {e}", p.probe_id))?;
            if index.insert(p.probe_id.clone(), i).is_some() {
                return Err(format!("duplicate probe_id {:?}", p.probe_id));
            }
        }
        Ok(Self { probes, index })
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Probe> {
        self.probes.iter()
    }

    pub fn get(&self, probe_id: &str) -> Option<&Probe> {
        self.index.get(probe_id).map(|&i| &self.probes[i])
    }

    /// Probes of one language, sorted by probe_id.
    pub fn by_language(&self, language: &str) -> Vec<&Probe> {
        let mut out: Vec<&Probe> = self.probes.iter().filter(|p| p.language == language).collect();
        out.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
        out
    }

    pub fn languages(&self) -> Vec<String> {
        let set: std::collections::BTreeSet<&str> =
            self.probes.iter().map(|p| p.language.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

fn read_to_string(path: &Path) -> Result<String, ProbeDataError> {
    fs::read_to_string(path).map_err(|source| ProbeDataError::Io { path: path.to_path_buf(), source })
}

/// Loads a JSON-lines probe file.
pub fn load_probes(path: &Path) -> Result<ProbeSet, ProbeDataError> {
    let text = read_to_string(path)?;
    parse_probes(&text, path)
}

/// Parses probe records; `path` is only used in error messages.
pub fn parse_probes(text: &str, path: &Path) -> Result<ProbeSet, ProbeDataError> {
    let malformed = |line: usize, reason: String| ProbeDataError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut probes = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: ProbeRecord = serde_json::from_str(raw).map_err(|e| malformed(line, e.to_string()))?;
        let category = u8::try_from(rec.category_index)
            .map_err(|_| CategoryError::Unknown(0))
            .and_then(Category::try_from)
            .map_err(|e| match e {
                CategoryError::Excluded(index) => {
                    ProbeDataError::ExcludedCategory { path: path.to_path_buf(), line, index }
                }
                CategoryError::Unknown(_) => ProbeDataError::UnknownCategory {
                    path: path.to_path_buf(),
                    line,
                    index: rec.category_index,
                },
            })?;
        let probe = Probe {
            probe_id: rec.probe_id,
            question_id: rec.question_id,
            language: rec.language,
            category,
            template: rec.template,
            option_a: rec.option_a,
            option_b: rec.option_b,
        };
        probe.validate().map_err(|reason| malformed(line, reason))?;
        if !seen.insert(probe.probe_id.clone()) {
            return Err(ProbeDataError::DuplicateProbeId {
                path: path.to_path_buf(),
                line,
                probe_id: probe.probe_id,
            });
        }
        probes.push(probe);
    }
    if probes.is_empty() {
        log::warn!("probe file {} contains no records", path.display());
    }
    Ok(ProbeSet::new(probes).expect("records validated above"))
}

/// Which end of a Likert scale corresponds to `option_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    LowIsOptionA,
    LowIsOptionB,
}

impl Orientation {
    pub fn flipped(self) -> Orientation {
        match self {
            Orientation::LowIsOptionA => Orientation::LowIsOptionB,
            Orientation::LowIsOptionB => Orientation::LowIsOptionA,
        }
    }
}

/// Aggregated survey shares for one question in one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertDistribution {
    pub question_id: String,
    pub country: String,
    pub scale_size: usize,
    pub shares: Vec<f64>,
    pub orientation: Orientation,
}

impl LikertDistribution {
    pub fn validate(&self) -> Result<(), ProbeDataError> {
        let invalid = |reason: String| ProbeDataError::InvalidDistribution {
            question_id: self.question_id.clone(),
            country: self.country.clone(),
            reason,
        };
        if self.scale_size < 2 {
            return Err(invalid(format!("scale_size {} < 2", self.scale_size)));
        }
        if self.shares.len() != self.scale_size {
            return Err(invalid(format!(
                "{} shares for a {}-point scale",
                self.shares.len(),
                self.scale_size
            )));
        }
        if let Some(bad) = self.shares.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(invalid(format!("share {bad} is not a nonnegative number")));
        }
        let sum: f64 = self.shares.iter().sum();
        if (sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
            return Err(invalid(format!("shares sum to {sum}")));
        }
        Ok(())
    }
}

/// The binary majority answer for a question in one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyMajority {
    pub question_id: String,
    pub country: String,
    pub majority: Answer,
    pub majority_share: f64,
}

/// Collapses a Likert distribution into a vote between the two probe options.
///
/// Even scales split into a low and a high half. On odd scales the midpoint
/// is dropped and the two halves are renormalized.
pub fn aggregate_majority(dist: &LikertDistribution) -> Result<SurveyMajority, ProbeDataError> {
    dist.validate()?;
    let half = dist.scale_size / 2;
    let low: f64 = dist.shares[..half].iter().sum();
    let high: f64 = dist.shares[dist.scale_size - half..].iter().sum();
    let total = low + high;
    if total <= 0.0 || (low - high).abs() <= TIE_TOLERANCE * total.max(1.0) {
        return Err(ProbeDataError::Tie {
            question_id: dist.question_id.clone(),
            country: dist.country.clone(),
        });
    }
    let (low_answer, high_answer) = match dist.orientation {
        Orientation::LowIsOptionA => (Answer::OptionA, Answer::OptionB),
        Orientation::LowIsOptionB => (Answer::OptionB, Answer::OptionA),
    };
    let (majority, winning) = if low > high { (low_answer, low) } else { (high_answer, high) };
    Ok(SurveyMajority {
        question_id: dist.question_id.clone(),
        country: dist.country.clone(),
        majority,
        majority_share: winning / total,
    })
}

/// Survey distributions keyed by (question_id, country).
#[derive(Debug, Clone, Default)]
pub struct SurveyTable {
    entries: BTreeMap<(String, String), LikertDistribution>,
}

impl SurveyTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, question_id: &str, country: &str) -> Option<&LikertDistribution> {
        self.entries.get(&(question_id.to_string(), country.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &LikertDistribution> {
        self.entries.values()
    }

    pub fn countries(&self) -> Vec<String> {
        let set: std::collections::BTreeSet<&str> =
            self.entries.keys().map(|(_, c)| c.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

pub fn load_survey(path: &Path) -> Result<SurveyTable, ProbeDataError> {
    let text = read_to_string(path)?;
    parse_survey(&text, path)
}

pub fn parse_survey(text: &str, path: &Path) -> Result<SurveyTable, ProbeDataError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let dist: LikertDistribution = serde_json::from_str(raw).map_err(|e| ProbeDataError::Malformed {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        let sum: f64 = dist.shares.iter().sum();
        if (sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
            return Err(ProbeDataError::SharesSum {
                path: path.to_path_buf(),
                line,
                question_id: dist.question_id,
                country: dist.country,
                sum,
            });
        }
        dist.validate().map_err(|e| ProbeDataError::Malformed {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        let key = (dist.question_id.clone(), dist.country.clone());
        if entries.contains_key(&key) {
            return Err(ProbeDataError::DuplicateSurveyKey {
                path: path.to_path_buf(),
                line,
                question_id: key.0,
                country: key.1,
            });
        }
        entries.insert(key, dist);
    }
    Ok(SurveyTable { entries })
}

/// Language code to survey country.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageCountryMap {
    entries: BTreeMap<String, String>,
}

const DEFAULT_MAPPING: [(&str, &str); 14] = [
    ("en", "United States"),
    ("ro", "Romania"),
    ("el", "Greece"),
    ("ur", "Pakistan"),
    ("fa", "Iran"),
    ("tl", "Philippines"),
    ("id", "Indonesia"),
    ("de", "Germany"),
    ("ms", "Malaysia"),
    ("bn", "Bangladesh"),
    ("sr", "Serbia"),
    ("tr", "Turkey"),
    ("vi", "Vietnam"),
    ("ko", "South Korea"),
];

impl Default for LanguageCountryMap {
    fn default() -> Self {
        Self {
            entries: DEFAULT_MAPPING
                .iter()
                .map(|(l, c)| (l.to_string(), c.to_string()))
                .collect(),
        }
    }
}

impl LanguageCountryMap {
    pub fn from_pairs<I, L, C>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (L, C)>,
        L: Into<String>,
        C: Into<String>,
    {
        Self { entries: pairs.into_iter().map(|(l, c)| (l.into(), c.into())).collect() }
    }

    /// Loads a `language,country` CSV file.
    pub fn load(path: &Path) -> Result<Self, ProbeDataError> {
        let text = read_to_string(path)?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let malformed = |line: usize, reason: String| ProbeDataError::Malformed {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["language", "country"] {
            return Err(malformed(1, "expected header \"language,country\"".into()));
        }
        let mut entries = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| malformed(line, e.to_string()))?;
            let (Some(lang), Some(country)) = (record.get(0), record.get(1)) else {
                return Err(malformed(line, "expected two columns".into()));
            };
            entries.insert(lang.trim().to_string(), country.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn country_for(&self, language: &str) -> Result<&str, ProbeDataError> {
        self.entries
            .get(language)
            .map(String::as_str)
            .ok_or_else(|| ProbeDataError::UnmappedLanguage(language.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(l, c)| (l.as_str(), c.as_str()))
    }
}

pub fn country_for_language<'a>(
    language: &str,
    map: &'a LanguageCountryMap,
) -> Result<&'a str, ProbeDataError> {
    map.country_for(language)
}

/// Survey majorities resolved for a set of probes and one target country.
///
/// Probes without a survey row and probes whose aggregation ties are listed
/// separately rather than dropped.
#[derive(Debug, Clone, Default)]
pub struct MajorityTable {
    pub country: String,
    by_probe: BTreeMap<String, SurveyMajority>,
    pub missing: Vec<String>,
    pub ties: Vec<String>,
}

impl MajorityTable {
    pub fn resolve<'a, I>(probes: I, survey: &SurveyTable, country: &str) -> Result<Self, ProbeDataError>
    where
        I: IntoIterator<Item = &'a Probe>,
    {
        let mut table = MajorityTable { country: country.to_string(), ..Default::default() };
        for probe in probes {
            match survey.get(&probe.question_id, country) {
                None => table.missing.push(probe.probe_id.clone()),
                Some(dist) => match aggregate_majority(dist) {
                    Ok(m) => {
                        table.by_probe.insert(probe.probe_id.clone(), m);
                    }
                    Err(ProbeDataError::Tie { .. }) => {
                        log::info!(
                            "probe {} excluded: survey shares for {} in {} tie",
                            probe.probe_id,
                            probe.question_id,
                            country
                        );
                        table.ties.push(probe.probe_id.clone());
                    }
                    Err(e) => return Err(e),
                },
            }
        }
        table.missing.sort();
        table.ties.sort();
        Ok(table)
    }

    /// Builds a table directly from probe ids and answers; used by tests and tools.
    pub fn from_answers<I, S>(country: &str, answers: I) -> Self
    where
        I: IntoIterator<Item = (S, Answer)>,
        S: Into<String>,
    {
        let by_probe = answers
            .into_iter()
            .map(|(id, answer)| {
                let id = id.into();
                let m = SurveyMajority {
                    question_id: id.clone(),
                    country: country.to_string(),
                    majority: answer,
                    majority_share: 1.0,
                };
                (id, m)
            })
            .collect();
        MajorityTable { country: country.to_string(), by_probe, ..Default::default() }
    }

    pub fn majority(&self, probe_id: &str) -> Option<Answer> {
        self.by_probe.get(probe_id).map(|m| m.majority)
    }

    pub fn get(&self, probe_id: &str) -> Option<&SurveyMajority> {
        self.by_probe.get(probe_id)
    }

    pub fn len(&self) -> usize {
        self.by_probe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_probe.is_empty()
    }
}
