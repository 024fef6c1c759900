//! Prompt construction and answer parsing.
//!
//! Serialized layout (UTF-8, `\n` line endings):
//!
//! ```text
//! <instruction>
//!
//! <demonstration 1>
//! ...
//! <demonstration k>
//!
//! <question with _>
//!
//! Options: <first> / <second>
//! ```
//!
//! The demonstration block and the blank line after it are absent for zero-shot prompts.

use crate::demo::DemoSet;
use crate::probe_data::{Answer, Probe, ProbeSet, BLANK};
use crate::seed::rng_from_seed;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_CATALOG_VERSION: &str = "builtin-en-1";
pub const DEFAULT_INSTRUCTION: &str =
    "Complete the sentence by choosing one of the two options. Answer with the chosen option only.";
pub const DEFAULT_EXPLANATION_REQUEST: &str =
    "After the option, briefly explain why you chose it.";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("no instruction for language {0:?} in catalog")]
    MissingInstruction(String),
    #[error("demonstration probe {0:?} is not in the probe set")]
    UnknownDemoProbe(String),
    #[error("demonstration {demo:?} is in {demo_language:?}, test probe is in {test_language:?}")]
    LanguageMismatch { demo: String, demo_language: String, test_language: String },
    #[error("failed to read instruction catalog {path}: {reason}")]
    Catalog { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    #[default]
    AnswerOnly,
    AnswerWithExplanation,
}

impl PromptMode {
    /// Generation length cap used when the run config does not set one.
    pub fn default_max_new_tokens(self) -> u32 {
        match self {
            PromptMode::AnswerOnly => 16,
            PromptMode::AnswerWithExplanation => 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionEntry {
    pub instruction: String,
    pub explanation_request: String,
}

/// Per-language prompt instructions, versioned so runs can record which wording they used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionCatalog {
    pub version: String,
    pub languages: BTreeMap<String, InstructionEntry>,
}

impl Default for InstructionCatalog {
    fn default() -> Self {
        let mut languages = BTreeMap::new();
        languages.insert(
            "en".to_string(),
            InstructionEntry {
                instruction: DEFAULT_INSTRUCTION.to_string(),
                explanation_request: DEFAULT_EXPLANATION_REQUEST.to_string(),
            },
        );
        Self { version: DEFAULT_CATALOG_VERSION.to_string(), languages }
    }
}

impl InstructionCatalog {
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let err = |reason: String| PromptError::Catalog { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let catalog: InstructionCatalog = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        for (lang, entry) in &catalog.languages {
            if entry.instruction.contains('\n') || entry.explanation_request.contains('\n') {
                return Err(err(format!("entry for {lang:?} contains a line break")));
            }
        }
        Ok(catalog)
    }

    pub fn get(&self, language: &str) -> Result<&InstructionEntry, PromptError> {
        self.languages
            .get(language)
            .ok_or_else(|| PromptError::MissingInstruction(language.to_string()))
    }
}

/// A fully rendered prompt before serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub instruction: String,
    pub demo_lines: Vec<String>,
    pub question_line: String,
    pub options_presented: (String, String),
    /// Which option was presented first.
    pub first: Answer,
    pub mode: PromptMode,
    pub language: String,
}

/// Fills the blank of `probe` with the text of `answer`. No case changes are made.
pub fn render_completed(probe: &Probe, answer: Answer) -> String {
    probe.template.replacen(BLANK, probe.option(answer), 1)
}

/// Builds a prompt for `test` with the given demonstrations (none for zero-shot).
///
/// The option order is a fair coin flip drawn from `option_seed`.
pub fn build_prompt(
    test: &Probe,
    demos: Option<&DemoSet>,
    pool: &ProbeSet,
    mode: PromptMode,
    option_seed: u64,
    catalog: &InstructionCatalog,
) -> Result<PromptSpec, PromptError> {
    let entry = catalog.get(&test.language)?;
    let mut demo_lines = Vec::new();
    for demo in demos.map(|d| d.items.as_slice()).unwrap_or_default() {
        let probe = pool
            .get(&demo.probe_id)
            .ok_or_else(|| PromptError::UnknownDemoProbe(demo.probe_id.clone()))?;
        if probe.language != test.language {
            return Err(PromptError::LanguageMismatch {
                demo: probe.probe_id.clone(),
                demo_language: probe.language.clone(),
                test_language: test.language.clone(),
            });
        }
        demo_lines.push(render_completed(probe, demo.answer));
    }
    let instruction = match mode {
        PromptMode::AnswerOnly => entry.instruction.clone(),
        PromptMode::AnswerWithExplanation => format!("{} {}", entry.instruction, entry.explanation_request),
    };
    let first = if rng_from_seed(option_seed).gen_bool(0.5) { Answer::OptionA } else { Answer::OptionB };
    Ok(PromptSpec {
        instruction,
        demo_lines,
        question_line: test.template.clone(),
        options_presented: (test.option(first).to_string(), test.option(first.other()).to_string()),
        first,
        mode,
        language: test.language.clone(),
    })
}

pub fn serialize_prompt(spec: &PromptSpec) -> String {
    let mut out = String::new();
    out.push_str(&spec.instruction);
    out.push_str("\n\n");
    if !spec.demo_lines.is_empty() {
        for line in &spec.demo_lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str(&spec.question_line);
    out.push_str("\n\nOptions: ");
    out.push_str(&spec.options_presented.0);
    out.push_str(" / ");
    out.push_str(&spec.options_presented.1);
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedValue {
    OptionA,
    OptionB,
    Unparsed,
}

impl From<Answer> for ParsedValue {
    fn from(a: Answer) -> Self {
        match a {
            Answer::OptionA => ParsedValue::OptionA,
            Answer::OptionB => ParsedValue::OptionB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAnswer {
    pub value: ParsedValue,
    /// The matched option text as it appears in the normalized response.
    pub matched_text: Option<String>,
}

fn fold(text: &str) -> String {
    text.nfc().collect::<String>().to_lowercase()
}

fn is_boundary(c: Option<char>) -> bool {
    c.is_none_or(|c| !c.is_alphanumeric())
}

/// Non-overlapping occurrences of `needle` in `hay` that avoid the `masked` ranges.
fn occurrences(hay: &str, needle: &str, masked: &[(usize, usize)], bounded: bool) -> Vec<(usize, usize)> {
    if needle.is_empty() {
        return Vec::new();
    }
    hay.match_indices(needle)
        .map(|(start, m)| (start, start + m.len()))
        .filter(|&(s, e)| masked.iter().all(|&(ms, me)| e <= ms || s >= me))
        .filter(|&(s, e)| {
            !bounded || (is_boundary(hay[..s].chars().next_back()) && is_boundary(hay[e..].chars().next()))
        })
        .collect()
}

/// Maps a raw model response onto one of the probe's options.
///
/// Matching is case-insensitive on NFC text. The longer option is matched
/// first and its occurrences are masked, so "unimportant" is never read as
/// "important". Whole-word occurrences are preferred; bare substrings are
/// only used when neither option occurs as a whole word. When both options
/// occur, the earlier one wins.
pub fn parse_response(raw: &str, probe: &Probe) -> ParsedAnswer {
    let hay = fold(raw);
    let a = fold(probe.option_a.trim());
    let b = fold(probe.option_b.trim());
    let (long, long_ans, short, short_ans) = if a.chars().count() >= b.chars().count() {
        (&a, Answer::OptionA, &b, Answer::OptionB)
    } else {
        (&b, Answer::OptionB, &a, Answer::OptionA)
    };
    for bounded in [true, false] {
        let long_hits = occurrences(&hay, long, &[], bounded);
        let long_masks = occurrences(&hay, long, &[], false);
        let short_hits = occurrences(&hay, short, &long_masks, bounded);
        let pick = match (long_hits.first(), short_hits.first()) {
            (None, None) => continue,
            (Some(l), None) => (long_ans, *l),
            (None, Some(s)) => (short_ans, *s),
            (Some(l), Some(s)) => {
                if s.0 < l.0 {
                    (short_ans, *s)
                } else {
                    (long_ans, *l)
                }
            }
        };
        let (answer, (s, e)) = pick;
        return ParsedAnswer { value: answer.into(), matched_text: Some(hay[s..e].to_string()) };
    }
    ParsedAnswer { value: ParsedValue::Unparsed, matched_text: None }
}
