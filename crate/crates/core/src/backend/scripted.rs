use super::{Backend, BackendError, GenerationRequest};
use crate::probe_data::{MajorityTable, ProbeSet};
use crate::prompt::render_completed;
use crate::seed::{derive_seed, rng_from_seed};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// Filler used by noisy mode; `{}` is replaced by the option text.
pub const NOISE_TEMPLATES: [&str; 6] = [
    "I think the answer is \"{}\".",
    "Answer: {}",
    "{}. That would be my choice here.",
    "Sure! The blank should be filled with '{}'.",
    "My choice: {} (based on the sentence).",
    "Considering everything, I'd pick {} for this sentence.",
];

/// Probability model for one probe.
///
/// The chance of emitting the majority option is `base_prob_majority` plus
/// `cue_gain` for every demonstration line completed with its own survey
/// majority, clamped to `[0, 1]`. A `probe_id` of `"*"` applies to every
/// probe without its own rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub probe_id: String,
    pub base_prob_majority: f64,
    pub cue_gain: f64,
}

impl ScriptedRule {
    pub fn probability(&self, matching_demos: usize) -> f64 {
        (self.base_prob_majority + self.cue_gain * matching_demos as f64).clamp(0.0, 1.0)
    }
}

pub fn parse_rules(text: &str) -> Result<Vec<ScriptedRule>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let rule: ScriptedRule = serde_json::from_str(raw).map_err(|e| format!("line {}: {e}", i + 1))?;
        if !rule.base_prob_majority.is_finite() || !rule.cue_gain.is_finite() {
            return Err(format!("line {}: non-finite probability", i + 1));
        }
        out.push(rule);
    }
    Ok(out)
}

pub fn load_rules(path: &Path) -> Result<Vec<ScriptedRule>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_rules(&text).map_err(|e| format!("{}: {e}", path.display()))
}

struct ProbeAnswers {
    majority: String,
    minority: String,
}

/// Deterministic stand-in for a language model.
///
/// It reads the serialized prompt, identifies the test probe by its masked
/// template line and counts demonstration lines that carry their survey
/// majority. Sample `i` draws from a stream keyed by (run seed, probe, i),
/// so the zero-shot and few-shot passes share random numbers and only the
/// probability differs between them.
pub struct ScriptedBackend {
    rules: HashMap<String, ScriptedRule>,
    default_rule: Option<ScriptedRule>,
    templates: HashMap<String, String>,
    majority_lines: HashMap<String, String>,
    answers: HashMap<String, ProbeAnswers>,
    noisy: bool,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>, probes: &ProbeSet, majorities: &MajorityTable, noisy: bool) -> Self {
        let mut by_id = HashMap::new();
        let mut default_rule = None;
        for rule in rules {
            if rule.probe_id == "*" {
                default_rule = Some(rule);
            } else {
                by_id.insert(rule.probe_id.clone(), rule);
            }
        }
        let mut sorted: Vec<_> = probes.iter().collect();
        sorted.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
        let mut templates = HashMap::new();
        let mut majority_lines = HashMap::new();
        let mut answers = HashMap::new();
        for p in sorted {
            let Some(majority) = majorities.majority(&p.probe_id) else { continue };
            templates.entry(p.template.trim().to_string()).or_insert_with(|| p.probe_id.clone());
            majority_lines
                .entry(render_completed(p, majority).trim().to_string())
                .or_insert_with(|| p.probe_id.clone());
            answers.insert(
                p.probe_id.clone(),
                ProbeAnswers {
                    majority: p.option(majority).to_string(),
                    minority: p.option(majority.other()).to_string(),
                },
            );
        }
        Self { rules: by_id, default_rule, templates, majority_lines, answers, noisy }
    }

    fn rule(&self, probe_id: &str) -> Option<&ScriptedRule> {
        self.rules.get(probe_id).or(self.default_rule.as_ref())
    }
}

impl Backend for ScriptedBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError> {
        req.params.validate()?;
        let protocol = |reason: String| BackendError::Protocol { context: req.context.to_string(), reason };
        let mut test_id = None;
        let mut cues = 0usize;
        for line in req.prompt.lines().map(str::trim) {
            if test_id.is_none() {
                if let Some(id) = self.templates.get(line) {
                    test_id = Some(id);
                    continue;
                }
            }
            if self.majority_lines.contains_key(line) {
                cues += 1;
            }
        }
        let test_id = test_id.ok_or_else(|| protocol("prompt contains no known probe template".into()))?;
        let rule = self.rule(test_id).ok_or_else(|| protocol(format!("no scripted rule for {test_id}")))?;
        let answers = &self.answers[test_id];
        let p = rule.probability(cues);
        let out = (0..req.params.n_samples)
            .map(|i| {
                let mut rng = rng_from_seed(derive_seed(req.run_seed, &["scripted", test_id, &i.to_string()]));
                let draw: f64 = rng.gen();
                let text = if draw < p { &answers.majority } else { &answers.minority };
                if self.noisy {
                    let template = NOISE_TEMPLATES[rng.gen_range(0..NOISE_TEMPLATES.len())];
                    template.replacen("{}", text, 1)
                } else {
                    text.clone()
                }
            })
            .collect();
        Ok(out)
    }
}
