//! chrF++ similarity between short texts and nearest-probe ranking.
//!
//! The score averages an F-beta value per n-gram order: character orders
//! `1..=max_char_order` and word orders `1..=max_word_order`. Per order,
//! precision and recall come from the clipped multiset intersection. Orders
//! where neither side has any n-gram are left out of the average.

use crate::probe_data::Probe;
use std::collections::HashMap;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChrfError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("invalid chrF configuration: {0}")]
    InvalidConfig(String),
    #[error("pool has {available} candidates, {requested} requested")]
    InsufficientPool { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ChrfConfig {
    pub max_char_order: usize,
    pub max_word_order: usize,
    pub beta: f64,
    pub strip_whitespace_for_char_ngrams: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        Self {
            max_char_order: 6,
            max_word_order: 2,
            beta: 2.0,
            strip_whitespace_for_char_ngrams: true,
        }
    }
}

impl ChrfConfig {
    pub fn validate(&self) -> Result<(), ChrfError> {
        if self.max_char_order < 1 {
            return Err(ChrfError::InvalidConfig("max_char_order must be >= 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ChrfError::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Multiset of n-grams with positive counts.
pub type Multiset<K> = HashMap<K, usize>;

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

fn normalize(text: &str) -> String {
    text.nfc().collect()
}

/// Character n-grams over Unicode scalar values.
pub fn char_ngrams(text: &str, n: usize, strip_whitespace: bool) -> Multiset<String> {
    let chars: Vec<char> = if strip_whitespace {
        text.chars().filter(|c| !c.is_whitespace()).collect()
    } else {
        text.chars().collect()
    };
    let mut out = Multiset::new();
    if n == 0 || chars.len() < n {
        return out;
    }
    for window in chars.windows(n) {
        *out.entry(window.iter().collect::<String>()).or_insert(0) += 1;
    }
    out
}

/// Splits on whitespace; every punctuation character becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

pub fn word_ngrams(text: &str, n: usize) -> Multiset<Vec<String>> {
    let tokens = tokenize(text);
    let mut out = Multiset::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for window in tokens.windows(n) {
        *out.entry(window.to_vec()).or_insert(0) += 1;
    }
    out
}

/// One n-gram order as a key-sorted list of (gram, count).
#[derive(Debug, Clone)]
struct Order<K> {
    grams: Vec<(K, usize)>,
    total: usize,
}

impl<K: Ord> Order<K> {
    fn new(grams: Multiset<K>) -> Self {
        let total = grams.values().sum();
        let mut grams: Vec<(K, usize)> = grams.into_iter().collect();
        grams.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Self { grams, total }
    }

    /// Size of the clipped multiset intersection, by merging the sorted lists.
    fn matches(&self, other: &Self) -> usize {
        let (mut i, mut j, mut m) = (0, 0, 0);
        while i < self.grams.len() && j < other.grams.len() {
            match self.grams[i].0.cmp(&other.grams[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    m += self.grams[i].1.min(other.grams[j].1);
                    i += 1;
                    j += 1;
                }
            }
        }
        m
    }
}

/// Precomputed n-gram multisets for one text.
#[derive(Debug, Clone)]
pub struct NgramProfile {
    chars: Vec<Order<String>>,
    words: Vec<Order<Vec<String>>>,
}

impl NgramProfile {
    pub fn new(text: &str, cfg: &ChrfConfig) -> Result<Self, ChrfError> {
        cfg.validate()?;
        let text = normalize(text);
        if text.chars().all(char::is_whitespace) {
            return Err(ChrfError::EmptyText);
        }
        let chars = (1..=cfg.max_char_order)
            .map(|n| Order::new(char_ngrams(&text, n, cfg.strip_whitespace_for_char_ngrams)))
            .collect();
        let words = (1..=cfg.max_word_order).map(|n| Order::new(word_ngrams(&text, n))).collect();
        Ok(Self { chars, words })
    }

    /// Score of `self` as hypothesis against `reference`. Both profiles must
    /// come from the same configuration.
    pub fn score_against(&self, reference: &NgramProfile, beta: f64) -> f64 {
        let mut sum = 0.0;
        let mut orders = 0usize;
        let mut add = |f: Option<f64>| {
            if let Some(f) = f {
                sum += f;
                orders += 1;
            }
        };
        for (h, r) in self.chars.iter().zip(&reference.chars) {
            add(order_f_score(h, r, beta));
        }
        for (h, r) in self.words.iter().zip(&reference.words) {
            add(order_f_score(h, r, beta));
        }
        if orders == 0 {
            0.0
        } else {
            sum / orders as f64
        }
    }
}

fn order_f_score<K: Ord>(hyp: &Order<K>, reference: &Order<K>, beta: f64) -> Option<f64> {
    if hyp.total == 0 && reference.total == 0 {
        return None;
    }
    let matches = hyp.matches(reference);
    let precision = if hyp.total == 0 { 0.0 } else { matches as f64 / hyp.total as f64 };
    let recall = if reference.total == 0 { 0.0 } else { matches as f64 / reference.total as f64 };
    if precision + recall == 0.0 {
        return Some(0.0);
    }
    let beta2 = beta * beta;
    Some((1.0 + beta2) * precision * recall / (beta2 * precision + recall))
}

/// chrF++ score of `hypothesis` against `reference`, in `[0, 1]`.
pub fn chrf_pp(hypothesis: &str, reference: &str, cfg: &ChrfConfig) -> Result<f64, ChrfError> {
    let h = NgramProfile::new(hypothesis, cfg)?;
    let r = NgramProfile::new(reference, cfg)?;
    Ok(h.score_against(&r, cfg.beta))
}

/// A candidate probe and its similarity to the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub probe_id: String,
    pub score: f64,
}

fn top_k(mut scored: Vec<Ranked>, k: usize) -> Result<Vec<Ranked>, ChrfError> {
    if k > scored.len() {
        return Err(ChrfError::InsufficientPool { requested: k, available: scored.len() });
    }
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.probe_id.cmp(&b.probe_id)));
    scored.truncate(k);
    Ok(scored)
}

/// Ranks `pool` by similarity of its templates to the query template.
///
/// The query itself is never returned. Ties are ordered by ascending probe_id.
pub fn rank_by_chrf<'a, I>(query: &Probe, pool: I, cfg: &ChrfConfig, k: usize) -> Result<Vec<Ranked>, ChrfError>
where
    I: IntoIterator<Item = &'a Probe>,
{
    let q = NgramProfile::new(&query.template, cfg)?;
    let mut scored = Vec::new();
    for candidate in pool {
        if candidate.probe_id == query.probe_id {
            continue;
        }
        let c = NgramProfile::new(&candidate.template, cfg)?;
        scored.push(Ranked { probe_id: candidate.probe_id.clone(), score: q.score_against(&c, cfg.beta) });
    }
    top_k(scored, k)
}

/// Profiles of every probe template in a pool, built once and reused across queries.
#[derive(Debug, Clone)]
pub struct ChrfIndex {
    cfg: ChrfConfig,
    profiles: HashMap<String, NgramProfile>,
}

impl ChrfIndex {
    pub fn build<'a, I>(probes: I, cfg: ChrfConfig) -> Result<Self, ChrfError>
    where
        I: IntoIterator<Item = &'a Probe>,
    {
        let mut profiles = HashMap::new();
        for p in probes {
            profiles.insert(p.probe_id.clone(), NgramProfile::new(&p.template, &cfg)?);
        }
        Ok(Self { cfg, profiles })
    }

    pub fn config(&self) -> &ChrfConfig {
        &self.cfg
    }

    fn profile(&self, probe: &Probe) -> Result<std::borrow::Cow<'_, NgramProfile>, ChrfError> {
        match self.profiles.get(&probe.probe_id) {
            Some(p) => Ok(std::borrow::Cow::Borrowed(p)),
            None => NgramProfile::new(&probe.template, &self.cfg).map(std::borrow::Cow::Owned),
        }
    }

    /// Same contract as [`rank_by_chrf`], using cached profiles where available.
    pub fn rank<'a, I>(&self, query: &Probe, pool: I, k: usize) -> Result<Vec<Ranked>, ChrfError>
    where
        I: IntoIterator<Item = &'a Probe>,
    {
        let q = self.profile(query)?;
        let mut scored = Vec::new();
        for candidate in pool {
            if candidate.probe_id == query.probe_id {
                continue;
            }
            let c = self.profile(candidate)?;
            scored.push(Ranked {
                probe_id: candidate.probe_id.clone(),
                score: q.score_against(&c, self.cfg.beta),
            });
        }
        top_k(scored, k)
    }
}
