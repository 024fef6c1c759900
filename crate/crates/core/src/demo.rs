//! Demonstration selection and ordering.

use crate::chrf::{ChrfError, ChrfIndex};
use crate::probe_data::{Answer, MajorityTable, Probe, ProbeSet};
use crate::seed::rng_from_seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Number of demonstrations prepended by default.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error("insufficient pool for {strategy}: {available} candidates, {requested} requested")]
    InsufficientPool { strategy: SelectionStrategy, requested: usize, available: usize },
    #[error(transparent)]
    Chrf(#[from] ChrfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    FullyRandom,
    RandomWithinCategory,
    ChrfWithinCategory,
    ChrfAcrossCategories,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 4] = [
        SelectionStrategy::FullyRandom,
        SelectionStrategy::RandomWithinCategory,
        SelectionStrategy::ChrfWithinCategory,
        SelectionStrategy::ChrfAcrossCategories,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionStrategy::FullyRandom => "fully-random",
            SelectionStrategy::RandomWithinCategory => "random-within-category",
            SelectionStrategy::ChrfWithinCategory => "chrf-within-category",
            SelectionStrategy::ChrfAcrossCategories => "chrf-across-categories",
        }
    }

    pub fn within_category(self) -> bool {
        matches!(self, SelectionStrategy::RandomWithinCategory | SelectionStrategy::ChrfWithinCategory)
    }

    pub fn uses_chrf(self) -> bool {
        matches!(self, SelectionStrategy::ChrfWithinCategory | SelectionStrategy::ChrfAcrossCategories)
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown strategy {given:?}; valid strategies: fully-random, random-within-category, chrf-within-category, chrf-across-categories")]
pub struct UnknownStrategy {
    pub given: String,
}

impl FromStr for SelectionStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SelectionStrategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| UnknownStrategy { given: s.to_string() })
    }
}

/// A demonstration: a probe id and the answer it is completed with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demo {
    pub probe_id: String,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoSet {
    pub items: Vec<Demo>,
    pub strategy: SelectionStrategy,
    pub seed: u64,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, probe_id: &str) -> bool {
        self.items.iter().any(|d| d.probe_id == probe_id)
    }
}

/// Candidates for `test`: same language, not the test probe, with a survey
/// majority, and the same category for within-category strategies. Sorted by
/// probe_id so random draws do not depend on file order.
pub fn candidate_pool<'a>(
    test: &Probe,
    pool: &'a ProbeSet,
    majorities: &MajorityTable,
    strategy: SelectionStrategy,
) -> Vec<&'a Probe> {
    pool.by_language(&test.language)
        .into_iter()
        .filter(|p| p.probe_id != test.probe_id)
        .filter(|p| majorities.majority(&p.probe_id).is_some())
        .filter(|p| !strategy.within_category() || p.category == test.category)
        .collect()
}

/// Selects `k` demonstrations for `test` and completes each with its survey majority.
///
/// `chrf` must be built with the templates of `pool` (or a superset); it is
/// only consulted by the chrF strategies, which ignore `seed`.
pub fn select(
    test: &Probe,
    pool: &ProbeSet,
    majorities: &MajorityTable,
    strategy: SelectionStrategy,
    k: usize,
    seed: u64,
    chrf: &ChrfIndex,
) -> Result<DemoSet, SelectError> {
    let candidates = candidate_pool(test, pool, majorities, strategy);
    if candidates.len() < k {
        return Err(SelectError::InsufficientPool { strategy, requested: k, available: candidates.len() });
    }
    let chosen: Vec<&Probe> = if strategy.uses_chrf() {
        let ranked = chrf.rank(test, candidates.iter().copied(), k)?;
        ranked
            .iter()
            .map(|r| pool.get(&r.probe_id).expect("ranked ids come from the pool"))
            .collect()
    } else {
        let mut rng = rng_from_seed(seed);
        candidates.choose_multiple(&mut rng, k).copied().collect()
    };
    let items = chosen
        .into_iter()
        .map(|p| Demo {
            probe_id: p.probe_id.clone(),
            answer: majorities.majority(&p.probe_id).expect("pool filtered on majorities"),
        })
        .collect();
    Ok(DemoSet { items, strategy, seed })
}

/// Returns the same demonstrations in a seeded random order.
pub fn shuffle_demos(demos: &DemoSet, seed: u64) -> DemoSet {
    let mut out = demos.clone();
    let mut rng = rng_from_seed(seed);
    out.items.shuffle(&mut rng);
    out
}
