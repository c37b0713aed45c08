//! Candidate argument pruning.
//!
//! Pruning never touches the encoder input; it only decides which encoded
//! tokens are passed on to the role scorer for a given predicate.

use std::collections::BTreeMap;

use crate::conll::Sentence;
use crate::deptree::{DepTree, DistanceTuple, SyntaxSource};
use crate::rules::{build_tree, ActiveRule, RuleError};

/// Tokens (1-based ids, ascending) kept as candidates for one predicate. The
/// predicate itself is always kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PruneMask {
    pub predicate: usize,
    pub retained: Vec<usize>,
}

impl PruneMask {
    pub fn contains(&self, token: usize) -> bool {
        self.retained.binary_search(&token).is_ok()
    }
}

fn filter(tree: &DepTree, predicate: usize, keep: impl Fn(DistanceTuple) -> bool) -> PruneMask {
    let retained = (1..=tree.len())
        .filter(|&a| a == predicate || keep(tree.distance_tuple(predicate, a)))
        .collect();
    PruneMask {
        predicate,
        retained,
    }
}

/// Keeps the candidates whose distance tuple is in the rule.
pub fn prune(tree: &DepTree, predicate: usize, rule: &ActiveRule) -> PruneMask {
    filter(tree, predicate, |t| rule.admits(t))
}

/// Order-based baseline: keeps candidates at most `k` hops below the nearest
/// common ancestor they share with the predicate.
pub fn prune_korder(tree: &DepTree, predicate: usize, k: usize) -> PruneMask {
    filter(tree, predicate, |t| t.arg <= k)
}

/// The strategy applied in front of the role scorer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pruning {
    Rule(ActiveRule),
    KOrder(usize),
    Off,
}

impl Pruning {
    pub fn apply(&self, tree: &DepTree, predicate: usize) -> PruneMask {
        match self {
            Pruning::Rule(rule) => prune(tree, predicate, rule),
            Pruning::KOrder(k) => prune_korder(tree, predicate, *k),
            Pruning::Off => PruneMask {
                predicate,
                retained: (1..=tree.len()).collect(),
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pruning::Rule(_) => "rule",
            Pruning::KOrder(_) => "korder",
            Pruning::Off => "none",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub candidate_pairs: u64,
    pub retained_pairs: u64,
    pub gold_arguments: u64,
    pub gold_retained: u64,
    /// Gold arguments lost to pruning, by their distance tuple.
    pub lost_by_tuple: BTreeMap<DistanceTuple, u64>,
}

impl PruneReport {
    pub fn recall(&self) -> f64 {
        ratio(self.gold_retained, self.gold_arguments, 1.0)
    }

    pub fn reduction(&self) -> f64 {
        1.0 - ratio(self.retained_pairs, self.candidate_pairs, 1.0)
    }

    /// Share of candidate pairs that are gold arguments, before pruning.
    pub fn positive_rate(&self) -> f64 {
        ratio(self.gold_arguments, self.candidate_pairs, 0.0)
    }

    /// Share of retained pairs that are gold arguments.
    pub fn retained_positive_rate(&self) -> f64 {
        ratio(self.gold_retained, self.retained_pairs, 0.0)
    }
}

fn ratio(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

pub fn prune_stats(
    corpus: &[Sentence],
    pruning: &Pruning,
    syntax: SyntaxSource,
) -> Result<PruneReport, RuleError> {
    let mut report = PruneReport::default();
    for (i, sentence) in corpus.iter().enumerate() {
        if sentence.predicates().is_empty() {
            continue;
        }
        let tree = build_tree(i, sentence, syntax)?;
        for (slot, &pred) in sentence.predicates().iter().enumerate() {
            let mask = pruning.apply(&tree, pred);
            report.candidate_pairs += tree.len() as u64;
            report.retained_pairs += mask.retained.len() as u64;
            for (arg, _) in sentence.arguments(slot) {
                report.gold_arguments += 1;
                if mask.contains(arg) {
                    report.gold_retained += 1;
                } else {
                    *report
                        .lost_by_tuple
                        .entry(tree.distance_tuple(pred, arg))
                        .or_insert(0) += 1;
                }
            }
        }
    }
    Ok(report)
}
