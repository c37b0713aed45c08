//! Mining and selecting syntactic pruning rules.
//!
//! A rule set is the list of distance tuples observed between predicates and
//! their gold arguments, ordered by frequency. Selecting a prefix of length `k`
//! turns it into the active pruning rule.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::conll::Sentence;
use crate::deptree::{DepTree, DistanceTuple, SyntaxSource, TreeError};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("corpus has no arguments to mine")]
    NoArguments,
    #[error("k = {k} out of range 0..={len}")]
    KOutOfRange { k: usize, len: usize },
    #[error("rule set has no selected k")]
    NoSelection,
    #[error("coverage target {0} not in (0, 1]")]
    BadTarget(f64),
    #[error("sentence {sentence}: {source}")]
    Tree {
        sentence: usize,
        #[source]
        source: TreeError,
    },
    #[error("rule file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RuleEntry {
    pub tuple: DistanceTuple,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    entries: Vec<RuleEntry>,
    pub language: String,
    pub syntax: SyntaxSource,
    k: Option<usize>,
    /// Extra `#key=value` header lines, written back verbatim.
    pub meta: BTreeMap<String, String>,
}

/// The selected prefix of a rule set, ready for membership tests.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActiveRule {
    tuples: BTreeSet<DistanceTuple>,
}

impl ActiveRule {
    pub fn new(tuples: impl IntoIterator<Item = DistanceTuple>) -> ActiveRule {
        ActiveRule {
            tuples: tuples.into_iter().collect(),
        }
    }

    pub fn admits(&self, tuple: DistanceTuple) -> bool {
        self.tuples.contains(&tuple)
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = DistanceTuple> + '_ {
        self.tuples.iter().copied()
    }
}

pub(crate) fn build_tree(
    index: usize,
    sentence: &Sentence,
    syntax: SyntaxSource,
) -> Result<DepTree, RuleError> {
    DepTree::from_sentence(sentence, syntax).map_err(|source| RuleError::Tree {
        sentence: index,
        source,
    })
}

/// Tallies the distance tuple of every (predicate, gold argument) pair.
pub fn tally_tuples(
    corpus: &[Sentence],
    syntax: SyntaxSource,
) -> Result<HashMap<DistanceTuple, u64>, RuleError> {
    let mut counts = HashMap::new();
    for (i, sentence) in corpus.iter().enumerate() {
        if sentence.predicates().is_empty() {
            continue;
        }
        let tree = build_tree(i, sentence, syntax)?;
        for (slot, &pred) in sentence.predicates().iter().enumerate() {
            for (arg, _) in sentence.arguments(slot) {
                *counts.entry(tree.distance_tuple(pred, arg)).or_insert(0) += 1;
            }
        }
    }
    Ok(counts)
}

pub fn mine_rules(
    corpus: &[Sentence],
    syntax: SyntaxSource,
    language: &str,
) -> Result<RuleSet, RuleError> {
    let counts = tally_tuples(corpus, syntax)?;
    if counts.is_empty() {
        return Err(RuleError::NoArguments);
    }
    let mut entries: Vec<RuleEntry> = counts
        .into_iter()
        .map(|(tuple, count)| RuleEntry { tuple, count })
        .collect();
    // Descending count, ties broken by ascending tuple.
    entries.sort_by(|a, b| b.count.cmp(&a.count).then(a.tuple.cmp(&b.tuple)));
    Ok(RuleSet {
        entries,
        language: language.to_owned(),
        syntax,
        k: None,
        meta: BTreeMap::new(),
    })
}

impl RuleSet {
    pub fn entries(&self) -> &[RuleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn select_top_k(mut self, k: usize) -> Result<RuleSet, RuleError> {
        if k > self.entries.len() {
            return Err(RuleError::KOutOfRange {
                k,
                len: self.entries.len(),
            });
        }
        self.k = Some(k);
        Ok(self)
    }

    /// Smallest `k` whose prefix holds at least `target` of all counted
    /// arguments.
    pub fn select_by_coverage(mut self, target: f64) -> Result<RuleSet, RuleError> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(RuleError::BadTarget(target));
        }
        let total = self.total();
        let mut running = 0u64;
        let mut k = self.entries.len();
        for (i, e) in self.entries.iter().enumerate() {
            running += e.count;
            if running as f64 >= target * total as f64 || running == total {
                k = i + 1;
                break;
            }
        }
        self.k = Some(k);
        Ok(self)
    }

    /// The prefix selected by `k`.
    pub fn active(&self) -> Result<ActiveRule, RuleError> {
        let k = self.k.ok_or(RuleError::NoSelection)?;
        Ok(ActiveRule::new(self.entries[..k].iter().map(|e| e.tuple)))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "#language={}", self.language).unwrap();
        writeln!(out, "#syntax={}", self.syntax).unwrap();
        match self.k {
            Some(k) => writeln!(out, "#k={k}").unwrap(),
            None => writeln!(out, "#k=").unwrap(),
        }
        for (key, value) in &self.meta {
            writeln!(out, "#{key}={value}").unwrap();
        }
        for e in &self.entries {
            writeln!(out, "{}\t{}\t{}", e.tuple.pred, e.tuple.arg, e.count).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<RuleSet, RuleError> {
        let err = |line: usize, message: String| RuleError::Format { line, message };
        let mut language = None;
        let mut syntax = None;
        let mut k = None;
        let mut k_seen = false;
        let mut meta = BTreeMap::new();
        let mut entries: Vec<RuleEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            if let Some(header) = raw.strip_prefix('#') {
                let (key, value) = header
                    .split_once('=')
                    .ok_or_else(|| err(line, format!("header without `=`: {raw:?}")))?;
                match key {
                    "language" => language = Some(value.to_owned()),
                    "syntax" => syntax = Some(value.parse().map_err(|e| err(line, e))?),
                    "k" => {
                        k_seen = true;
                        if !value.is_empty() {
                            k = Some(
                                value
                                    .parse()
                                    .map_err(|_| err(line, format!("bad k {value:?}")))?,
                            );
                        }
                    }
                    _ => {
                        meta.insert(key.to_owned(), value.to_owned());
                    }
                }
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(
                    line,
                    format!("expected 3 fields, found {}", fields.len()),
                ));
            }
            let num = |s: &str| -> Result<u64, RuleError> {
                s.parse()
                    .map_err(|_| err(line, format!("not a number: {s:?}")))
            };
            let entry = RuleEntry {
                tuple: DistanceTuple::new(num(fields[0])? as usize, num(fields[1])? as usize),
                count: num(fields[2])?,
            };
            if let Some(prev) = entries.last() {
                if prev.count < entry.count
                    || (prev.count == entry.count && prev.tuple >= entry.tuple)
                {
                    return Err(err(line, "entries out of rank order".to_owned()));
                }
            }
            entries.push(entry);
        }
        let language = language.ok_or_else(|| err(0, "missing #language".to_owned()))?;
        let syntax = syntax.ok_or_else(|| err(0, "missing #syntax".to_owned()))?;
        if !k_seen {
            return Err(err(0, "missing #k".to_owned()));
        }
        let rules = RuleSet {
            entries,
            language,
            syntax,
            k: None,
            meta,
        };
        match k {
            Some(k) => rules.select_top_k(k),
            None => Ok(rules),
        }
    }
}

/// How well an active rule fits a corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Coverage {
    /// Gold arguments whose tuple is admitted, plus self-arguments, which the
    /// pruner always keeps.
    pub covered: u64,
    pub arguments: u64,
    /// (predicate, token) pairs kept by the rule.
    pub retained_pairs: u64,
    /// All (predicate, token) pairs.
    pub candidate_pairs: u64,
}

impl Coverage {
    pub fn coverage(&self) -> f64 {
        if self.arguments == 0 {
            1.0
        } else {
            self.covered as f64 / self.arguments as f64
        }
    }

    /// `1 - retained / all` over candidate pairs.
    pub fn reduction(&self) -> f64 {
        if self.candidate_pairs == 0 {
            0.0
        } else {
            1.0 - self.retained_pairs as f64 / self.candidate_pairs as f64
        }
    }
}

pub fn coverage(
    rule: &ActiveRule,
    corpus: &[Sentence],
    syntax: SyntaxSource,
) -> Result<Coverage, RuleError> {
    let mut cov = Coverage::default();
    for (i, sentence) in corpus.iter().enumerate() {
        if sentence.predicates().is_empty() {
            continue;
        }
        let tree = build_tree(i, sentence, syntax)?;
        for (slot, &pred) in sentence.predicates().iter().enumerate() {
            let tuples = tree.tuples_from(pred);
            cov.candidate_pairs += tuples.len() as u64;
            cov.retained_pairs += tuples
                .iter()
                .enumerate()
                .filter(|&(a, &t)| a + 1 == pred || rule.admits(t))
                .count() as u64;
            for (arg, _) in sentence.arguments(slot) {
                cov.arguments += 1;
                if arg == pred || rule.admits(tuples[arg - 1]) {
                    cov.covered += 1;
                }
            }
        }
    }
    Ok(cov)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub coverage: f64,
    pub reduction: f64,
}

/// Coverage and reduction for each requested prefix length.
pub fn sweep(
    rules: &RuleSet,
    corpus: &[Sentence],
    syntax: SyntaxSource,
    ks: &[usize],
) -> Result<Vec<SweepRow>, RuleError> {
    ks.iter()
        .map(|&k| {
            let rule = rules.clone().select_top_k(k)?.active()?;
            let c = coverage(&rule, corpus, syntax)?;
            Ok(SweepRow {
                k,
                coverage: c.coverage(),
                reduction: c.reduction(),
            })
        })
        .collect()
}
