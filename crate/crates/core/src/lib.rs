//! Dependency semantic role labeling with syntactic-rule argument pruning.
//!
//! The crate covers the whole pipeline: CoNLL-2009 I/O ([`conll`]), dependency
//! trees and distance tuples ([`deptree`]), rule mining ([`rules`]), candidate
//! pruning ([`prune`]), a small from-scratch numeric kernel ([`neural`]), the
//! BiLSTM + biaffine role labeler ([`model`]) and scoring ([`eval`]).

pub mod conll;
pub mod deptree;
pub mod eval;
pub mod model;
pub mod neural;
pub mod prune;
pub mod rules;
pub mod synth;

pub use conll::{corpus_stats, parse_conll09, write_conll09, CorpusStats, Sentence, Token};
pub use deptree::{DepTree, DistanceTuple, SyntaxSource};
pub use eval::{score, ScoreReport};
pub use model::{Mode, RunConfig, SrlModel};
pub use prune::{prune, prune_korder, prune_stats, PruneMask, PruneReport, Pruning};
pub use rules::{coverage, mine_rules, sweep, ActiveRule, RuleSet};
pub use synth::{synth_corpus, SynthConfig};
