//! Dependency trees and predicate–argument distance tuples.
//!
//! Node `0` is the artificial root. Sentences with several tokens attached to
//! `0` are handled by treating that node as a shared super-root, so every pair
//! of tokens has a common ancestor and [`DepTree::distance_tuple`] is total.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::conll::Sentence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("token {node} lies on a head cycle")]
    Cycle { node: usize },
    #[error("token {node} has head {head}, outside 0..={len}")]
    HeadOutOfRange {
        node: usize,
        head: usize,
        len: usize,
    },
}

/// Which syntax columns a tree is built from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyntaxSource {
    /// `HEAD`/`DEPREL`.
    Gold,
    /// `PHEAD`/`PDEPREL`.
    #[default]
    Predicted,
}

impl SyntaxSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntaxSource::Gold => "gold",
            SyntaxSource::Predicted => "pred",
        }
    }
}

impl fmt::Display for SyntaxSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyntaxSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gold" => Ok(SyntaxSource::Gold),
            "pred" | "predicted" => Ok(SyntaxSource::Predicted),
            other => Err(format!(
                "unknown syntax source {other:?} (expected gold|pred)"
            )),
        }
    }
}

/// Relative position of a candidate argument with respect to a predicate:
/// hops from each of them up to their nearest common ancestor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DistanceTuple {
    /// Hops from the predicate to the common ancestor.
    pub pred: usize,
    /// Hops from the argument to the common ancestor.
    pub arg: usize,
}

impl DistanceTuple {
    pub const fn new(pred: usize, arg: usize) -> DistanceTuple {
        DistanceTuple { pred, arg }
    }

    pub fn swapped(self) -> DistanceTuple {
        DistanceTuple::new(self.arg, self.pred)
    }
}

impl fmt::Display for DistanceTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.pred, self.arg)
    }
}

/// An immutable rooted tree over token ids `1..=len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepTree {
    // Indexed by node id; entry 0 is the artificial root.
    parent: Vec<usize>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl DepTree {
    /// Builds a tree from `heads[i]`, the head of token `i + 1`.
    pub fn from_heads(heads: &[usize]) -> Result<DepTree, TreeError> {
        let len = heads.len();
        let mut parent = Vec::with_capacity(len + 1);
        parent.push(0);
        for (i, &h) in heads.iter().enumerate() {
            if h > len {
                return Err(TreeError::HeadOutOfRange {
                    node: i + 1,
                    head: h,
                    len,
                });
            }
            parent.push(h);
        }

        const UNSEEN: usize = usize::MAX;
        let mut depth = vec![UNSEEN; len + 1];
        depth[0] = 0;
        let mut walk = Vec::new();
        // Stamp of the walk that last visited a node; detects revisits within
        // one upward walk.
        let mut stamp = vec![0usize; len + 1];
        for start in 1..=len {
            if depth[start] != UNSEEN {
                continue;
            }
            walk.clear();
            let mut node = start;
            while depth[node] == UNSEEN {
                if stamp[node] == start {
                    return Err(TreeError::Cycle { node });
                }
                stamp[node] = start;
                walk.push(node);
                node = parent[node];
            }
            let mut d = depth[node];
            for &n in walk.iter().rev() {
                d += 1;
                depth[n] = d;
            }
        }

        let mut children = vec![Vec::new(); len + 1];
        for node in 1..=len {
            children[parent[node]].push(node);
        }
        Ok(DepTree {
            parent,
            depth,
            children,
        })
    }

    pub fn from_sentence(sentence: &Sentence, source: SyntaxSource) -> Result<DepTree, TreeError> {
        let heads: Vec<usize> = sentence
            .tokens()
            .iter()
            .map(|t| match source {
                SyntaxSource::Gold => t.head,
                SyntaxSource::Predicted => t.phead,
            })
            .collect();
        DepTree::from_heads(&heads)
    }

    /// Number of real tokens.
    pub fn len(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn parent(&self, node: usize) -> usize {
        self.parent[node]
    }

    /// Hops from the artificial root; real tokens have depth >= 1.
    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Tokens attached directly to the artificial root.
    pub fn roots(&self) -> &[usize] {
        &self.children[0]
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Nearest common ancestor by walking the deeper node up until both
    /// depths agree, then stepping both in lockstep.
    pub fn nca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        a
    }

    pub fn distance_tuple(&self, pred: usize, arg: usize) -> DistanceTuple {
        let anc = self.nca(pred, arg);
        DistanceTuple::new(
            self.depth[pred] - self.depth[anc],
            self.depth[arg] - self.depth[anc],
        )
    }

    /// Distance tuples from `pred` to every token, indexed by token id - 1.
    pub fn tuples_from(&self, pred: usize) -> Vec<DistanceTuple> {
        (1..=self.len())
            .map(|a| self.distance_tuple(pred, a))
            .collect()
    }
}
