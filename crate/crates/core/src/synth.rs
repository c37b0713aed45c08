//! Seeded synthetic CoNLL-2009 corpora with known argument statistics.
//!
//! Each sentence first draws its predicates and, per predicate, the distance
//! tuples of its arguments. Random trees are then sampled until one admits a
//! predicate position where every drawn tuple can be realised by a distinct
//! token. Because the tuples are drawn before the tree, the empirical tuple
//! distribution of the corpus follows the requested one.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conll::{corpus_stats, CorpusStats, Sentence, Token};
use crate::deptree::{DepTree, DistanceTuple};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("sentence {sentence}: no tree realised tuples {tuples:?} after {retries} attempts")]
    Unsatisfiable {
        sentence: usize,
        tuples: Vec<DistanceTuple>,
        retries: usize,
    },
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub roles: Vec<String>,
    /// Relative weights; they need not sum to one.
    pub tuples: Vec<(DistanceTuple, f64)>,
    pub max_predicates: usize,
    pub max_arguments: usize,
    /// Sense suffixes; a predicate's sense is a function of its lemma.
    pub senses: Vec<String>,
    pub vocab_size: usize,
    pub n_pos: usize,
    /// Fraction of predicted heads rewired to a random non-descendant.
    pub pred_noise: f64,
    pub max_retries: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_sentences: 100,
            min_len: 2,
            max_len: 12,
            roles: ["A0", "A1", "A2", "AM-TMP"].map(String::from).to_vec(),
            tuples: vec![
                (DistanceTuple::new(0, 1), 0.7),
                (DistanceTuple::new(1, 1), 0.15),
                (DistanceTuple::new(1, 2), 0.1),
                (DistanceTuple::new(0, 2), 0.05),
            ],
            max_predicates: 2,
            max_arguments: 3,
            senses: ["01", "02", "03"].map(String::from).to_vec(),
            vocab_size: 200,
            n_pos: 12,
            pred_noise: 0.0,
            max_retries: 1000,
        }
    }
}

/// Counters recorded while generating, independent of any later parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub stats: CorpusStats,
    /// Tuple of every placed argument under the gold syntax.
    pub tuple_counts: BTreeMap<DistanceTuple, u64>,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub corpus: Vec<Sentence>,
    pub truth: GroundTruth,
}

const DEPRELS: [&str; 5] = ["SBJ", "OBJ", "NMOD", "ADV", "COORD"];

/// Parses `"0,1:0.5;1,2:0.3"` into tuple weights.
pub fn parse_tuple_weights(text: &str) -> Result<Vec<(DistanceTuple, f64)>, SynthError> {
    let bad = || SynthError::Config(format!("bad tuple distribution {text:?}"));
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (tuple, weight) = item.split_once(':').ok_or_else(bad)?;
            let (p, a) = tuple.split_once(',').ok_or_else(bad)?;
            Ok((
                DistanceTuple::new(
                    p.trim().parse().map_err(|_| bad())?,
                    a.trim().parse().map_err(|_| bad())?,
                ),
                weight.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

pub fn synth_corpus(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let weights = WeightedIndex::new(config.tuples.iter().map(|(_, w)| *w))
        .map_err(|e| SynthError::Config(format!("tuple weights: {e}")))?;
    let mut truth = GroundTruth::default();
    let mut corpus = Vec::with_capacity(config.n_sentences);

    for index in 0..config.n_sentences {
        let n_pred = rng.gen_range(1..=config.max_predicates);
        let frames: Vec<Vec<usize>> = (0..n_pred)
            .map(|_| {
                let n_args = rng.gen_range(1..=config.max_arguments);
                draw_frame(config, &weights, &mut rng, n_args)
            })
            .collect();
        let sentence = place(config, &mut rng, index, &frames, &mut truth)?;
        corpus.push(sentence);
    }
    truth.stats = CorpusStats {
        n_sentences: corpus.len(),
        ..truth.stats
    };
    debug_assert_eq!(truth.stats, corpus_stats(&corpus));
    Ok(SynthCorpus { corpus, truth })
}

fn validate(c: &SynthConfig) -> Result<(), SynthError> {
    let fail = |m: &str| Err(SynthError::Config(m.to_owned()));
    if c.max_len < 2 || c.min_len < 2 || c.min_len > c.max_len {
        return fail("need 2 <= min_len <= max_len");
    }
    if c.roles.is_empty() || c.tuples.is_empty() || c.senses.is_empty() {
        return fail("roles, tuples and senses must be nonempty");
    }
    if c.max_predicates == 0 || c.max_arguments == 0 {
        return fail("max_predicates and max_arguments must be positive");
    }
    if c.vocab_size < 2 || c.n_pos == 0 {
        return fail("vocab_size >= 2 and n_pos >= 1 required");
    }
    if !(0.0..=1.0).contains(&c.pred_noise) {
        return fail("pred_noise must be in [0, 1]");
    }
    if c.roles
        .iter()
        .chain(&c.senses)
        .any(|s| s.is_empty() || s == "_" || s.contains(char::is_whitespace))
    {
        return fail("labels must be nonempty, without whitespace, and not `_`");
    }
    Ok(())
}

/// Draws `n` tuple indices for one predicate. A tuple with `d_a = 0` names a
/// unique ancestor of the predicate, so it is redrawn if already present.
fn draw_frame(
    config: &SynthConfig,
    weights: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Vec<usize> {
    let mut frame: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        let pick = (0..100).map(|_| weights.sample(rng)).find(|&i| {
            config.tuples[i].0.arg != 0 || !frame.contains(&i)
        });
        match pick {
            Some(i) => frame.push(i),
            None => break,
        }
    }
    frame
}

/// Random recursive tree: a random permutation, each node attached to a
/// uniformly chosen earlier node; the first node is the single root.
fn random_heads(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for i in 1..n {
        heads[order[i] - 1] = order[rng.gen_range(0..i)];
    }
    heads
}

fn place(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    index: usize,
    frames: &[Vec<usize>],
    truth: &mut GroundTruth,
) -> Result<Sentence, SynthError> {
    let needed = frames
        .len()
        .max(frames.iter().map(Vec::len).max().unwrap_or(0));
    let min_len = config.min_len.max(needed.min(config.max_len));

    for _ in 0..config.max_retries {
        let n = rng.gen_range(min_len..=config.max_len);
        let heads = random_heads(rng, n);
        let tree = DepTree::from_heads(&heads).expect("generated heads form a tree");

        let mut chosen: Vec<Placement> = Vec::with_capacity(frames.len());
        let mut ok = true;
        for frame in frames {
            let mut options: Vec<usize> = (1..=n)
                .filter(|p| !chosen.iter().any(|c| c.predicate == *p))
                .collect();
            options.shuffle(rng);
            let placed = options.into_iter().find_map(|p| {
                try_place_arguments(config, rng, &tree, p, frame).map(|arguments| Placement {
                    predicate: p,
                    tuples: frame.clone(),
                    arguments,
                })
            });
            match placed {
                Some(x) => chosen.push(x),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        chosen.sort_by_key(|c| c.predicate);
        return Ok(realise(config, rng, &heads, &tree, &chosen, truth));
    }
    Err(SynthError::Unsatisfiable {
        sentence: index,
        tuples: frames
            .iter()
            .flatten()
            .map(|&i| config.tuples[i].0)
            .collect(),
        retries: config.max_retries,
    })
}

struct Placement {
    predicate: usize,
    /// Indices into the configured tuple list, parallel to `arguments`.
    tuples: Vec<usize>,
    arguments: Vec<usize>,
}

/// Picks distinct argument tokens realising each tuple of `frame` relative to
/// predicate `p`, or `None` if some tuple has too few realisations.
fn try_place_arguments(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    tree: &DepTree,
    p: usize,
    frame: &[usize],
) -> Option<Vec<usize>> {
    let tuples = tree.tuples_from(p);
    let mut used: Vec<usize> = Vec::with_capacity(frame.len());
    for &ti in frame {
        let want = config.tuples[ti].0;
        let options: Vec<usize> = (1..=tree.len())
            .filter(|&a| tuples[a - 1] == want && !used.contains(&a))
            .collect();
        used.push(*options.choose(rng)?);
    }
    Some(used)
}

fn realise(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    heads: &[usize],
    tree: &DepTree,
    chosen: &[Placement],
    truth: &mut GroundTruth,
) -> Sentence {
    let n = heads.len();
    let n_pred = chosen.len();
    let mut tokens: Vec<Token> = (1..=n)
        .map(|id| {
            let word = rng.gen_range(0..config.vocab_size);
            let pos = word % config.n_pos;
            let head = heads[id - 1];
            let deprel = if head == 0 {
                "ROOT"
            } else {
                DEPRELS[rng.gen_range(0..DEPRELS.len())]
            };
            let mut t = Token::new(
                id,
                &format!("w{word}"),
                &format!("l{}", word / 2),
                &format!("P{pos}"),
                head,
                deprel,
            );
            t.apreds = vec![None; n_pred];
            t
        })
        .collect();

    for (slot, placement) in chosen.iter().enumerate() {
        let pred = placement.predicate;
        let t = &mut tokens[pred - 1];
        t.fillpred = true;
        let lemma_id: usize = t.lemma[1..].parse().expect("synthetic lemma");
        t.pred_sense = Some(format!(
            "{}.{}",
            t.lemma,
            config.senses[lemma_id % config.senses.len()]
        ));
        for (&ti, &arg) in placement.tuples.iter().zip(&placement.arguments) {
            let pos_id: usize = tokens[arg - 1].ppos[1..].parse().expect("synthetic tag");
            // Role depends on the tuple rank and the argument's tag, so it is
            // recoverable from the input.
            let role = &config.roles[(ti + pos_id) % config.roles.len()];
            tokens[arg - 1].apreds[slot] = Some(role.clone());
            *truth
                .tuple_counts
                .entry(tree.distance_tuple(pred, arg))
                .or_insert(0) += 1;
            truth.stats.n_arguments += 1;
        }
    }
    truth.stats.n_tokens += n;
    truth.stats.n_predicates += n_pred;

    if config.pred_noise > 0.0 {
        let mut pheads = heads.to_vec();
        for id in 1..=n {
            if rng.gen_bool(config.pred_noise) {
                let options = non_descendants(&pheads, id);
                pheads[id - 1] = *options.choose(rng).expect("root is never a descendant");
            }
        }
        for (t, &h) in tokens.iter_mut().zip(&pheads) {
            t.phead = h;
            if h == 0 {
                t.pdeprel = "ROOT".to_owned();
            } else if t.pdeprel == "ROOT" {
                t.pdeprel = "DEP".to_owned();
            }
        }
    }
    Sentence::new(tokens)
}

/// Candidate new heads for `id` keeping the structure a tree (root included,
/// the node itself and its subtree excluded).
fn non_descendants(heads: &[usize], id: usize) -> Vec<usize> {
    let n = heads.len();
    let is_below = |mut x: usize| {
        while x != 0 {
            if x == id {
                return true;
            }
            x = heads[x - 1];
        }
        false
    };
    std::iter::once(0)
        .chain((1..=n).filter(|&x| !is_below(x)))
        .collect()
}
