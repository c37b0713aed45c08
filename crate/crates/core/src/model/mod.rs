//! BiLSTM + biaffine role labeler with a pruning mask between encoder and
//! scorer, and an optional virtual-root mode for joint sense prediction.

pub mod config;
pub mod embed;
mod net;
pub mod train;
pub mod vocab;
pub mod vr;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::conll::Sentence;
use crate::deptree::DepTree;
use crate::neural::{grad_check, Checkpoint, CheckpointError, GradCheckReport, Grads, NumericError, ParamStore};
use crate::prune::Pruning;
use crate::rules::{RuleError, RuleSet};

pub use config::{ConfigError, Mode, PruneMode, RunConfig};
pub use embed::{ContextualEmbeddings, EmbeddingError, PretrainedVectors};
pub use net::argmax_in;
pub use train::{train, EpochReport, TrainEvent, TrainOutcome, Trainer};
pub use vocab::{LabelVocab, Vocab, NONE_LABEL};
pub use vr::{from_virtual_root, to_virtual_root, VirtualRooted};

use net::{Dims, Net, Prepared, PreparedFrame};
use vocab::{UNK, VR};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("data: {0}")]
    Data(String),
    #[error("mode: {0}")]
    Mode(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("numeric: {0}")]
    Numeric(#[from] NumericError),
    #[error("non-finite training loss at epoch {epoch}, step {step}: {detail}")]
    Diverged { epoch: usize, step: u64, detail: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

impl From<CheckpointError> for ModelError {
    fn from(e: CheckpointError) -> Self {
        ModelError::Checkpoint(e.to_string())
    }
}

/// Output for one predicate: its arguments (1-based token id to role, NONE
/// omitted) and, in end-to-end mode, its sense label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub predicate: usize,
    pub sense: Option<String>,
    pub arcs: BTreeMap<usize, String>,
}

/// Per candidate, the highest-scoring label of its partition (lowest index
/// on ties). Role `<NONE>` is dropped from the frame.
pub fn decode(
    labels: &LabelVocab,
    predicate: usize,
    candidates: &[usize],
    is_sense: &[bool],
    scores: &[Vec<f64>],
) -> Frame {
    let mut frame = Frame {
        predicate,
        sense: None,
        arcs: BTreeMap::new(),
    };
    for ((&c, &sense), row) in candidates.iter().zip(is_sense).zip(scores) {
        if sense {
            let best = argmax_in(row, labels.sense_range());
            frame.sense = Some(labels.label(best).to_owned());
        } else {
            let best = argmax_in(row, labels.role_range());
            if best != 0 {
                frame.arcs.insert(c, labels.label(best).to_owned());
            }
        }
    }
    frame
}

#[derive(Clone, Debug)]
pub struct SrlModel {
    pub config: RunConfig,
    store: ParamStore,
    net: Net,
    words: Vocab,
    lemmas: Vocab,
    tags: Vocab,
    pretrained_words: Option<Vocab>,
    labels: LabelVocab,
    pruning: Pruning,
    rules: Option<RuleSet>,
}

fn pruning_for(config: &RunConfig, rules: Option<&RuleSet>) -> Result<Pruning, ModelError> {
    Ok(match config.prune {
        PruneMode::Rule => Pruning::Rule(
            rules
                .ok_or_else(|| ModelError::Data("rule pruning needs a rule set".into()))?
                .active()?,
        ),
        PruneMode::KOrder => Pruning::KOrder(config.korder_k),
        PruneMode::None => Pruning::Off,
    })
}

impl SrlModel {
    /// Builds vocabularies from `train` and initialises parameters from
    /// `config.seed`. `rules` must be a selected rule set when pruning by
    /// rule. `config.pretrained_dim` is taken from `pretrained`.
    pub fn new(
        mut config: RunConfig,
        train: &[Sentence],
        rules: Option<RuleSet>,
        pretrained: Option<&PretrainedVectors>,
    ) -> Result<SrlModel, ModelError> {
        config.validate()?;
        config.pretrained_dim = pretrained.map_or(0, |p| p.dim);
        if config.mode == Mode::EndToEnd && !vr::supports_virtual_root(&config.language) {
            return Err(ModelError::Mode(format!(
                "end-to-end mode is unavailable for language {:?}",
                config.language
            )));
        }
        let pruning = pruning_for(&config, rules.as_ref())?;
        let rules = if config.prune == PruneMode::Rule { rules } else { None };
        let tokens = || train.iter().flat_map(|s| s.tokens());
        let words = Vocab::build(tokens().map(|t| t.form.as_str()));
        let lemmas = Vocab::build(tokens().map(|t| t.plemma.as_str()));
        let tags = Vocab::build(tokens().map(|t| t.ppos.as_str()));
        let roles = tokens().flat_map(|t| t.apreds.iter().flatten().cloned());
        let senses: Vec<String> = match config.mode {
            Mode::RoleOnly => Vec::new(),
            Mode::EndToEnd => tokens()
                .filter_map(|t| t.pred_sense.as_deref())
                .map(|s| vr::split_sense(s).1.to_owned())
                .collect(),
        };
        let labels = LabelVocab::new(roles, senses)?;
        if config.mode == Mode::EndToEnd && labels.senses().is_empty() {
            return Err(ModelError::Data("end-to-end mode needs gold senses in training data".into()));
        }
        let pretrained_words = pretrained.map(|p| Vocab::from_items(p.words.iter().cloned()));

        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dims = Dims {
            words: words.len(),
            lemmas: lemmas.len(),
            tags: tags.len(),
            pretrained: pretrained_words.as_ref().map_or(0, Vocab::len),
            labels: labels.len(),
        };
        let mut net = Net::init(&mut store, &config, &dims, labels.role_range(), labels.sense_range(), &mut rng);
        if let (Some(p), Some(v), Some(id)) = (pretrained, &pretrained_words, net.pretrained) {
            let table = store.get_mut(id);
            for row in 2..v.len() {
                let src = p.lookup(v.item(row)).expect("vocab built from these vectors");
                table.row_mut(row).copy_from_slice(&p.values[src * p.dim..(src + 1) * p.dim]);
            }
        }
        net.word_singleton = (0..words.len()).map(|i| words.is_singleton(i)).collect();
        net.lemma_singleton = (0..lemmas.len()).map(|i| lemmas.is_singleton(i)).collect();
        Ok(SrlModel {
            config,
            store,
            net,
            words,
            lemmas,
            tags,
            pretrained_words,
            labels,
            pruning,
            rules,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn labels(&self) -> &LabelVocab {
        &self.labels
    }

    pub fn pruning(&self) -> &Pruning {
        &self.pruning
    }

    pub fn rules(&self) -> Option<&RuleSet> {
        self.rules.as_ref()
    }

    /// Width of the encoder input for one token.
    pub fn input_dim(&self) -> usize {
        self.net.input_dim(&self.store)
    }

    fn pretrained_row(&self, form: &str) -> usize {
        match &self.pretrained_words {
            Some(v) => v
                .get(form)
                .or_else(|| v.get(&form.to_lowercase()))
                .unwrap_or(UNK),
            None => UNK,
        }
    }

    pub(crate) fn prepare(
        &self,
        index: usize,
        sentence: &Sentence,
        contextual: Option<&[Vec<f64>]>,
    ) -> Result<Prepared, ModelError> {
        let n = sentence.len();
        let tree = DepTree::from_sentence(sentence, self.config.syntax)
            .map_err(|e| ModelError::Data(format!("sentence {}: {e}", index + 1)))?;
        let e2e = self.config.mode == Mode::EndToEnd;
        let mut words: Vec<usize> = sentence.tokens().iter().map(|t| self.words.id(&t.form)).collect();
        let mut lemmas: Vec<usize> = sentence.tokens().iter().map(|t| self.lemmas.id(&t.plemma)).collect();
        let mut tags: Vec<usize> = sentence.tokens().iter().map(|t| self.tags.id(&t.ppos)).collect();
        let mut pretrained: Vec<usize> = sentence.tokens().iter().map(|t| self.pretrained_row(&t.form)).collect();
        if e2e {
            for v in [&mut words, &mut lemmas, &mut tags, &mut pretrained] {
                v.push(VR);
            }
        }
        let contextual = match (self.config.contextual_dim, contextual) {
            (0, _) => None,
            (_, None) => {
                return Err(ModelError::Data(format!(
                    "model expects {}-dim contextual vectors",
                    self.config.contextual_dim
                )))
            }
            (d, Some(c)) => {
                if c.len() != n {
                    return Err(EmbeddingError::TokenCount {
                        sentence: index + 1,
                        expected: n,
                        found: c.len(),
                    }
                    .into());
                }
                if let Some((t, v)) = c.iter().enumerate().find(|(_, v)| v.len() != d) {
                    return Err(EmbeddingError::Width {
                        sentence: index + 1,
                        token: t + 1,
                        expected: d,
                        found: v.len(),
                    }
                    .into());
                }
                Some(c.to_vec())
            }
        };
        let frames = sentence
            .predicates()
            .iter()
            .enumerate()
            .map(|(slot, &p)| {
                let mask = self.pruning.apply(&tree, p);
                let mut candidates: Vec<usize> = mask.retained.iter().map(|&a| a - 1).collect();
                let mut gold: Vec<Option<usize>> = mask
                    .retained
                    .iter()
                    .map(|&a| match &sentence.token(a).apreds[slot] {
                        None => Some(0),
                        Some(role) => self.labels.role_id(role),
                    })
                    .collect();
                let mut is_sense = vec![false; candidates.len()];
                if e2e {
                    candidates.push(n);
                    is_sense.push(true);
                    gold.push(
                        sentence
                            .token(p)
                            .pred_sense
                            .as_deref()
                            .and_then(|s| self.labels.sense_id(vr::split_sense(s).1)),
                    );
                }
                PreparedFrame {
                    predicate: p - 1,
                    candidates,
                    is_sense,
                    gold,
                }
            })
            .collect();
        Ok(Prepared {
            words,
            lemmas,
            tags,
            pretrained,
            contextual,
            frames,
        })
    }

    fn contextual_for<'a>(
        &self,
        contextual: Option<&'a ContextualEmbeddings>,
        index: usize,
    ) -> Option<&'a [Vec<f64>]> {
        contextual.and_then(|c| c.sentences.get(index)).map(Vec::as_slice)
    }

    /// Label scores for the candidates of one predicate, in evaluation mode.
    /// Returns 1-based candidate ids (`n + 1` is the virtual root) and one
    /// score row per candidate over the full label inventory.
    pub fn scores(
        &self,
        sentence: &Sentence,
        slot: usize,
        contextual: Option<&[Vec<f64>]>,
    ) -> Result<(Vec<usize>, Vec<Vec<f64>>), ModelError> {
        let prep = self.prepare(0, sentence, contextual)?;
        let pass = net::run(&self.net, &self.store, &prep, slot, None, None)?;
        Ok((prep.frames[slot].candidates.iter().map(|c| c + 1).collect(), pass.scores))
    }

    /// Summed cross-entropy over the retained candidates of one predicate,
    /// evaluation mode.
    pub fn loss(
        &self,
        sentence: &Sentence,
        slot: usize,
        contextual: Option<&[Vec<f64>]>,
    ) -> Result<f64, ModelError> {
        let prep = self.prepare(0, sentence, contextual)?;
        Ok(net::run(&self.net, &self.store, &prep, slot, None, None)?.loss)
    }

    /// Loss and parameter gradients for one predicate, evaluation mode.
    pub fn gradient(
        &self,
        sentence: &Sentence,
        slot: usize,
        contextual: Option<&[Vec<f64>]>,
    ) -> Result<(f64, Grads), ModelError> {
        let prep = self.prepare(0, sentence, contextual)?;
        let mut grads = self.store.zero_grads();
        let loss = net::run(&self.net, &self.store, &prep, slot, None, Some(&mut grads))?.loss;
        Ok((loss, grads))
    }

    /// Checks [`SrlModel::gradient`] against central differences.
    pub fn grad_check(
        &mut self,
        sentence: &Sentence,
        slot: usize,
        contextual: Option<&[Vec<f64>]>,
        samples: usize,
        step: f64,
        rng: &mut impl Rng,
    ) -> Result<GradCheckReport, ModelError> {
        let (_, analytic) = self.gradient(sentence, slot, contextual)?;
        let prep = self.prepare(0, sentence, contextual)?;
        let net = &self.net;
        Ok(grad_check(
            &mut self.store,
            &analytic,
            |store| {
                net::run(net, store, &prep, slot, None, None)
                    .map_or(f64::NAN, |p| p.loss)
            },
            samples,
            step,
            rng,
        ))
    }

    /// Mean per-instance loss over a corpus, evaluation mode.
    pub fn mean_loss(
        &self,
        corpus: &[Sentence],
        contextual: Option<&ContextualEmbeddings>,
    ) -> Result<f64, ModelError> {
        let per_sentence: Vec<(f64, usize)> = corpus
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let prep = self.prepare(i, s, self.contextual_for(contextual, i))?;
                let mut total = 0.0;
                for f in 0..prep.frames.len() {
                    total += net::run(&self.net, &self.store, &prep, f, None, None)?.loss;
                }
                Ok((total, prep.frames.len()))
            })
            .collect::<Result<_, ModelError>>()?;
        let (sum, n) = per_sentence
            .iter()
            .fold((0.0, 0), |(a, b), (x, y)| (a + x, b + y));
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }

    /// Decoded frames for every predicate of `sentence`.
    pub fn frames(
        &self,
        index: usize,
        sentence: &Sentence,
        contextual: Option<&[Vec<f64>]>,
    ) -> Result<Vec<Frame>, ModelError> {
        let prep = self.prepare(index, sentence, contextual)?;
        prep.frames
            .iter()
            .enumerate()
            .map(|(slot, f)| {
                let pass = net::run(&self.net, &self.store, &prep, slot, None, None)?;
                let ids: Vec<usize> = f.candidates.iter().map(|c| c + 1).collect();
                let frame = decode(&self.labels, f.predicate + 1, &ids, &f.is_sense, &pass.scores);
                Ok(frame)
            })
            .collect()
    }

    /// Replaces the argument columns (and, end-to-end, the senses) of
    /// `sentence` with the model's decisions.
    pub fn predict_sentence(
        &self,
        index: usize,
        sentence: &Sentence,
        contextual: Option<&[Vec<f64>]>,
    ) -> Result<Sentence, ModelError> {
        let frames = self.frames(index, sentence, contextual)?;
        let mut out = sentence.clone();
        for (slot, frame) in frames.iter().enumerate() {
            for t in out.tokens_mut() {
                t.apreds[slot] = frame.arcs.get(&t.id).cloned();
            }
            if let Some(label) = &frame.sense {
                let t = &mut out.tokens_mut()[frame.predicate - 1];
                t.pred_sense = Some(vr::join_sense(&t.plemma, label));
            }
        }
        Ok(out)
    }

    /// Parallel over sentences; output order and content do not depend on
    /// the thread count.
    pub fn predict(
        &self,
        corpus: &[Sentence],
        contextual: Option<&ContextualEmbeddings>,
    ) -> Result<Vec<Sentence>, ModelError> {
        corpus
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.predict_sentence(i, s, self.contextual_for(contextual, i)))
            .collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut texts = vec![
            ("config".to_owned(), self.config.to_text()),
            ("vocab.word".to_owned(), self.words.to_text()),
            ("vocab.lemma".to_owned(), self.lemmas.to_text()),
            ("vocab.pos".to_owned(), self.tags.to_text()),
            ("labels".to_owned(), self.labels.to_text()),
        ];
        if let Some(v) = &self.pretrained_words {
            texts.push(("vocab.pretrained".to_owned(), v.to_text()));
        }
        if let Some(r) = &self.rules {
            texts.push(("rules".to_owned(), r.to_text()));
        }
        Checkpoint {
            texts,
            tensors: self
                .store
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<SrlModel, ModelError> {
        let text = |name: &str| {
            ck.text(name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing section {name}")))
        };
        let config = RunConfig::from_text(text("config")?)?;
        let words = Vocab::from_text(text("vocab.word")?)?;
        let lemmas = Vocab::from_text(text("vocab.lemma")?)?;
        let tags = Vocab::from_text(text("vocab.pos")?)?;
        let labels = LabelVocab::from_text(text("labels")?)?;
        let pretrained_words = ck.text("vocab.pretrained").map(Vocab::from_text).transpose()?;
        let rules = ck.text("rules").map(RuleSet::from_text).transpose()?;
        let pruning = pruning_for(&config, rules.as_ref())?;

        let mut store = ParamStore::new();
        let dims = Dims {
            words: words.len(),
            lemmas: lemmas.len(),
            tags: tags.len(),
            pretrained: pretrained_words.as_ref().map_or(0, Vocab::len),
            labels: labels.len(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Net::init(&mut store, &config, &dims, labels.role_range(), labels.sense_range(), &mut rng);
        if store.len() != ck.tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                store.len(),
                ck.tensors.len()
            )));
        }
        for id in store.ids().collect::<Vec<_>>() {
            let name = store.param(id).name.clone();
            let t = ck
                .tensor(&name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape() != store.get(id).shape() {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {name}: shape {:?}, expected {:?}",
                    t.shape(),
                    store.get(id).shape()
                )));
            }
            t.check_finite(&name)?;
            *store.get_mut(id) = t.clone();
        }
        net.word_singleton = (0..words.len()).map(|i| words.is_singleton(i)).collect();
        net.lemma_singleton = (0..lemmas.len()).map(|i| lemmas.is_singleton(i)).collect();
        Ok(SrlModel {
            config,
            store,
            net,
            words,
            lemmas,
            tags,
            pretrained_words,
            labels,
            pruning,
            rules,
        })
    }
}
