//! Mini-batch training with Adam and best-on-dev selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conll::Sentence;
use crate::eval::{score, ScoreReport};
use crate::neural::{adam_step, AdamConfig, AdamState, Grads, ParamStore};

use super::net::{self, Prepared};
use super::{ContextualEmbeddings, Mode, ModelError, SrlModel};

/// Instances per gradient chunk. Chunks are reduced in a fixed order, so the
/// result does not depend on how many threads process them.
const CHUNK: usize = 8;

/// Stream id for the per-epoch shuffle, distinct from any instance index.
const SHUFFLE_STREAM: u64 = u64::MAX;

/// SplitMix64 finaliser over the seed, epoch and stream.
fn derive_seed(seed: u64, epoch: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub steps: u64,
    /// Mean training-mode loss per (sentence, predicate) instance.
    pub loss: f64,
}

pub struct Trainer {
    model: SrlModel,
    data: Vec<Prepared>,
    instances: Vec<(usize, usize)>,
    adam: AdamState,
    adam_cfg: AdamConfig,
    epoch: usize,
    steps: u64,
}

impl Trainer {
    pub fn new(
        model: SrlModel,
        corpus: &[Sentence],
        contextual: Option<&ContextualEmbeddings>,
    ) -> Result<Trainer, ModelError> {
        if let Some(c) = contextual {
            if c.sentences.len() != corpus.len() {
                return Err(super::EmbeddingError::SentenceCount {
                    expected: corpus.len(),
                    found: c.sentences.len(),
                }
                .into());
            }
        }
        let data: Vec<Prepared> = corpus
            .iter()
            .enumerate()
            .map(|(i, s)| model.prepare(i, s, model.contextual_for(contextual, i)))
            .collect::<Result<_, _>>()?;
        let instances = data
            .iter()
            .enumerate()
            .flat_map(|(i, p)| (0..p.frames.len()).map(move |f| (i, f)))
            .collect();
        let c = &model.config;
        let adam_cfg = AdamConfig {
            lr: c.lr,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
        };
        Ok(Trainer {
            adam: AdamState::new(&model.store),
            model,
            data,
            instances,
            adam_cfg,
            epoch: 0,
            steps: 0,
        })
    }

    pub fn model(&self) -> &SrlModel {
        &self.model
    }

    pub fn into_model(self) -> SrlModel {
        self.model
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    /// Mean evaluation-mode loss per instance over the training data.
    pub fn training_loss(&self) -> Result<f64, ModelError> {
        let m = &self.model;
        let losses: Vec<f64> = self
            .instances
            .par_iter()
            .map(|&(s, f)| Ok(net::run(&m.net, &m.store, &self.data[s], f, None, None)?.loss))
            .collect::<Result<_, ModelError>>()?;
        Ok(if losses.is_empty() { 0.0 } else { losses.iter().sum::<f64>() / losses.len() as f64 })
    }

    pub fn run_epoch(&mut self) -> Result<EpochReport, ModelError> {
        self.epoch += 1;
        let seed = self.model.config.seed;
        let epoch = self.epoch as u64;
        let mut order: Vec<usize> = (0..self.instances.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch, SHUFFLE_STREAM)));

        let batch_size = self.model.config.batch_size;
        let mut total = 0.0;
        for batch in order.chunks(batch_size) {
            let (loss, mut grads) = self.batch_gradient(batch, seed, epoch)?;
            total += loss;
            let n = batch.len() as f64;
            grads.scale(1.0 / n);
            let step = self.steps + 1;
            if !loss.is_finite() {
                return Err(ModelError::Diverged {
                    epoch: self.epoch,
                    step,
                    detail: format!("batch loss {loss}"),
                });
            }
            adam_step(&mut self.model.store, &grads, &mut self.adam, &self.adam_cfg).map_err(|e| {
                ModelError::Diverged {
                    epoch: self.epoch,
                    step,
                    detail: e.to_string(),
                }
            })?;
            self.steps = step;
        }
        let n = self.instances.len().max(1) as f64;
        Ok(EpochReport {
            epoch: self.epoch,
            steps: self.steps,
            loss: total / n,
        })
    }

    fn batch_gradient(&self, batch: &[usize], seed: u64, epoch: u64) -> Result<(f64, Grads), ModelError> {
        let m = &self.model;
        let parts: Vec<(f64, Grads)> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grads = m.store.zero_grads();
                let mut loss = 0.0;
                for &i in chunk {
                    let (s, f) = self.instances[i];
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch, i as u64));
                    let pass = net::run(&m.net, &m.store, &self.data[s], f, Some(&mut rng), Some(&mut grads))
                        .map_err(|e| ModelError::Diverged {
                            epoch: epoch as usize,
                            step: self.steps + 1,
                            detail: format!("sentence {} predicate {}: {e}", s + 1, f + 1),
                        })?;
                    loss += pass.loss;
                }
                Ok((loss, grads))
            })
            .collect::<Result<_, ModelError>>()?;
        let mut it = parts.into_iter();
        let (mut loss, mut grads) = it.next().expect("nonempty batch");
        for (l, g) in it {
            loss += l;
            grads.add_assign(&g);
        }
        Ok((loss, grads))
    }
}

/// Progress notifications from [`train`].
#[derive(Clone, Copy, Debug)]
pub enum TrainEvent<'a> {
    Epoch(&'a EpochReport),
    Eval {
        epoch: usize,
        report: &'a ScoreReport,
        best: bool,
    },
}

pub struct TrainOutcome {
    /// Parameters of the best development epoch, or the last epoch when no
    /// development data was given.
    pub model: SrlModel,
    pub best_epoch: Option<usize>,
    pub best_f1: Option<f64>,
    pub epochs_run: usize,
    pub history: Vec<EpochReport>,
}

/// Runs up to `config.epochs` epochs, scoring `dev` every `eval_every`
/// epochs with labeled F1 (senses included in end-to-end mode) and keeping
/// the best parameters. Stops early once `stop_f1` is reached.
pub fn train(
    model: SrlModel,
    train: &[Sentence],
    train_contextual: Option<&ContextualEmbeddings>,
    dev: Option<(&[Sentence], Option<&ContextualEmbeddings>)>,
    log: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<TrainOutcome, ModelError> {
    let cfg = model.config.clone();
    let mut trainer = Trainer::new(model, train, train_contextual)?;
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, ParamStore)> = None;
    for _ in 0..cfg.epochs {
        let report = trainer.run_epoch()?;
        log(TrainEvent::Epoch(&report));
        history.push(report);
        let Some((dev, dev_ctx)) = dev else { continue };
        if report.epoch % cfg.eval_every != 0 && report.epoch != cfg.epochs {
            continue;
        }
        let predicted = trainer.model.predict(dev, dev_ctx)?;
        let scored = score(dev, &predicted, cfg.mode == Mode::EndToEnd)
            .map_err(|e| ModelError::Data(e.to_string()))?;
        let improved = best.as_ref().is_none_or(|(_, f1, _)| scored.f1 > *f1);
        if improved {
            best = Some((report.epoch, scored.f1, trainer.model.store.clone()));
        }
        log(TrainEvent::Eval {
            epoch: report.epoch,
            report: &scored,
            best: improved,
        });
        if cfg.stop_f1.is_some_and(|t| scored.f1 >= t) {
            break;
        }
    }
    let epochs_run = trainer.epoch();
    let mut model = trainer.into_model();
    let (best_epoch, best_f1) = match best {
        Some((e, f1, store)) => {
            model.store = store;
            (Some(e), Some(f1))
        }
        None => (None, None),
    };
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_f1,
        epochs_run,
        history,
    })
}
