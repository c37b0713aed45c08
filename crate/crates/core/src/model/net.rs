//! One (sentence, predicate) pass through embeddings, encoder, heads and
//! biaffine scorer, with the matching backward pass.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::neural::dropout::apply_dropout;
use crate::neural::tensor::{axpy, check_finite, Grads, ParamId, ParamStore, Tensor};
use crate::neural::{
    bilstm_backward, bilstm_forward, softmax_xent, BiLstm, Biaffine, Dropout, NumericError,
    ReluLayer,
};

use super::vocab::{UNK, VR};

/// Parameter handles and the fixed hyper-parameters of a forward pass.
#[derive(Clone, Debug)]
pub(crate) struct Net {
    pub word: ParamId,
    pub lemma: Option<ParamId>,
    pub pos: Option<ParamId>,
    pub pretrained: Option<ParamId>,
    pub indicator: ParamId,
    pub encoder: BiLstm,
    pub pred_head: ReluLayer,
    pub arg_head: ReluLayer,
    pub scorer: Biaffine,
    pub contextual_dim: usize,
    pub roles: Range<usize>,
    pub senses: Range<usize>,
    pub lstm_keep: f64,
    pub mlp_keep: f64,
    pub unk_replace: f64,
    pub word_singleton: Vec<bool>,
    pub lemma_singleton: Vec<bool>,
}

pub(crate) struct Dims {
    pub words: usize,
    pub lemmas: usize,
    pub tags: usize,
    pub pretrained: usize,
    pub labels: usize,
}

impl Net {
    /// Registers every parameter in a fixed order, so the same config and
    /// vocabulary sizes always give the same names, shapes and values.
    pub fn init(
        store: &mut ParamStore,
        config: &super::RunConfig,
        dims: &Dims,
        roles: Range<usize>,
        senses: Range<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Net {
        let emb = |store: &mut ParamStore, name: &str, rows: usize, dim: usize, rng: &mut ChaCha8Rng| {
            store.add(name, Tensor::uniform(&[rows, dim], 0.1, rng))
        };
        let word = emb(store, "emb.word", dims.words, config.word_dim, rng);
        let lemma = (config.use_lemma && config.lemma_dim > 0)
            .then(|| emb(store, "emb.lemma", dims.lemmas, config.lemma_dim, rng));
        let pos = (config.use_pos && config.pos_dim > 0)
            .then(|| emb(store, "emb.pos", dims.tags, config.pos_dim, rng));
        let pretrained = (config.pretrained_dim > 0).then(|| {
            store.add_with(
                "emb.pretrained",
                Tensor::zeros(&[dims.pretrained, config.pretrained_dim]),
                config.fine_tune_pretrained,
            )
        });
        let indicator = emb(store, "emb.indicator", 2, config.indicator_dim, rng);
        let input = config.word_dim
            + lemma.map_or(0, |_| config.lemma_dim)
            + pos.map_or(0, |_| config.pos_dim)
            + config.pretrained_dim
            + config.indicator_dim
            + config.contextual_dim;
        let encoder = BiLstm::init(store, "enc", input, config.lstm_hidden, config.lstm_layers, rng);
        let hdim = encoder.output_dim();
        let pred_head = ReluLayer::init(store, "head.pred", hdim, config.mlp_dim, rng);
        let arg_head = ReluLayer::init(store, "head.arg", hdim, config.mlp_dim, rng);
        let scorer = Biaffine::init(store, "scorer", config.mlp_dim, dims.labels, rng);
        Net {
            word,
            lemma,
            pos,
            pretrained,
            indicator,
            encoder,
            pred_head,
            arg_head,
            scorer,
            contextual_dim: config.contextual_dim,
            roles,
            senses,
            lstm_keep: config.lstm_keep,
            mlp_keep: config.mlp_keep,
            unk_replace: config.unk_replace,
            word_singleton: Vec::new(),
            lemma_singleton: Vec::new(),
        }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        let w = |id: Option<ParamId>| id.map_or(0, |id| store.get(id).shape()[1]);
        w(Some(self.word)) + w(self.lemma) + w(self.pos) + w(self.pretrained) + w(Some(self.indicator)) + self.contextual_dim
    }
}

/// A sentence mapped to vocabulary rows. Position `n` (0-based) is the
/// virtual root when present.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    pub words: Vec<usize>,
    pub lemmas: Vec<usize>,
    pub tags: Vec<usize>,
    pub pretrained: Vec<usize>,
    pub contextual: Option<Vec<Vec<f64>>>,
    pub frames: Vec<PreparedFrame>,
}

#[derive(Clone, Debug)]
pub(crate) struct PreparedFrame {
    /// 0-based position of the predicate.
    pub predicate: usize,
    /// 0-based positions that survive pruning, ascending; the virtual root,
    /// if any, last.
    pub candidates: Vec<usize>,
    /// Whether each candidate is scored over senses rather than roles.
    pub is_sense: Vec<bool>,
    /// Gold label per candidate; `None` when unknown to the model.
    pub gold: Vec<Option<usize>>,
}

pub(crate) struct Pass {
    pub scores: Vec<Vec<f64>>,
    pub loss: f64,
}

fn mask_mul(x: &mut [f64], mask: &[f64]) {
    x.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
}

/// Runs one instance. With `rng`, training-time noise (UNK replacement and
/// dropout) is applied; with `grads`, gradients of the summed loss are added.
pub(crate) fn run(
    net: &Net,
    store: &ParamStore,
    prep: &Prepared,
    frame: usize,
    mut rng: Option<&mut ChaCha8Rng>,
    grads: Option<&mut Grads>,
) -> Result<Pass, NumericError> {
    let f = &prep.frames[frame];
    let len = prep.words.len();
    let mut words = prep.words.clone();
    let mut lemmas = prep.lemmas.clone();
    if let Some(r) = rng.as_deref_mut() {
        if net.unk_replace > 0.0 {
            for t in 0..len {
                if words[t] != VR && net.word_singleton[words[t]] && r.gen::<f64>() < net.unk_replace {
                    words[t] = UNK;
                }
                if lemmas[t] != VR && net.lemma_singleton[lemmas[t]] && r.gen::<f64>() < net.unk_replace {
                    lemmas[t] = UNK;
                }
            }
        }
    }

    let in_dim = net.input_dim(store);
    let xs: Vec<Vec<f64>> = (0..len)
        .map(|t| {
            let mut x = Vec::with_capacity(in_dim);
            x.extend_from_slice(store.get(net.word).row(words[t]));
            if let Some(id) = net.lemma {
                x.extend_from_slice(store.get(id).row(lemmas[t]));
            }
            if let Some(id) = net.pos {
                x.extend_from_slice(store.get(id).row(prep.tags[t]));
            }
            if let Some(id) = net.pretrained {
                x.extend_from_slice(store.get(id).row(prep.pretrained[t]));
            }
            x.extend_from_slice(store.get(net.indicator).row((t == f.predicate) as usize));
            if net.contextual_dim > 0 {
                match prep.contextual.as_ref().and_then(|c| c.get(t)) {
                    Some(v) => x.extend_from_slice(v),
                    None => x.resize(x.len() + net.contextual_dim, 0.0),
                }
            }
            x
        })
        .collect();

    let dropout = rng.as_deref_mut().map(|r| Dropout {
        rng: r,
        keep: net.lstm_keep,
    });
    let (hs, enc_cache) = bilstm_forward(store, &net.encoder, &xs, dropout)?;

    let yp = net.pred_head.forward(store, &hs[f.predicate]);
    let ya: Vec<Vec<f64>> = f
        .candidates
        .iter()
        .map(|&c| net.arg_head.forward(store, &hs[c]))
        .collect();
    let mut yp_d = yp.clone();
    let mut ya_d = ya.clone();
    let (mask_p, mask_a) = match rng {
        Some(r) if net.mlp_keep < 1.0 => {
            let mp = apply_dropout(r, &mut yp_d, net.mlp_keep);
            let ma: Vec<Vec<f64>> = ya_d
                .iter_mut()
                .map(|v| apply_dropout(r, v, net.mlp_keep))
                .collect();
            (Some(mp), Some(ma))
        }
        _ => (None, None),
    };

    let (scores, bcache) = net.scorer.score_many(store, &yp_d, &ya_d);
    for s in &scores {
        check_finite(s, "label scores")?;
    }

    let mut loss = 0.0;
    let mut dscores = vec![vec![0.0; net.scorer.labels]; scores.len()];
    for (i, s) in scores.iter().enumerate() {
        let Some(g) = f.gold[i] else { continue };
        let range = if f.is_sense[i] { net.senses.clone() } else { net.roles.clone() };
        let (l, d) = softmax_xent(&s[range.clone()], g - range.start);
        loss += l;
        dscores[i][range].copy_from_slice(&d);
    }
    if !loss.is_finite() {
        return Err(NumericError::NonFinite(format!("instance loss {loss}")));
    }

    if let Some(grads) = grads {
        let mut dyp = vec![0.0; yp.len()];
        let mut dya = vec![vec![0.0; net.scorer.dim]; ya.len()];
        net.scorer
            .backward_many(store, &bcache, &yp_d, &ya_d, &dscores, &mut dyp, &mut dya, grads);
        if let (Some(mp), Some(ma)) = (&mask_p, &mask_a) {
            mask_mul(&mut dyp, mp);
            for (d, m) in dya.iter_mut().zip(ma) {
                mask_mul(d, m);
            }
        }
        let hdim = net.encoder.output_dim();
        let mut dh = vec![vec![0.0; hdim]; len];
        net.pred_head
            .backward(store, &hs[f.predicate], &yp, &dyp, &mut dh[f.predicate], grads);
        for (i, &c) in f.candidates.iter().enumerate() {
            net.arg_head.backward(store, &hs[c], &ya[i], &dya[i], &mut dh[c], grads);
        }
        let dxs = bilstm_backward(store, &net.encoder, &enc_cache, &dh, grads);

        for (t, dx) in dxs.iter().enumerate() {
            let mut off = 0;
            let mut scatter = |id: ParamId, row: usize| {
                let t = grads.get_mut(id);
                let w = t.shape()[1];
                axpy(1.0, &dx[off..off + w], t.row_mut(row));
                off += w;
            };
            scatter(net.word, words[t]);
            if let Some(id) = net.lemma {
                scatter(id, lemmas[t]);
            }
            if let Some(id) = net.pos {
                scatter(id, prep.tags[t]);
            }
            if let Some(id) = net.pretrained {
                scatter(id, prep.pretrained[t]);
            }
            scatter(net.indicator, (t == f.predicate) as usize);
        }
    }
    Ok(Pass { scores, loss })
}

/// Highest-scoring label index in `range`; ties go to the lowest index.
pub fn argmax_in(scores: &[f64], range: Range<usize>) -> usize {
    let mut best = range.start;
    for i in range {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}
