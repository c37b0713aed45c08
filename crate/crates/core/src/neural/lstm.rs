//! Stacked bidirectional LSTM with hand-written backpropagation through time.
//!
//! Gate rows are laid out as `[input, forget, candidate, output]`, each of
//! height `hidden`. Dropout follows the variational scheme: one mask per
//! sequence on the recurrent state, and one mask per token on the inputs of
//! every layer above the first.

use rand::Rng;

use super::dropout::dropout_mask;
use super::tensor::{check_finite, gemv, gemv_t, ger, sigmoid, Grads, ParamId, ParamStore, Tensor};
use super::NumericError;

/// Parameters of one direction of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    /// `4H x input`
    pub w: ParamId,
    /// `4H x H`
    pub u: ParamId,
    /// `4H`
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    /// Registers a direction with Xavier weights, forget-gate bias 1 and other
    /// biases 0.
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> LstmParams {
        let w = store.add(
            format!("{prefix}.w"),
            Tensor::xavier(&[4 * hidden, input], input, 4 * hidden, rng),
        );
        let u = store.add(
            format!("{prefix}.u"),
            Tensor::xavier(&[4 * hidden, hidden], hidden, 4 * hidden, rng),
        );
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        let b = store.add(format!("{prefix}.b"), bias);
        LstmParams {
            w,
            u,
            b,
            input,
            hidden,
        }
    }
}

#[derive(Clone, Debug)]
struct Step {
    x: Vec<f64>,
    /// Previous hidden state after the recurrent mask.
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `4H`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Cache of one direction over one sequence; steps are in processing order.
#[derive(Clone, Debug)]
pub struct DirCache {
    steps: Vec<Step>,
    reverse: bool,
    rec_mask: Option<Vec<f64>>,
}

/// Runs one direction. Returns hidden states in sequence order.
pub fn lstm_forward(
    store: &ParamStore,
    p: &LstmParams,
    xs: &[Vec<f64>],
    reverse: bool,
    rec_mask: Option<Vec<f64>>,
) -> (Vec<Vec<f64>>, DirCache) {
    let h = p.hidden;
    let w = store.get(p.w).data();
    let u = store.get(p.u).data();
    let b = store.get(p.b).data();
    let t_len = xs.len();
    let mut hs = vec![Vec::new(); t_len];
    let mut steps = Vec::with_capacity(t_len);
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];

    for k in 0..t_len {
        let t = if reverse { t_len - 1 - k } else { k };
        let x = &xs[t];
        let h_in: Vec<f64> = match &rec_mask {
            Some(m) => h_prev.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => h_prev.clone(),
        };
        let mut gates = b.to_vec();
        gemv(w, 4 * h, p.input, x, &mut gates);
        gemv(u, 4 * h, h, &h_in, &mut gates);
        for (j, g) in gates.iter_mut().enumerate() {
            *g = if (2 * h..3 * h).contains(&j) {
                g.tanh()
            } else {
                sigmoid(*g)
            };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for j in 0..h {
            c[j] = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
            tanh_c[j] = c[j].tanh();
            h_out[j] = gates[3 * h + j] * tanh_c[j];
        }
        steps.push(Step {
            x: x.clone(),
            h_prev: h_in,
            c_prev: std::mem::replace(&mut c_prev, c),
            gates,
            tanh_c,
        });
        hs[t] = h_out.clone();
        h_prev = h_out;
    }
    (
        hs,
        DirCache {
            steps,
            reverse,
            rec_mask,
        },
    )
}

/// Backpropagates `dhs` (sequence order) through one direction, accumulating
/// parameter gradients. Returns gradients of the inputs in sequence order.
pub fn lstm_backward(
    store: &ParamStore,
    p: &LstmParams,
    cache: &DirCache,
    dhs: &[Vec<f64>],
    grads: &mut Grads,
) -> Vec<Vec<f64>> {
    let h = p.hidden;
    let w = store.get(p.w).data();
    let u = store.get(p.u).data();
    let t_len = cache.steps.len();
    let mut dxs = vec![vec![0.0; p.input]; t_len];
    let mut dh_rec = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];

    for k in (0..t_len).rev() {
        let t = if cache.reverse { t_len - 1 - k } else { k };
        let s = &cache.steps[k];
        let g = &s.gates;
        for j in 0..h {
            let dh = dhs[t][j] + dh_rec[j];
            let (i, f, c_hat, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = s.tanh_c[j];
            let d_o = dh * tc;
            let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
            da[j] = dc * c_hat * i * (1.0 - i);
            da[h + j] = dc * s.c_prev[j] * f * (1.0 - f);
            da[2 * h + j] = dc * i * (1.0 - c_hat * c_hat);
            da[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        ger(grads.get_mut(p.w).data_mut(), 4 * h, p.input, &da, &s.x);
        ger(grads.get_mut(p.u).data_mut(), 4 * h, h, &da, &s.h_prev);
        for (gb, d) in grads.get_mut(p.b).data_mut().iter_mut().zip(&da) {
            *gb += d;
        }
        gemv_t(w, 4 * h, p.input, &da, &mut dxs[t]);
        dh_rec.fill(0.0);
        gemv_t(u, 4 * h, h, &da, &mut dh_rec);
        if let Some(m) = &cache.rec_mask {
            dh_rec.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
        }
    }
    dxs
}

/// A stack of bidirectional layers; each layer's output is the
/// concatenation `[forward; backward]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiLstm {
    pub layers: Vec<[LstmParams; 2]>,
}

impl BiLstm {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        n_layers: usize,
        rng: &mut impl Rng,
    ) -> BiLstm {
        let layers = (0..n_layers)
            .map(|l| {
                let width = if l == 0 { input } else { 2 * hidden };
                [
                    LstmParams::init(store, &format!("{prefix}.{l}.fw"), width, hidden, rng),
                    LstmParams::init(store, &format!("{prefix}.{l}.bw"), width, hidden, rng),
                ]
            })
            .collect();
        BiLstm { layers }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers.last().map_or(0, |l| l[0].hidden)
    }
}

#[derive(Clone, Debug)]
pub struct BiLstmCache {
    layers: Vec<LayerCache>,
}

#[derive(Clone, Debug)]
struct LayerCache {
    input_mask: Option<Vec<Vec<f64>>>,
    dirs: [DirCache; 2],
}

/// Dropout settings for a training-mode pass.
pub struct Dropout<'a, R: Rng> {
    pub rng: &'a mut R,
    pub keep: f64,
}

pub fn bilstm_forward<R: Rng>(
    store: &ParamStore,
    net: &BiLstm,
    inputs: &[Vec<f64>],
    mut dropout: Option<Dropout<'_, R>>,
) -> Result<(Vec<Vec<f64>>, BiLstmCache), NumericError> {
    if inputs.is_empty() {
        return Err(NumericError::Shape("empty input sequence".into()));
    }
    let mut layer_in: Vec<Vec<f64>> = inputs.to_vec();
    let mut caches = Vec::with_capacity(net.layers.len());
    for (l, dirs) in net.layers.iter().enumerate() {
        if let Some(x) = layer_in.iter().find(|x| x.len() != dirs[0].input) {
            return Err(NumericError::Shape(format!(
                "layer {l} expects width {}, got {}",
                dirs[0].input,
                x.len()
            )));
        }
        let input_mask = match (&mut dropout, l) {
            (Some(d), l) if l > 0 && d.keep < 1.0 => {
                let masks: Vec<Vec<f64>> = layer_in
                    .iter()
                    .map(|x| dropout_mask(d.rng, x.len(), d.keep))
                    .collect();
                for (x, m) in layer_in.iter_mut().zip(&masks) {
                    x.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                Some(masks)
            }
            _ => None,
        };
        let mut rec_mask = |hidden: usize| match &mut dropout {
            Some(d) if d.keep < 1.0 => Some(dropout_mask(d.rng, hidden, d.keep)),
            _ => None,
        };
        let fw_mask = rec_mask(dirs[0].hidden);
        let bw_mask = rec_mask(dirs[1].hidden);
        let (hf, cf) = lstm_forward(store, &dirs[0], &layer_in, false, fw_mask);
        let (hb, cb) = lstm_forward(store, &dirs[1], &layer_in, true, bw_mask);
        layer_in = hf
            .into_iter()
            .zip(hb)
            .map(|(mut f, b)| {
                f.extend_from_slice(&b);
                f
            })
            .collect();
        caches.push(LayerCache {
            input_mask,
            dirs: [cf, cb],
        });
    }
    for h in &layer_in {
        check_finite(h, "bilstm output")?;
    }
    Ok((layer_in, BiLstmCache { layers: caches }))
}

/// Returns gradients with respect to the original inputs.
pub fn bilstm_backward(
    store: &ParamStore,
    net: &BiLstm,
    cache: &BiLstmCache,
    d_out: &[Vec<f64>],
    grads: &mut Grads,
) -> Vec<Vec<f64>> {
    let mut d = d_out.to_vec();
    for (dirs, lc) in net.layers.iter().zip(&cache.layers).rev() {
        let h = dirs[0].hidden;
        let d_fw: Vec<Vec<f64>> = d.iter().map(|v| v[..h].to_vec()).collect();
        let d_bw: Vec<Vec<f64>> = d.iter().map(|v| v[h..].to_vec()).collect();
        let mut dx = lstm_backward(store, &dirs[0], &lc.dirs[0], &d_fw, grads);
        let dx_b = lstm_backward(store, &dirs[1], &lc.dirs[1], &d_bw, grads);
        for (a, b) in dx.iter_mut().zip(&dx_b) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        if let Some(masks) = &lc.input_mask {
            for (g, m) in dx.iter_mut().zip(masks) {
                g.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
            }
        }
        d = dx;
    }
    d
}
