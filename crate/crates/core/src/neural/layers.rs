use rand::Rng;

use super::tensor::{axpy, dot, gemv, gemv_t, ger, Grads, ParamId, ParamStore, Tensor};
use super::NumericError;

/// `relu(W x + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReluLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl ReluLayer {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> ReluLayer {
        ReluLayer {
            w: store.add(
                format!("{prefix}.w"),
                Tensor::xavier(&[output, input], input, output, rng),
            ),
            b: store.add(format!("{prefix}.b"), Tensor::zeros(&[output])),
            input,
            output,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let mut y = store.get(self.b).data().to_vec();
        gemv(store.get(self.w).data(), self.output, self.input, x, &mut y);
        y.iter_mut().for_each(|v| *v = v.max(0.0));
        y
    }

    /// `y` is this layer's output for `x`; `dy` its gradient. Adds to `dx`.
    pub fn backward(
        &self,
        store: &ParamStore,
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        dx: &mut [f64],
        grads: &mut Grads,
    ) {
        let da: Vec<f64> = dy
            .iter()
            .zip(y)
            .map(|(d, &v)| if v > 0.0 { *d } else { 0.0 })
            .collect();
        ger(
            grads.get_mut(self.w).data_mut(),
            self.output,
            self.input,
            &da,
            x,
        );
        axpy(1.0, &da, grads.get_mut(self.b).data_mut());
        gemv_t(store.get(self.w).data(), self.output, self.input, &da, dx);
    }
}

/// Label scores `s_r = h_pᵀ W1_r h_a + W2_rᵀ [h_p; h_a] + b_r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Biaffine {
    /// `labels x dim x dim`
    pub w1: ParamId,
    /// `labels x 2 dim`
    pub w2: ParamId,
    /// `labels`
    pub b: ParamId,
    pub dim: usize,
    pub labels: usize,
}

/// Per-predicate intermediate: `u[r] = h_pᵀ W1_r`.
#[derive(Clone, Debug)]
pub struct BiaffineCache {
    u: Vec<f64>,
}

impl Biaffine {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        labels: usize,
        rng: &mut impl Rng,
    ) -> Biaffine {
        Biaffine {
            w1: store.add(
                format!("{prefix}.w1"),
                Tensor::xavier(&[labels, dim, dim], dim, dim, rng),
            ),
            w2: store.add(
                format!("{prefix}.w2"),
                Tensor::xavier(&[labels, 2 * dim], 2 * dim, labels, rng),
            ),
            b: store.add(format!("{prefix}.b"), Tensor::zeros(&[labels])),
            dim,
            labels,
        }
    }

    /// Scores a single (predicate, argument) pair.
    pub fn score(
        &self,
        store: &ParamStore,
        hp: &[f64],
        ha: &[f64],
    ) -> Result<Vec<f64>, NumericError> {
        if hp.len() != self.dim || ha.len() != self.dim {
            return Err(NumericError::Shape(format!(
                "biaffine expects {}-dim inputs, got {} and {}",
                self.dim,
                hp.len(),
                ha.len()
            )));
        }
        let (scores, _) = self.score_many(store, hp, std::slice::from_ref(&ha.to_vec()));
        Ok(scores.into_iter().next().expect("one candidate"))
    }

    /// Scores one predicate against many candidates, sharing `h_pᵀ W1`.
    pub fn score_many(
        &self,
        store: &ParamStore,
        hp: &[f64],
        has: &[Vec<f64>],
    ) -> (Vec<Vec<f64>>, BiaffineCache) {
        let d = self.dim;
        let w1 = store.get(self.w1).data();
        let w2 = store.get(self.w2).data();
        let b = store.get(self.b).data();
        let mut u = vec![0.0; self.labels * d];
        for r in 0..self.labels {
            gemv_t(
                &w1[r * d * d..(r + 1) * d * d],
                d,
                d,
                hp,
                &mut u[r * d..(r + 1) * d],
            );
        }
        let pred_linear: Vec<f64> = (0..self.labels)
            .map(|r| dot(&w2[r * 2 * d..r * 2 * d + d], hp) + b[r])
            .collect();
        let scores = has
            .iter()
            .map(|ha| {
                (0..self.labels)
                    .map(|r| {
                        dot(&u[r * d..(r + 1) * d], ha)
                            + dot(&w2[r * 2 * d + d..(r + 1) * 2 * d], ha)
                            + pred_linear[r]
                    })
                    .collect()
            })
            .collect();
        (scores, BiaffineCache { u })
    }

    /// Backward for [`Biaffine::score_many`]. Adds into `dhp` and each `dhas[i]`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_many(
        &self,
        store: &ParamStore,
        cache: &BiaffineCache,
        hp: &[f64],
        has: &[Vec<f64>],
        dscores: &[Vec<f64>],
        dhp: &mut [f64],
        dhas: &mut [Vec<f64>],
        grads: &mut Grads,
    ) {
        let d = self.dim;
        let l = self.labels;
        let w1 = store.get(self.w1).data();
        let w2 = store.get(self.w2).data();
        // g[r] = sum_a ds[a][r] h_a ; total[r] = sum_a ds[a][r]
        let mut g = vec![0.0; l * d];
        let mut total = vec![0.0; l];
        for ((ha, ds), dha) in has.iter().zip(dscores).zip(dhas.iter_mut()) {
            for r in 0..l {
                if ds[r] == 0.0 {
                    continue;
                }
                axpy(ds[r], ha, &mut g[r * d..(r + 1) * d]);
                total[r] += ds[r];
                axpy(ds[r], &cache.u[r * d..(r + 1) * d], dha);
                axpy(ds[r], &w2[r * 2 * d + d..(r + 1) * 2 * d], dha);
            }
        }
        {
            let gw2 = grads.get_mut(self.w2).data_mut();
            for r in 0..l {
                axpy(total[r], hp, &mut gw2[r * 2 * d..r * 2 * d + d]);
            }
            for (ha, ds) in has.iter().zip(dscores) {
                for r in 0..l {
                    axpy(ds[r], ha, &mut gw2[r * 2 * d + d..(r + 1) * 2 * d]);
                }
            }
        }
        axpy(1.0, &total, grads.get_mut(self.b).data_mut());
        let gw1 = grads.get_mut(self.w1).data_mut();
        for r in 0..l {
            let gr = &g[r * d..(r + 1) * d];
            ger(&mut gw1[r * d * d..(r + 1) * d * d], d, d, hp, gr);
            gemv(&w1[r * d * d..(r + 1) * d * d], d, d, gr, dhp);
            axpy(total[r], &w2[r * 2 * d..r * 2 * d + d], dhp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(store: &ParamStore, bi: &Biaffine, hp: &[f64], ha: &[f64]) -> Vec<f64> {
        let d = bi.dim;
        let w1 = store.get(bi.w1).data();
        let w2 = store.get(bi.w2).data();
        let b = store.get(bi.b).data();
        (0..bi.labels)
            .map(|r| {
                let mut s = b[r];
                for i in 0..d {
                    for j in 0..d {
                        s += hp[i] * w1[r * d * d + i * d + j] * ha[j];
                    }
                }
                for i in 0..d {
                    s += w2[r * 2 * d + i] * hp[i] + w2[r * 2 * d + d + i] * ha[i];
                }
                s
            })
            .collect()
    }

    #[test]
    fn hand_arithmetic_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let bi = Biaffine::init(&mut store, "bi", 1, 1, &mut rng);
        store.get_mut(bi.w1).data_mut().copy_from_slice(&[3.0]);
        store
            .get_mut(bi.w2)
            .data_mut()
            .copy_from_slice(&[0.5, 0.25]);
        store.get_mut(bi.b).data_mut().copy_from_slice(&[0.1]);
        let s = bi.score(&store, &[1.0], &[2.0]).unwrap();
        assert_eq!(s, vec![7.1]);
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let bi = Biaffine::init(&mut store, "bi", 3, 2, &mut rng);
        assert!(bi.score(&store, &[1.0; 3], &[1.0; 2]).is_err());
    }

    #[test]
    fn degenerate_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let bi = Biaffine::init(&mut store, "bi", 4, 3, &mut rng);
        store
            .get_mut(bi.b)
            .data_mut()
            .copy_from_slice(&[0.5, -1.0, 2.0]);
        let hp: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ha: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut zeroed = store.clone();
        zeroed.get_mut(bi.w1).fill(0.0);
        zeroed.get_mut(bi.w2).fill(0.0);
        assert_eq!(bi.score(&zeroed, &hp, &ha).unwrap(), vec![0.5, -1.0, 2.0]);

        // Bilinear only.
        let mut bilinear = store.clone();
        bilinear.get_mut(bi.w2).fill(0.0);
        bilinear.get_mut(bi.b).fill(0.0);
        let w1 = store.get(bi.w1).data();
        for (r, s) in bi.score(&bilinear, &hp, &ha).unwrap().iter().enumerate() {
            let mut expected = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    expected += hp[i] * w1[r * 16 + i * 4 + j] * ha[j];
                }
            }
            assert!((s - expected).abs() < 1e-14);
        }

        // Linear only.
        let mut linear = store.clone();
        linear.get_mut(bi.w1).fill(0.0);
        let w2 = store.get(bi.w2).data();
        let cat: Vec<f64> = hp.iter().chain(&ha).copied().collect();
        for (r, s) in bi.score(&linear, &hp, &ha).unwrap().iter().enumerate() {
            let expected = super::dot(&w2[r * 8..(r + 1) * 8], &cat) + [0.5, -1.0, 2.0][r];
            assert!((s - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let d = rng.gen_range(1..12);
            let l = rng.gen_range(1..6);
            let mut store = ParamStore::new();
            let bi = Biaffine::init(&mut store, "bi", d, l, &mut rng);
            store
                .get_mut(bi.b)
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let hp: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let ha: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fast = bi.score(&store, &hp, &ha).unwrap();
            for (a, b) in fast.iter().zip(naive(&store, &bi, &hp, &ha)) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (d, l) = (3, 2);
        let mut store = ParamStore::new();
        let head = ReluLayer::init(&mut store, "head", 4, d, &mut rng);
        let bi = Biaffine::init(&mut store, "bi", d, l, &mut rng);
        let xp: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xas: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let weights: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let loss = |s: &ParamStore| {
            let hp = head.forward(s, &xp);
            let has: Vec<Vec<f64>> = xas.iter().map(|x| head.forward(s, x)).collect();
            let (scores, _) = bi.score_many(s, &hp, &has);
            scores
                .iter()
                .zip(&weights)
                .map(|(s, w)| dot(s, w))
                .sum::<f64>()
        };
        let hp = head.forward(&store, &xp);
        let has: Vec<Vec<f64>> = xas.iter().map(|x| head.forward(&store, x)).collect();
        let (_, cache) = bi.score_many(&store, &hp, &has);
        let mut grads = store.zero_grads();
        let mut dhp = vec![0.0; d];
        let mut dhas = vec![vec![0.0; d]; 3];
        bi.backward_many(
            &store, &cache, &hp, &has, &weights, &mut dhp, &mut dhas, &mut grads,
        );
        let mut sink = vec![0.0; 4];
        head.backward(&store, &xp, &hp, &dhp, &mut sink, &mut grads);
        for ((x, y), dy) in xas.iter().zip(&has).zip(&dhas) {
            head.backward(&store, x, y, dy, &mut sink, &mut grads);
        }
        let eps = 1e-6;
        for id in store.ids().collect::<Vec<_>>() {
            for k in 0..store.get(id).len() {
                let mut s = store.clone();
                s.get_mut(id).data_mut()[k] += eps;
                let up = loss(&s);
                s.get_mut(id).data_mut()[k] -= 2.0 * eps;
                let num = (up - loss(&s)) / (2.0 * eps);
                let ana = grads.get(id).data()[k];
                assert!(
                    (num - ana).abs() < 1e-7,
                    "{}[{k}] {num} vs {ana}",
                    store.param(id).name
                );
            }
        }
    }
}
