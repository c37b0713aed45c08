//! Adam with bias-corrected moment estimates.

use super::tensor::{Grads, ParamStore};
use super::NumericError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> AdamState {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One update. Frozen parameters keep their values and moments.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &Grads,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), NumericError> {
    grads.check_finite()?;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        if !params.param(id).trainable {
            continue;
        }
        let i = id.index();
        let g = grads.get(id).data();
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for ((w, &gk), (mk, vk)) in params
            .get_mut(id)
            .data_mut()
            .iter_mut()
            .zip(g)
            .zip(m.iter_mut().zip(v.iter_mut()))
        {
            *mk = cfg.beta1 * *mk + (1.0 - cfg.beta1) * gk;
            *vk = cfg.beta2 * *vk + (1.0 - cfg.beta2) * gk * gk;
            let m_hat = *mk / c1;
            let v_hat = *vk / c2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tensor;

    fn scalar(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("x", Tensor::new(vec![1], vec![x]).unwrap());
        s
    }

    fn grad_of(s: &ParamStore, g: f64) -> Grads {
        let mut grads = s.zero_grads();
        grads.get_mut(s.find("x").unwrap()).data_mut()[0] = g;
        grads
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut s = scalar(1.5);
        let mut st = AdamState::new(&s);
        let cfg = AdamConfig::default();
        let g = grad_of(&s, 2.0);
        adam_step(&mut s, &g, &mut st, &cfg).unwrap();
        let x = s.iter().next().unwrap().value.data()[0];
        let (m, v) = (st.m[0][0], st.v[0][0]);
        let g = grad_of(&s, 0.0);
        adam_step(&mut s, &g, &mut st, &cfg).unwrap();
        assert_eq!(st.m[0][0], 0.9 * m);
        assert_eq!(st.v[0][0], 0.999 * v);
        // With m != 0 the parameter still moves; with all-zero history it must not.
        let mut fresh = scalar(1.5);
        let mut st2 = AdamState::new(&fresh);
        let g = grad_of(&fresh, 0.0);
        adam_step(&mut fresh, &g, &mut st2, &cfg).unwrap();
        assert_eq!(fresh.iter().next().unwrap().value.data()[0], 1.5);
        assert_ne!(x, 1.5);
    }

    #[test]
    fn two_steps_match_hand_recursion() {
        let cfg = AdamConfig::default();
        let mut s = scalar(1.0);
        let mut st = AdamState::new(&s);
        let g = grad_of(&s, 0.5);
        adam_step(&mut s, &g, &mut st, &cfg).unwrap();
        let g = grad_of(&s, -0.25);
        adam_step(&mut s, &g, &mut st, &cfg).unwrap();

        let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 2e-3, 1e-8);
        let mut x = 1.0;
        let m1 = (1.0 - b1) * 0.5;
        let v1 = (1.0 - b2) * 0.25;
        x -= lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * -0.25;
        let v2 = b2 * v1 + (1.0 - b2) * 0.0625;
        x -= lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((s.iter().next().unwrap().value.data()[0] - x).abs() < 1e-15);
    }

    #[test]
    fn descends_a_quadratic_bowl() {
        let cfg = AdamConfig::default();
        let mut s = scalar(1.0);
        let mut st = AdamState::new(&s);
        let mut prev = 1.0f64;
        for _ in 0..100 {
            let x = s.iter().next().unwrap().value.data()[0];
            let g = grad_of(&s, 2.0 * x);
            adam_step(&mut s, &g, &mut st, &cfg).unwrap();
            let now = s.iter().next().unwrap().value.data()[0].abs();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut s = scalar(1.0);
        let mut st = AdamState::new(&s);
        let g = grad_of(&s, f64::INFINITY);
        let err = adam_step(&mut s, &g, &mut st, &AdamConfig::default());
        assert!(err.is_err());
        assert_eq!(st.t, 0);
    }

    #[test]
    fn frozen_parameters_do_not_move() {
        let mut s = scalar(1.0);
        let id = s.find("x").unwrap();
        s.set_trainable(id, false);
        let mut st = AdamState::new(&s);
        let g = grad_of(&s, 1.0);
        adam_step(&mut s, &g, &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(s.get(id).data()[0], 1.0);
    }
}
