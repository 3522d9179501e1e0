use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParameterStore};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step over every trainable parameter. Non-finite
/// gradients are rejected before anything is mutated.
pub fn adam_update(store: &mut ParameterStore, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    for id in store.ids() {
        if grads.get(id).iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("gradient of {}", store.info(id).name)));
        }
    }
    store.step += 1;
    let t = store.step as f64;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t);
    let ids: alloc::vec::Vec<_> = store.ids().collect();
    for id in ids {
        if !store.info(id).trainable {
            continue;
        }
        let i = id.index();
        let g = grads.get(id);
        for k in 0..g.len() {
            let m = &mut store.m[i][k];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g[k];
            let m_hat = *m / bc1;
            let v = &mut store.v[i][k];
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g[k] * g[k];
            let v_hat = *v / bc2;
            store.get_mut(id)[k] -= cfg.lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Init;

    fn one_param(x: f64) -> (ParameterStore, super::super::ParamId) {
        let mut s = ParameterStore::new(0);
        let id = s.add("w", &[1], Init::Constant(x));
        (s, id)
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        for g in [0.3, -2.0, 1e-3] {
            let (mut s, id) = one_param(1.0);
            let mut grads = s.zero_gradients();
            grads.get_mut(id)[0] = g;
            adam_update(&mut s, &grads, &cfg).unwrap();
            let delta = s.get(id)[0] - 1.0;
            let want = -cfg.lr * g / (g.abs() * (1.0 + cfg.eps / g.abs()));
            assert!((delta - want).abs() < 1e-15, "g={g}");
            assert!((delta + cfg.lr * g.signum()).abs() < 1e-7);
        }
        assert_eq!(one_param(0.0).0.step(), 0);
    }

    #[test]
    fn zero_grad_is_zero_delta() {
        let (mut s, id) = one_param(2.0);
        let grads = s.zero_gradients();
        adam_update(&mut s, &grads, &AdamConfig::default()).unwrap();
        assert_eq!(s.get(id)[0], 2.0);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn two_identical_steps_match_expansion() {
        let cfg = AdamConfig::default();
        let g = 0.5;
        let (mut s, id) = one_param(0.0);
        let mut grads = s.zero_gradients();
        grads.get_mut(id)[0] = g;
        adam_update(&mut s, &grads, &cfg).unwrap();
        adam_update(&mut s, &grads, &cfg).unwrap();
        // m2 = (1-b1)(1+b1) g, v2 = (1-b2)(1+b2) g^2; bias corrections cancel
        // to m_hat = g and v_hat = g^2 at both steps.
        let m2 = (1.0 - cfg.beta1) * (1.0 + cfg.beta1) * g;
        let v2 = (1.0 - cfg.beta2) * (1.0 + cfg.beta2) * g * g;
        let m_hat = m2 / (1.0 - cfg.beta1 * cfg.beta1);
        let v_hat = v2 / (1.0 - cfg.beta2 * cfg.beta2);
        let step1 = cfg.lr * g / (g.abs() + cfg.eps);
        let step2 = cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        assert!((s.get(id)[0] + step1 + step2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_grads_leave_params_untouched() {
        let (mut s, id) = one_param(1.0);
        let mut grads = s.zero_gradients();
        grads.get_mut(id)[0] = f64::NAN;
        assert!(adam_update(&mut s, &grads, &AdamConfig::default()).is_err());
        assert_eq!(s.get(id)[0], 1.0);
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn fixed_arrays_are_not_updated() {
        let mut s = ParameterStore::new(0);
        let id = s.add_fixed("emb", &[2], alloc::vec![1.0, 2.0]);
        let mut grads = s.zero_gradients();
        grads.get_mut(id).copy_from_slice(&[1.0, 1.0]);
        adam_update(&mut s, &grads, &AdamConfig::default()).unwrap();
        assert_eq!(s.get(id), &[1.0, 2.0]);
    }
}
