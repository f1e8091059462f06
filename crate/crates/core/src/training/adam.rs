//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Result<Self> {
        let AdamConfig { beta1, beta2, eps } = config;
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
            return Err(param_err(format!("invalid Adam settings beta1={beta1} beta2={beta2} eps={eps}")));
        }
        Ok(AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0, config })
    }
}

/// One Adam update of `params` in place. A non-finite gradient aborts the
/// step and leaves both the state and the parameters untouched.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::Dimension { expected: state.m.len(), got: params.len() });
    }
    if grad.len() != params.len() {
        return Err(Error::Dimension { expected: params.len(), got: grad.len() });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NumericOverflow(format!("non-finite gradient entry {i}")));
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut s = AdamState::new(1, AdamConfig::default()).unwrap();
        let mut p = [1.0];
        adam_step(&mut s, &mut p, &[1.0], 0.1).unwrap();
        let delta = 1.0 - p[0];
        assert!((0.0999..=0.1).contains(&delta), "{delta}");
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = AdamState::new(3, AdamConfig::default()).unwrap();
        let mut p = [1.0, -2.0, 0.5];
        for _ in 0..100 {
            adam_step(&mut s, &mut p, &[0.0; 3], 0.1).unwrap();
        }
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = AdamState::new(2, AdamConfig::default()).unwrap();
        let mut p = [1.0, 1.0];
        let before = s.clone();
        assert!(matches!(adam_step(&mut s, &mut p, &[1.0, f64::NAN], 0.1), Err(Error::NumericOverflow(_))));
        assert_eq!(s, before);
        assert_eq!(p, [1.0, 1.0]);
        assert!(AdamState::new(1, AdamConfig { beta1: 1.0, ..AdamConfig::default() }).is_err());
    }

    proptest! {
        #[test]
        fn moves_against_moment_sign(grads in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 1..20)) {
            let mut s = AdamState::new(4, AdamConfig::default()).unwrap();
            let mut p = [0.0; 4];
            for g in &grads {
                let before = p;
                adam_step(&mut s, &mut p, g, 0.01).unwrap();
                for i in 0..4 {
                    let step = p[i] - before[i];
                    prop_assert!(step * s.m[i] <= 0.0);
                    prop_assert!(s.v[i] >= 0.0);
                }
            }
        }
    }
}
