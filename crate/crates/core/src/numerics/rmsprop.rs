use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    /// L2 penalty folded into the gradient before it is accumulated.
    pub weight_decay: f64,
    /// Denominator epsilon.
    pub smoothing: f64,
    /// Squared-gradient averaging constant.
    pub decay_rate: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            smoothing: 1e-8,
            decay_rate: 0.99,
        }
    }
}

/// RMSProp with one squared-gradient accumulator per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsPropState {
    pub config: RmsPropConfig,
    accumulators: Vec<Tensor>,
}

impl RmsPropState {
    pub fn new(config: RmsPropConfig, params: &ParamStore) -> Self {
        let accumulators = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        RmsPropState { config, accumulators }
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.accumulators
    }

    /// Applies one update and clears every gradient.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if self.accumulators.len() != params.len() {
            return Err(Error::Usage(format!(
                "optimizer tracks {} parameters, store has {}",
                self.accumulators.len(),
                params.len()
            )));
        }
        if let Some(p) = params.iter().find(|p| p.grad.is_none()) {
            return Err(Error::Usage(format!("parameter {} has no gradient", p.name)));
        }
        let RmsPropConfig {
            learning_rate: lr,
            weight_decay: wd,
            smoothing: eps,
            decay_rate: rho,
        } = self.config;
        for (p, acc) in params.iter_mut().zip(&mut self.accumulators) {
            let grad = p.grad.take().expect("checked above");
            if acc.shape() != p.value.shape() {
                return Err(Error::shape("rmsprop", acc.shape(), p.value.shape()));
            }
            let values = p.value.data_mut();
            for ((w, a), &g) in values.iter_mut().zip(acc.data_mut()).zip(grad.data()) {
                let g = g + wd * *w;
                *a = rho * *a + (1.0 - rho) * g * g;
                *w -= lr * g / (a.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        for (i, &v) in values.iter().enumerate() {
            s.register(format!("p{i}"), Tensor::scalar(v)).unwrap();
        }
        s
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut params = store(&[0.3, -1.2]);
        let cfg = RmsPropConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = RmsPropState::new(cfg, &params);
        for p in params.iter_mut() {
            p.grad = Some(Tensor::scalar(0.0));
        }
        opt.step(&mut params).unwrap();
        assert_eq!(params.value(crate::numerics::ParamId(0)).data(), &[0.3]);
        assert_eq!(params.value(crate::numerics::ParamId(1)).data(), &[-1.2]);
    }

    #[test]
    fn decay_alone_takes_a_bounded_step() {
        let mut params = store(&[2.0]);
        let mut opt = RmsPropState::new(RmsPropConfig::default(), &params);
        for _ in 0..100 {
            params.iter_mut().next().unwrap().grad = Some(Tensor::scalar(0.0));
            opt.step(&mut params).unwrap();
        }
        let w = params.iter().next().unwrap().value.data()[0];
        // each step is at most lr / sqrt(1 - rho) in magnitude
        assert!(w > 2.0 - 100.0 * 1e-2 && w < 2.0, "{w}");
    }

    #[test]
    fn single_scalar_hand_update() {
        let mut params = store(&[1.0]);
        let cfg = RmsPropConfig {
            learning_rate: 1e-3,
            weight_decay: 0.0,
            smoothing: 1e-8,
            decay_rate: 0.99,
        };
        let mut opt = RmsPropState::new(cfg, &params);
        params.iter_mut().next().unwrap().grad = Some(Tensor::scalar(1.0));
        opt.step(&mut params).unwrap();
        assert!((opt.accumulators()[0].data()[0] - 0.01).abs() < 1e-15);
        let w = params.iter().next().unwrap().value.data()[0];
        let expected_step = 1e-3 / (0.1 + 1e-8);
        assert!((1.0 - w - expected_step).abs() < 1e-15);
        assert!((1.0 - w - 9.99e-3).abs() < 1e-5);
        assert!(params.iter().all(|p| p.grad.is_none()));
    }

    #[test]
    fn missing_gradient_is_a_usage_error() {
        let mut params = store(&[1.0]);
        let mut opt = RmsPropState::new(RmsPropConfig::default(), &params);
        assert!(matches!(opt.step(&mut params), Err(Error::Usage(_))));
    }

    #[test]
    fn identical_parameters_stay_identical() {
        let mut params = store(&[0.7, 0.7]);
        let mut opt = RmsPropState::new(RmsPropConfig::default(), &params);
        for step in 0..50 {
            let g = ((step as f64) * 0.37).sin();
            for p in params.iter_mut() {
                p.grad = Some(Tensor::scalar(g));
            }
            opt.step(&mut params).unwrap();
        }
        let vals: Vec<f64> = params.iter().map(|p| p.value.data()[0]).collect();
        assert_eq!(vals[0].to_bits(), vals[1].to_bits());
    }

    #[test]
    fn accumulators_stay_non_negative() {
        let mut params = store(&[0.1, -0.4, 2.0]);
        let mut opt = RmsPropState::new(RmsPropConfig::default(), &params);
        for step in 0..20 {
            for (i, p) in params.iter_mut().enumerate() {
                p.grad = Some(Tensor::scalar((step * 3 + i) as f64 * -0.1));
            }
            opt.step(&mut params).unwrap();
        }
        assert!(opt.accumulators().iter().all(|a| a.data().iter().all(|&x| x >= 0.0)));
    }
}
