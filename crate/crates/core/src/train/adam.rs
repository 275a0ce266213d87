use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Parameter;
use crate::tensor::Element;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers for one parameter list, matched by position.
#[derive(Clone, Debug)]
pub struct Adam<T: Element> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Element> Adam<T> {
    pub fn new(config: AdamConfig, params: &[&Parameter<T>]) -> Self {
        let zeros = || params.iter().map(|p| vec![T::zero(); p.tensor.numel()]).collect();
        Adam {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one bias-corrected update using each parameter's accumulated
    /// gradient. The parameters come back as fresh leaves without gradients.
    pub fn step(&mut self, params: Vec<&mut Parameter<T>>) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::contract(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        // Check everything first so a failure leaves the model untouched.
        let grads: Vec<Vec<T>> = params
            .iter()
            .map(|p| {
                p.tensor
                    .grad_vec()
                    .ok_or_else(|| Error::contract(format!("parameter `{}` has no gradient", p.name)))
            })
            .collect::<Result<_>>()?;
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::lit(1.0 - c.beta1.powi(t));
        let bc2 = T::lit(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let mut data = p.tensor.data().to_vec();
            for i in 0..data.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] = data[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.set(data)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops::{mul, sum};
    use crate::tensor::Shape;

    fn scalar_param(v: f64) -> Parameter<f64> {
        Parameter::new("theta", Shape::scalar(), vec![v]).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        for g in [3.0, -0.25] {
            let mut p = scalar_param(1.0);
            let mut opt = Adam::new(AdamConfig::default(), &[&p]);
            // loss = g·θ
            let loss = sum(&crate::tensor::ops::scale(&p.tensor, g));
            loss.backward().unwrap();
            opt.step(vec![&mut p]).unwrap();
            let moved = p.tensor.item() - 1.0;
            assert!((moved + 1e-4 * g.signum()).abs() < 1e-9, "moved {moved}");
        }
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = scalar_param(0.7);
        let mut opt = Adam::new(AdamConfig::default(), &[&p]);
        sum(&crate::tensor::ops::scale(&p.tensor, 0.0)).backward().unwrap();
        opt.step(vec![&mut p]).unwrap();
        assert_eq!(p.tensor.item(), 0.7);
    }

    #[test]
    fn quadratic_descent_is_monotone() {
        let mut p = scalar_param(1.0);
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(cfg, &[&p]);
        let mut last = 1.0f64;
        for _ in 0..10 {
            sum(&mul(&p.tensor, &p.tensor).unwrap()).backward().unwrap();
            opt.step(vec![&mut p]).unwrap();
            let now = p.tensor.item().abs();
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn missing_gradient_is_a_contract_error() {
        let mut p = scalar_param(1.0);
        let mut opt = Adam::new(AdamConfig::default(), &[&p]);
        assert!(matches!(opt.step(vec![&mut p]), Err(Error::Contract(_))));
        assert_eq!(opt.steps(), 0);
    }
}
