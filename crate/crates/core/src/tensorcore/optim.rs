use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
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
        Self {
            lr: 0.00025,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One named parameter with its Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

/// Gradients keyed by parameter name.
pub type GradMap<T> = BTreeMap<String, Tensor<T>>;

/// Named parameters in insertion order plus shared Adam step count.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, usize>,
    step: u64,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
            step: 0,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let shape = value.shape().to_vec();
        self.insert_with_state(name, value, Tensor::zeros(shape.clone()), Tensor::zeros(shape))
    }

    pub fn insert_with_state(
        &mut self,
        name: impl Into<String>,
        value: Tensor<T>,
        m: Tensor<T>,
        v: Tensor<T>,
    ) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Consistency(format!("duplicate parameter name {name:?}")));
        }
        if m.shape() != value.shape() || v.shape() != value.shape() {
            return Err(Error::Consistency(format!("moment shapes differ from parameter {name:?}")));
        }
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param { name, value, m, v });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| &self.params[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.index.get(name).map(|&i| &mut self.params[i].value)
    }

    /// Like [`Self::get`] but a missing name is an error.
    pub fn require(&self, name: &str) -> Result<&Tensor<T>> {
        self.get(name)
            .ok_or_else(|| Error::Consistency(format!("missing parameter {name:?}")))
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    m: p.m.cast(),
                    v: p.v.cast(),
                })
                .collect(),
            index: self.index.clone(),
            step: self.step,
        }
    }

    /// Bias-corrected Adam update of every parameter; the step count goes
    /// up by one per call. Every parameter needs a gradient of its shape.
    pub fn adam_step(&mut self, grads: &GradMap<T>, cfg: &AdamConfig) -> Result<()> {
        for p in &self.params {
            match grads.get(&p.name) {
                None => return Err(Error::Consistency(format!("no gradient for parameter {:?}", p.name))),
                Some(g) if g.shape() != p.value.shape() => {
                    return Err(Error::Consistency(format!(
                        "gradient for {:?} has shape {:?}, parameter has {:?}",
                        p.name,
                        g.shape(),
                        p.value.shape()
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = grads.keys().find(|k| !self.index.contains_key(*k)) {
            return Err(Error::Consistency(format!("gradient for unknown parameter {extra:?}")));
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = T::of(cfg.beta1);
        let b2 = T::of(cfg.beta2);
        let one = T::one();
        let corr1 = T::of(1.0 - cfg.beta1.powi(t));
        let corr2 = T::of(1.0 - cfg.beta2.powi(t));
        let lr = T::of(cfg.lr);
        let eps = T::of(cfg.eps);

        for p in &mut self.params {
            let g = grads[&p.name].data();
            let theta = p.value.data_mut();
            let m = p.m.data_mut();
            let v = p.v.data_mut();
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
