//! Adam / AdamW over a `ParamStore`. Moment buffers are keyed by parameter
//! name; a step either applies to every parameter with a gradient or, on a
//! non-finite gradient, errors without touching anything.

use std::collections::BTreeMap;

use super::mlp::{NamedGrads, ParamStore};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub enum OptKind {
    Adam,
    /// Decoupled weight decay: p *= (1 - lr*wd) before the Adam update.
    AdamW { weight_decay: f64 },
}

pub struct Optimizer {
    pub kind: OptKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One update over every gradient in `grads`. Parameters without a
    /// gradient this step are left alone (their moments too).
    pub fn step(&mut self, store: &mut ParamStore, grads: &NamedGrads) -> Result<()> {
        for (name, g) in &grads.by_name {
            if !g.all_finite() {
                return Err(Error::Gradient(format!(
                    "non-finite gradient in {name}; step aborted"
                )));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, g) in &grads.by_name {
            let p = store.get_mut(name);
            let n = p.len();
            assert_eq!(g.len(), n, "gradient shape mismatch for {name}");
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let pd = p.data_mut();
            if let OptKind::AdamW { weight_decay } = self.kind {
                let shrink = 1.0 - self.lr * weight_decay;
                for x in pd.iter_mut() {
                    *x *= shrink;
                }
            }
            for i in 0..n {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                pd[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::mlp::NamedGrads;
    use super::super::tensor::Tensor;

    fn grads_of(name: &str, g: Tensor) -> NamedGrads {
        let mut by_name = BTreeMap::new();
        by_name.insert(name.to_string(), g);
        NamedGrads { by_name }
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        // With fresh moments, |update| = lr * g/ (|g| + eps') ~ lr * sign(g).
        let mut store = ParamStore::new();
        store.insert("p", Tensor::vector(vec![1.0]));
        let mut opt = Optimizer::new(OptKind::Adam, 0.01);
        opt.step(&mut store, &grads_of("p", Tensor::vector(vec![0.5])))
            .unwrap();
        let p = store.get("p").data()[0];
        assert!((p - (1.0 - 0.01)).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn adamw_decay_applies_with_zero_gradient() {
        // Zero gradient, wd=0.1, lr=0.01: p -> p * (1 - 0.001).
        let mut store = ParamStore::new();
        store.insert("p", Tensor::vector(vec![2.0]));
        let mut opt = Optimizer::new(OptKind::AdamW { weight_decay: 0.1 }, 0.01);
        opt.step(&mut store, &grads_of("p", Tensor::vector(vec![0.0])))
            .unwrap();
        let p = store.get("p").data()[0];
        assert!((p - 2.0 * 0.999).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn non_finite_gradient_leaves_params_untouched() {
        let mut store = ParamStore::new();
        store.insert("p", Tensor::vector(vec![1.0]));
        let mut opt = Optimizer::new(OptKind::Adam, 0.01);
        let res = opt.step(&mut store, &grads_of("p", Tensor::vector(vec![f64::NAN])));
        assert!(res.is_err());
        assert_eq!(store.get("p").data()[0], 1.0);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // Minimize (p - 3)^2; gradient 2(p-3).
        let mut store = ParamStore::new();
        store.insert("p", Tensor::vector(vec![0.0]));
        let mut opt = Optimizer::new(OptKind::Adam, 0.05);
        for _ in 0..2000 {
            let p = store.get("p").data()[0];
            let g = Tensor::vector(vec![2.0 * (p - 3.0)]);
            opt.step(&mut store, &grads_of("p", g)).unwrap();
        }
        assert!((store.get("p").data()[0] - 3.0).abs() < 1e-3);
    }
}
