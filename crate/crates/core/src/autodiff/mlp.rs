//! MLP building blocks on top of the tape: named parameter store, Kaiming
//! init, a `Session` that binds parameters to tape leaves, and a no-grad
//! forward that shares kernels with the taped path bit for bit.

use std::collections::BTreeMap;

use super::tape::{NodeId, Tape};
use super::tensor::{add_row, layer_norm_rows, matmul, mish, mul_row, Tensor};
use crate::rng::Stream;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Mish,
    Tanh,
    Identity,
}

/// Fully-connected net: sizes[0] inputs through sizes[n-1] outputs.
/// `layer_norm[i]` inserts a pre-activation layer norm (with learned affine)
/// after hidden layer i.
#[derive(Clone, Debug)]
pub struct MlpSpec {
    pub sizes: Vec<usize>,
    pub hidden_act: Activation,
    pub output_act: Activation,
    pub layer_norm: Vec<bool>,
}

impl MlpSpec {
    pub fn new(sizes: Vec<usize>, hidden_act: Activation, output_act: Activation) -> Self {
        assert!(sizes.len() >= 2, "MLP needs at least input and output sizes");
        let hidden = sizes.len() - 2;
        MlpSpec {
            sizes,
            hidden_act,
            output_act,
            layer_norm: vec![false; hidden],
        }
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        for f in self.layer_norm.iter_mut() {
            *f = on;
        }
        self
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }
}

/// Named parameter tensors. BTreeMap keeps iteration (and thus checkpoints,
/// optimizer order, and gradient reductions) deterministic.
#[derive(Clone, Default, Debug)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, t: Tensor) {
        self.params.insert(name.to_string(), t);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn try_get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.keys().cloned().collect()
    }

    pub fn n_values(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    /// Kaiming-uniform init for an MLP under `prefix`. `final_scale` shrinks
    /// the last layer (policy heads start near zero output).
    pub fn init_mlp(&mut self, prefix: &str, spec: &MlpSpec, rng: &mut Stream, final_scale: f64) {
        for l in 0..spec.n_layers() {
            let (fan_in, fan_out) = (spec.sizes[l], spec.sizes[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let scale = if l + 1 == spec.n_layers() {
                final_scale
            } else {
                1.0
            };
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-bound, bound) * scale)
                .collect();
            // Weights stored [in, out] so forward is x * W without transposes.
            self.insert(&format!("{prefix}.w{l}"), Tensor::matrix(fan_in, fan_out, w));
            let bb = 1.0 / (fan_in as f64).sqrt();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.uniform(-bb, bb) * scale).collect();
            self.insert(&format!("{prefix}.b{l}"), Tensor::vector(b));
            if l < spec.layer_norm.len() && spec.layer_norm[l] {
                self.insert(&format!("{prefix}.ln_g{l}"), Tensor::vector(vec![1.0; fan_out]));
                self.insert(&format!("{prefix}.ln_b{l}"), Tensor::vector(vec![0.0; fan_out]));
            }
        }
    }
}

/// One forward/backward round: a tape plus the parameter leaves bound so far.
/// Parameters bind lazily by name; gradients come back keyed by name.
pub struct Session<'s> {
    pub tape: Tape,
    store: &'s ParamStore,
    bound: BTreeMap<String, NodeId>,
}

/// Gradients keyed by parameter name, plus raw node adjoints for inputs.
pub struct NamedGrads {
    pub by_name: BTreeMap<String, Tensor>,
}

impl<'s> Session<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Session {
            tape: Tape::new(),
            store,
            bound: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.bound.get(name) {
            return id;
        }
        let id = self.tape.leaf(self.store.get(name).clone(), true);
        self.bound.insert(name.to_string(), id);
        id
    }

    /// Input that wants a gradient (value guidance differentiates inputs).
    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.tape.leaf(t, true)
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.tape.constant(t)
    }

    /// Applies the MLP under `prefix` to x ([B, in] or [in]).
    pub fn mlp(&mut self, prefix: &str, spec: &MlpSpec, x: NodeId) -> NodeId {
        let mut h = x;
        for l in 0..spec.n_layers() {
            let w = self.param(&format!("{prefix}.w{l}"));
            let b = self.param(&format!("{prefix}.b{l}"));
            h = self.tape.matmul(h, w);
            h = self.tape.add_row(h, b);
            let last = l + 1 == spec.n_layers();
            if !last && l < spec.layer_norm.len() && spec.layer_norm[l] {
                let g = self.param(&format!("{prefix}.ln_g{l}"));
                let bb = self.param(&format!("{prefix}.ln_b{l}"));
                h = self.tape.layer_norm_rows(h);
                h = self.tape.mul_row(h, g);
                h = self.tape.add_row(h, bb);
            }
            let act = if last { spec.output_act } else { spec.hidden_act };
            h = match act {
                Activation::Relu => self.tape.relu(h),
                Activation::Mish => self.tape.mish(h),
                Activation::Tanh => self.tape.tanh(h),
                Activation::Identity => h,
            };
        }
        h
    }

    /// Reverse pass; returns parameter grads by name. Input grads can be read
    /// through `node_grad` on the returned raw gradients.
    pub fn backward(&self, root: NodeId) -> (NamedGrads, super::tape::Gradients) {
        let raw = self.tape.backward(root);
        let mut by_name = BTreeMap::new();
        for (name, &id) in &self.bound {
            if let Some(g) = raw.get(id) {
                by_name.insert(name.clone(), g.clone());
            } else {
                // Parameter bound but unused by the loss: zero gradient.
                by_name.insert(name.clone(), Tensor::zeros(self.store.get(name).shape().to_vec()));
            }
        }
        (NamedGrads { by_name }, raw)
    }
}

/// No-grad forward sharing the taped kernels exactly.
pub fn mlp_forward(store: &ParamStore, prefix: &str, spec: &MlpSpec, x: &Tensor) -> Tensor {
    let mut h = x.clone();
    for l in 0..spec.n_layers() {
        let w = store.get(&format!("{prefix}.w{l}"));
        let b = store.get(&format!("{prefix}.b{l}"));
        h = add_row(&matmul(&h, w), b);
        let last = l + 1 == spec.n_layers();
        if !last && l < spec.layer_norm.len() && spec.layer_norm[l] {
            h = layer_norm_rows(&h);
            h = mul_row(&h, store.get(&format!("{prefix}.ln_g{l}")));
            h = add_row(&h, store.get(&format!("{prefix}.ln_b{l}")));
        }
        let act = if last { spec.output_act } else { spec.hidden_act };
        h = match act {
            Activation::Relu => h.map(|v| v.max(0.0)),
            Activation::Mish => h.map(mish),
            Activation::Tanh => h.map(f64::tanh),
            Activation::Identity => h,
        };
    }
    h
}

/// Central finite-difference gradient of `f` with respect to one stored
/// parameter. Restores the store afterwards.
pub fn finite_diff_param_grad(
    store: &mut ParamStore,
    name: &str,
    h: f64,
    mut f: impl FnMut(&ParamStore) -> f64,
) -> Tensor {
    let n = store.get(name).len();
    let shape = store.get(name).shape().to_vec();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let orig = store.get(name).data()[i];
        store.get_mut(name).data_mut()[i] = orig + h;
        let up = f(store);
        store.get_mut(name).data_mut()[i] = orig - h;
        let dn = f(store);
        store.get_mut(name).data_mut()[i] = orig;
        out[i] = (up - dn) / (2.0 * h);
    }
    Tensor::from_vec(shape, out)
}

/// Central finite-difference gradient of `f` with respect to an input vector.
pub fn finite_diff_input_grad(x: &Tensor, h: f64, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut out = vec![0.0; x.len()];
    for i in 0..x.len() {
        let mut up = x.clone();
        up.data_mut()[i] += h;
        let mut dn = x.clone();
        dn.data_mut()[i] -= h;
        out[i] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    Tensor::from_vec(x.shape().to_vec(), out)
}

/// Relative error between analytic and numeric gradients, scaled by
/// max(1, |analytic|, |numeric|) so near-zero entries compare absolutely.
pub fn grad_rel_err(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Fails if any tensor entry is non-finite; used before optimizer steps.
pub fn check_finite(grads: &NamedGrads) -> Result<()> {
    for (name, g) in &grads.by_name {
        if !g.all_finite() {
            return Err(Error::Gradient(format!("non-finite gradient in {name}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_of(store: &ParamStore, spec: &MlpSpec, x: &Tensor, target: &Tensor) -> f64 {
        let y = mlp_forward(store, "net", spec, x);
        y.data()
            .iter()
            .zip(target.data())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            / y.len() as f64
    }

    fn taped_loss<'a>(
        sess: &mut Session<'a>,
        spec: &MlpSpec,
        x: NodeId,
        target: &Tensor,
    ) -> NodeId {
        let y = sess.mlp("net", spec, x);
        let t = sess.constant(target.clone());
        let d = sess.tape.sub(y, t);
        let sq = sess.tape.square(d);
        sess.tape.mean_all(sq)
    }

    #[test]
    fn taped_and_untaped_forward_agree_bitwise() {
        let mut rng = Stream::named(5, "init");
        let spec = MlpSpec::new(vec![4, 16, 3], Activation::Mish, Activation::Identity)
            .with_layer_norm(true);
        let mut store = ParamStore::new();
        store.init_mlp("net", &spec, &mut rng, 1.0);
        let x = Tensor::matrix(2, 4, (0..8).map(|i| (i as f64 * 0.7).sin()).collect());

        let fast = mlp_forward(&store, "net", &spec, &x);
        let mut sess = Session::new(&store);
        let xi = sess.constant(x.clone());
        let y = sess.mlp("net", &spec, xi);
        assert_eq!(fast.data(), sess.tape.value(y).data());
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = Stream::named(9, "init");
        let spec = MlpSpec::new(vec![3, 8, 8, 2], Activation::Tanh, Activation::Identity)
            .with_layer_norm(true);
        let mut store = ParamStore::new();
        store.init_mlp("net", &spec, &mut rng, 1.0);
        let x = Tensor::matrix(2, 3, vec![0.3, -0.2, 0.9, -0.5, 0.1, 0.4]);
        let target = Tensor::matrix(2, 2, vec![0.5, -0.1, 0.2, 0.7]);

        let mut sess = Session::new(&store);
        let xi = sess.input(x.clone());
        let loss = taped_loss(&mut sess, &spec, xi, &target);
        let (grads, raw) = sess.backward(loss);

        for name in store.names() {
            let num = finite_diff_param_grad(&mut store, &name, 1e-5, |s| {
                loss_of(s, &spec, &x, &target)
            });
            let err = grad_rel_err(&grads.by_name[&name], &num);
            assert!(err < 1e-6, "{name}: rel err {err}");
        }
        // Input gradient too.
        let gx = raw.get(xi).unwrap();
        let num = finite_diff_input_grad(&x, 1e-5, |xx| loss_of(&store, &spec, xx, &target));
        assert!(grad_rel_err(gx, &num) < 1e-6);
    }
}
