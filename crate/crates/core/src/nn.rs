//! Dense-network numerics shared by the VAE and the baselines.
//!
//! Everything runs in `f64`. Weights are stored row-major with shape
//! `(out_dim, in_dim)`. Gradients are plain buffers with the same layout, so
//! the optimizer can walk parameters and gradients as parallel slices.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: &mut [f64]) {
        if self == Activation::Relu {
            for v in x {
                // relu'(0) is taken as 0, so exact zeros stay zeros on the way back.
                if *v <= 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig("layer dims must be > 0".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::shape("dense weights", in_dim * out_dim, weights.len()));
        }
        if bias.len() != out_dim {
            return Err(Error::shape("dense bias", out_dim, bias.len()));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense layer parameters"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform init with limit `sqrt(6 / fan_in)` for relu layers and
    /// `sqrt(6 / (fan_in + fan_out))` otherwise. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            Activation::Identity => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite init limit");
        let weights = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Weights and bias, mutably, in that order.
    pub fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }

    /// `W x + b`.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return Err(Error::shape("dense input", self.in_dim, input.len()));
        }
        let mut out = vec![0.0; self.out_dim];
        self.forward_into(input, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.in_dim))
            .zip(&self.bias)
        {
            *o = dot(row, input) + b;
        }
    }

    /// Accumulates parameter gradients for one sample and returns the
    /// gradient with respect to the layer input.
    pub(crate) fn backward_accumulate(
        &self,
        input: &[f64],
        delta: &[f64],
        grad: &mut DenseGrad,
    ) -> Vec<f64> {
        let mut input_grad = vec![0.0; self.in_dim];
        for (((d, row), grow), gb) in delta
            .iter()
            .zip(self.weights.chunks_exact(self.in_dim))
            .zip(grad.weights.chunks_exact_mut(self.in_dim))
            .zip(grad.bias.iter_mut())
        {
            if *d == 0.0 {
                continue;
            }
            *gb += d;
            for ((gw, x), (ig, w)) in grow.iter_mut().zip(input).zip(input_grad.iter_mut().zip(row)) {
                *gw += d * x;
                *ig += d * w;
            }
        }
        input_grad
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| *g *= s);
    }
}

/// Layer ladder and per-layer activations of an MLP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig("an MLP needs at least two layer sizes".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::shape(
                "mlp activations",
                layer_sizes.len() - 1,
                activations.len(),
            ));
        }
        Ok(Self {
            layer_sizes,
            activations,
        })
    }

    /// Relu everywhere except the last layer, which uses `last`.
    pub fn relu_with_last(layer_sizes: Vec<usize>, last: Activation) -> Result<Self> {
        let n = layer_sizes.len().saturating_sub(1);
        let activations = (0..n)
            .map(|i| if i + 1 == n { last } else { Activation::Relu })
            .collect();
        Self::new(layer_sizes, activations)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.activations.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<DenseLayer>,
}

/// Activations recorded by [`Mlp::forward`]: the input followed by the
/// post-activation output of every layer.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn activations(&self) -> &[Vec<f64>] {
        &self.activations
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrad>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp.layers.iter().map(DenseGrad::zeros_like).collect(),
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.layers.iter_mut().for_each(|g| g.scale(s));
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
            .collect()
    }
}

impl Mlp {
    pub fn from_layers(spec: MlpSpec, layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.len() != spec.num_layers() {
            return Err(Error::shape("mlp layer count", spec.num_layers(), layers.len()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != spec.layer_sizes[i] {
                return Err(Error::shape("mlp layer input", spec.layer_sizes[i], layer.in_dim));
            }
            if layer.out_dim != spec.layer_sizes[i + 1] {
                return Err(Error::shape(
                    "mlp layer output",
                    spec.layer_sizes[i + 1],
                    layer.out_dim,
                ));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let layers = spec
            .layer_sizes
            .windows(2)
            .zip(&spec.activations)
            .map(|(w, &act)| DenseLayer::init(w[0], w[1], act, rng))
            .collect();
        Self { spec, layers }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn forward(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.spec.input_dim() {
            return Err(Error::shape("mlp input", self.spec.input_dim(), input.len()));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (layer, &act) in self.layers.iter().zip(&self.spec.activations) {
            let mut out = vec![0.0; layer.out_dim];
            layer.forward_into(activations.last().unwrap(), &mut out);
            act.apply(&mut out);
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Final output only.
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.activations.pop().unwrap())
    }

    /// Gradients of a scalar loss whose derivative with respect to the
    /// network output is `output_grad`.
    pub fn backward(&self, trace: &Trace, output_grad: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let input_grad = self.backward_accumulate(trace, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`Mlp::backward`] but adds into existing gradient buffers.
    pub fn backward_accumulate(
        &self,
        trace: &Trace,
        output_grad: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(Error::shape(
                "mlp trace",
                self.layers.len() + 1,
                trace.activations.len(),
            ));
        }
        if output_grad.len() != self.spec.output_dim() {
            return Err(Error::shape(
                "mlp output gradient",
                self.spec.output_dim(),
                output_grad.len(),
            ));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape("mlp gradient buffers", self.layers.len(), grads.layers.len()));
        }
        let mut delta = output_grad.to_vec();
        for i in (0..self.layers.len()).rev() {
            let out = &trace.activations[i + 1];
            if out.len() != delta.len() {
                return Err(Error::shape("mlp trace activation", delta.len(), out.len()));
            }
            if self.spec.activations[i] == Activation::Relu {
                for (d, &a) in delta.iter_mut().zip(out) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = self.layers[i].backward_accumulate(&trace.activations[i], &delta, &mut grads.layers[i]);
        }
        Ok(delta)
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad Adam settings {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        config: &AdamConfig,
    ) -> Result<()> {
        config.validate()?;
        if params.len() != self.m.len() {
            return Err(Error::shape("adam parameter tensors", self.m.len(), params.len()));
        }
        if grads.len() != params.len() {
            return Err(Error::shape("adam gradient tensors", params.len(), grads.len()));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() {
                return Err(Error::shape("adam parameter tensor", m.len(), p.len()));
            }
            if g.len() != m.len() {
                return Err(Error::shape("adam gradient tensor", m.len(), g.len()));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("gradient"));
            }
        }

        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
            }
        }
        Ok(())
    }
}

/// Central-difference gradient estimate `(f(p + h e_i) - f(p - h e_i)) / 2h`.
pub fn finite_difference_gradient<F>(mut loss: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = loss(&p);
            p[i] = orig - h;
            let minus = loss(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity2() -> DenseLayer {
        DenseLayer::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn dense_forward_examples() {
        assert_eq!(identity2().forward(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let l = DenseLayer::new(2, 1, vec![1.0, 1.0], vec![1.0]).unwrap();
        assert_eq!(l.forward(&[2.0, 3.0]).unwrap(), vec![6.0]);
        let l = DenseLayer::new(4, 3, vec![0.0; 12], vec![5.0; 3]).unwrap();
        assert_eq!(l.forward(&[1.0, -2.0, 3.0, 9.0]).unwrap(), vec![5.0; 3]);
    }

    #[test]
    fn dense_forward_rejects_bad_shape() {
        assert!(matches!(identity2().forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(DenseLayer::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(DenseLayer::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(relu(&[-2.0, 3.0]), vec![0.0, 3.0]);
        assert_eq!(relu(&[1e-9, -1e-9]), vec![1e-9, 0.0]);
    }

    #[test]
    fn mlp_forward_examples() {
        let spec = MlpSpec::new(vec![2, 2], vec![Activation::Identity]).unwrap();
        let mlp = Mlp::from_layers(spec, vec![identity2()]).unwrap();
        assert_eq!(mlp.output(&[0.7, -4.0]).unwrap(), vec![0.7, -4.0]);

        let spec = MlpSpec::new(vec![2, 1], vec![Activation::Relu]).unwrap();
        let layer = DenseLayer::new(2, 1, vec![1.0, 1.0], vec![0.0]).unwrap();
        let mlp = Mlp::from_layers(spec, vec![layer]).unwrap();
        assert_eq!(mlp.output(&[-1.0, -1.0]).unwrap(), vec![0.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec::relu_with_last(vec![256, 128, 32, 8], Activation::Relu).unwrap();
        let mlp = Mlp::init(spec, &mut rng);
        let trace = mlp.forward(&vec![0.5; 256]).unwrap();
        assert_eq!(trace.activations().len(), 4);
        assert_eq!(trace.output().len(), 8);
        assert!(mlp.forward(&[0.0; 3]).is_err());
    }

    #[test]
    fn mlp_spec_guards() {
        assert!(MlpSpec::new(vec![3], vec![]).is_err());
        assert!(MlpSpec::new(vec![3, 0], vec![Activation::Relu]).is_err());
        assert!(MlpSpec::new(vec![3, 2], vec![]).is_err());
        let spec = MlpSpec::new(vec![2, 3], vec![Activation::Relu]).unwrap();
        assert!(Mlp::from_layers(spec, vec![identity2()]).is_err());
    }

    #[test]
    fn mlp_backward_identity_and_zero() {
        let spec = MlpSpec::new(vec![2, 2], vec![Activation::Identity]).unwrap();
        let mlp = Mlp::from_layers(spec, vec![identity2()]).unwrap();
        let trace = mlp.forward(&[1.0, 2.0]).unwrap();
        let (_, gin) = mlp.backward(&trace, &[0.3, -0.2]).unwrap();
        assert_eq!(gin, vec![0.3, -0.2]);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = MlpSpec::relu_with_last(vec![4, 3, 2], Activation::Identity).unwrap();
        let mlp = Mlp::init(spec, &mut rng);
        let trace = mlp.forward(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        let (grads, gin) = mlp.backward(&trace, &[0.0, 0.0]).unwrap();
        assert!(gin.iter().all(|&g| g == 0.0));
        assert!(grads.slices().iter().all(|s| s.iter().all(|&g| g == 0.0)));
        assert!(mlp.backward(&trace, &[1.0]).is_err());
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = vec![1.5, -2.0];
        let mut state = AdamState::new(&[2]);
        state
            .step(&mut [p.as_mut_slice()], &[&[0.0, 0.0]], &AdamConfig::default())
            .unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = vec![0.0];
        let mut state = AdamState::new(&[1]);
        let cfg = AdamConfig::with_learning_rate(0.001);
        state.step(&mut [p.as_mut_slice()], &[&[1.0]], &cfg).unwrap();
        // m_hat = 1, v_hat = 1 after bias correction.
        assert!((p[0] + 0.001).abs() < 1e-10, "{}", p[0]);
    }

    #[test]
    fn adam_descends_scalar_quadratic() {
        let f = |x: f64| (x - 3.0) * (x - 3.0);
        let mut p = vec![0.0];
        let mut state = AdamState::new(&[1]);
        let cfg = AdamConfig::with_learning_rate(0.1);
        let start = f(p[0]);
        for _ in 0..2 {
            let g = 2.0 * (p[0] - 3.0);
            state.step(&mut [p.as_mut_slice()], &[&[g]], &cfg).unwrap();
        }
        assert!(f(p[0]) < start);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut p = vec![0.0, 0.0];
        let mut state = AdamState::new(&[2]);
        let err = state.step(&mut [p.as_mut_slice()], &[&[1.0, f64::INFINITY]], &AdamConfig::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(state.step_count(), 0);
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn finite_difference_examples() {
        let g = finite_difference_gradient(|p| p[0] * p[0], &[3.0], 1e-4);
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_difference_gradient(|_| 4.2, &[1.0, 2.0], 1e-4);
        assert!(g.iter().all(|v| v.abs() < 1e-9));
        let g = finite_difference_gradient(|p| p.iter().sum(), &[0.3, -1.0, 8.0], 1e-4);
        assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }
}
