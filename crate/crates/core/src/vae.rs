//! Beta-VAE: relu MLP encoder trunk with separate affine `mu` / `logvar`
//! heads, reparameterized sampling, a relu decoder with linear output, the
//! weighted reconstruction + KL objective and its Adam training loop.
//!
//! The objective is minimized per sample as
//!
//! ```text
//! ||x - xhat||^2 / (2c) + beta * KL(N(mu, diag(exp(logvar))) || N(0, I))
//! ```
//!
//! summed over input and latent dimensions and averaged over the batch.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{check_training_windows, SignalWindow};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, DenseGrad, DenseLayer, Mlp, MlpGrads, MlpSpec};
use crate::rng::{stream_rng, streams};

pub const WINDOW_LEN: usize = 256;
/// Initial posterior log-variance.
pub const LOGVAR_INIT: f64 = -4.0;
pub const LATENT_DIM: usize = 5;
pub const ENCODER_SIZES: [usize; 4] = [256, 128, 32, 8];

/// Encoder ladder (input first) and latent width. The decoder mirrors the
/// ladder starting from the latent layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeArch {
    pub encoder_sizes: Vec<usize>,
    pub latent_dim: usize,
}

impl Default for VaeArch {
    fn default() -> Self {
        Self {
            encoder_sizes: ENCODER_SIZES.to_vec(),
            latent_dim: LATENT_DIM,
        }
    }
}

impl VaeArch {
    pub fn new(encoder_sizes: Vec<usize>, latent_dim: usize) -> Result<Self> {
        let arch = Self {
            encoder_sizes,
            latent_dim,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_sizes.len() < 2 || self.encoder_sizes.contains(&0) || self.latent_dim == 0 {
            return Err(Error::Architecture(format!(
                "invalid ladder {:?} with latent {}",
                self.encoder_sizes, self.latent_dim
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder_sizes[0]
    }

    pub fn trunk_dim(&self) -> usize {
        *self.encoder_sizes.last().unwrap()
    }

    pub fn trunk_spec(&self) -> Result<MlpSpec> {
        MlpSpec::relu_with_last(self.encoder_sizes.clone(), Activation::Relu)
    }

    pub fn decoder_sizes(&self) -> Vec<usize> {
        std::iter::once(self.latent_dim)
            .chain(self.encoder_sizes.iter().rev().copied())
            .collect()
    }

    pub fn decoder_spec(&self) -> Result<MlpSpec> {
        MlpSpec::relu_with_last(self.decoder_sizes(), Activation::Identity)
    }

    /// Number of scalars in the flattened parameter vector.
    pub fn param_count(&self) -> usize {
        let ladder = |s: &[usize]| s.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>();
        let head = self.trunk_dim() * self.latent_dim + self.latent_dim;
        ladder(&self.encoder_sizes) + 2 * head + ladder(&self.decoder_sizes())
    }
}

/// Gaussian posterior parameters for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl LatentCode {
    pub fn new(mu: Vec<f64>, logvar: Vec<f64>) -> Result<Self> {
        if mu.len() != logvar.len() {
            return Err(Error::shape("latent code", mu.len(), logvar.len()));
        }
        if mu.iter().chain(&logvar).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent code"));
        }
        Ok(Self { mu, logvar })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Closed-form `KL(N(mu, diag(exp(logvar))) || N(0, I))`.
pub fn kl_divergence(code: &LatentCode) -> f64 {
    0.5 * code
        .mu
        .iter()
        .zip(&code.logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// `z = mu + exp(logvar / 2) * eps`.
pub fn reparameterize(code: &LatentCode, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != code.dim() {
        return Err(Error::shape("reparameterize eps", code.dim(), eps.len()));
    }
    Ok(code
        .mu
        .iter()
        .zip(&code.logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

pub fn vae_loss(x: &[f64], xhat: &[f64], code: &LatentCode, beta: f64, c: f64) -> Result<LossTerms> {
    if x.len() != xhat.len() {
        return Err(Error::shape("reconstruction", x.len(), xhat.len()));
    }
    if beta < 0.0 || c <= 0.0 {
        return Err(Error::InvalidConfig(format!("beta {beta} / c {c} out of range")));
    }
    let recon = x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * c);
    let kl = kl_divergence(code);
    Ok(LossTerms {
        total: recon + beta * kl,
        recon,
        kl,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeParams {
    arch: VaeArch,
    trunk: Mlp,
    mu_head: DenseLayer,
    logvar_head: DenseLayer,
    decoder: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeGrads {
    pub trunk: MlpGrads,
    pub mu_head: DenseGrad,
    pub logvar_head: DenseGrad,
    pub decoder: MlpGrads,
}

impl VaeGrads {
    pub fn zeros_like(params: &VaeParams) -> Self {
        Self {
            trunk: MlpGrads::zeros_like(&params.trunk),
            mu_head: DenseGrad::zeros_like(&params.mu_head),
            logvar_head: DenseGrad::zeros_like(&params.logvar_head),
            decoder: MlpGrads::zeros_like(&params.decoder),
        }
    }

    /// Same order as [`VaeParams::param_slices`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.slices();
        out.extend([
            self.mu_head.weights.as_slice(),
            self.mu_head.bias.as_slice(),
            self.logvar_head.weights.as_slice(),
            self.logvar_head.bias.as_slice(),
        ]);
        out.extend(self.decoder.slices());
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    fn scale(&mut self, s: f64) {
        self.trunk.scale(s);
        self.mu_head.scale(s);
        self.logvar_head.scale(s);
        self.decoder.scale(s);
    }
}

impl VaeParams {
    /// Trunk and decoder use the fan-based uniform init of `DenseLayer::init`.
    /// The `mu` head starts at zero and the `logvar` head at the constant
    /// `LOGVAR_INIT`, so every input first maps to a narrow posterior at the
    /// prior mean and the KL term cannot prune trunk units before the decoder
    /// has anything to ask of them.
    pub fn init(arch: VaeArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = stream_rng(seed, streams::INIT, 0);
        let trunk = Mlp::init(arch.trunk_spec()?, &mut rng);
        let mu_head = DenseLayer::zeros(arch.trunk_dim(), arch.latent_dim);
        let mut logvar_head = DenseLayer::zeros(arch.trunk_dim(), arch.latent_dim);
        logvar_head.bias_mut().fill(LOGVAR_INIT);
        let decoder = Mlp::init(arch.decoder_spec()?, &mut rng);
        Ok(Self {
            arch,
            trunk,
            mu_head,
            logvar_head,
            decoder,
        })
    }

    pub fn from_parts(
        arch: VaeArch,
        trunk: Mlp,
        mu_head: DenseLayer,
        logvar_head: DenseLayer,
        decoder: Mlp,
    ) -> Result<Self> {
        arch.validate()?;
        let bad = |what: &str| Err(Error::Architecture(format!("{what} does not match {arch:?}")));
        if trunk.spec() != &arch.trunk_spec()? {
            return bad("encoder trunk");
        }
        if decoder.spec() != &arch.decoder_spec()? {
            return bad("decoder");
        }
        for head in [&mu_head, &logvar_head] {
            if head.in_dim() != arch.trunk_dim() || head.out_dim() != arch.latent_dim {
                return bad("latent head");
            }
        }
        Ok(Self {
            arch,
            trunk,
            mu_head,
            logvar_head,
            decoder,
        })
    }

    /// Rebuilds parameters from a flat vector laid out as in [`Self::param_slices`].
    pub fn from_flat(arch: VaeArch, flat: &[f64]) -> Result<Self> {
        if flat.len() != arch.param_count() {
            return Err(Error::Architecture(format!(
                "{} parameters for an architecture needing {}",
                flat.len(),
                arch.param_count()
            )));
        }
        let mut params = Self::init(arch, 0)?;
        let mut rest = flat;
        for slot in params.param_slices_mut() {
            let (head, tail) = rest.split_at(slot.len());
            slot.copy_from_slice(head);
            rest = tail;
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("VAE parameters"));
        }
        Ok(params)
    }

    pub fn arch(&self) -> &VaeArch {
        &self.arch
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn mu_head(&self) -> &DenseLayer {
        &self.mu_head
    }

    pub fn mu_head_mut(&mut self) -> &mut DenseLayer {
        &mut self.mu_head
    }

    pub fn logvar_head_mut(&mut self) -> &mut DenseLayer {
        &mut self.logvar_head
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn decoder_mut(&mut self) -> &mut Mlp {
        &mut self.decoder
    }

    /// Fixed parameter order: trunk layers (weights, bias), mu head,
    /// logvar head, decoder layers.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.param_slices();
        out.extend([
            self.mu_head.weights(),
            self.mu_head.bias(),
            self.logvar_head.weights(),
            self.logvar_head.bias(),
        ]);
        out.extend(self.decoder.param_slices());
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.param_slices_mut();
        out.extend(self.mu_head.params_mut());
        out.extend(self.logvar_head.params_mut());
        out.extend(self.decoder.param_slices_mut());
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn encode(&self, x: &[f64]) -> Result<LatentCode> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder input"));
        }
        let h = self.trunk.output(x)?;
        Ok(LatentCode {
            mu: self.mu_head.forward(&h)?,
            logvar: self.logvar_head.forward(&h)?,
        })
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.output(z)
    }

    /// Loss and parameter gradient for one sample with a fixed noise draw.
    pub fn loss_and_grad(&self, x: &[f64], eps: &[f64], beta: f64, c: f64) -> Result<(LossTerms, VaeGrads)> {
        let mut grads = VaeGrads::zeros_like(self);
        let terms = self.accumulate_grad(x, eps, beta, c, &mut grads)?;
        Ok((terms, grads))
    }

    /// Loss for one sample with a fixed noise draw.
    pub fn sample_loss(&self, x: &[f64], eps: &[f64], beta: f64, c: f64) -> Result<LossTerms> {
        let code = self.encode(x)?;
        let z = reparameterize(&code, eps)?;
        let xhat = self.decode(&z)?;
        vae_loss(x, &xhat, &code, beta, c)
    }

    fn accumulate_grad(
        &self,
        x: &[f64],
        eps: &[f64],
        beta: f64,
        c: f64,
        grads: &mut VaeGrads,
    ) -> Result<LossTerms> {
        let trunk_trace = self.trunk.forward(x)?;
        let h = trunk_trace.output();
        let code = LatentCode {
            mu: self.mu_head.forward(h)?,
            logvar: self.logvar_head.forward(h)?,
        };
        let z = reparameterize(&code, eps)?;
        let dec_trace = self.decoder.forward(&z)?;
        let xhat = dec_trace.output();
        let terms = vae_loss(x, xhat, &code, beta, c)?;

        let d_xhat: Vec<f64> = xhat.iter().zip(x).map(|(a, b)| (a - b) / c).collect();
        let d_z = self.decoder.backward_accumulate(&dec_trace, &d_xhat, &mut grads.decoder)?;

        let mut d_mu = Vec::with_capacity(z.len());
        let mut d_logvar = Vec::with_capacity(z.len());
        for i in 0..z.len() {
            let (m, lv) = (code.mu[i], code.logvar[i]);
            let sigma = (0.5 * lv).exp();
            d_mu.push(d_z[i] + beta * m);
            d_logvar.push(d_z[i] * eps[i] * 0.5 * sigma + beta * 0.5 * (lv.exp() - 1.0));
        }
        let dh_mu = self.mu_head.backward_accumulate(h, &d_mu, &mut grads.mu_head);
        let dh_lv = self.logvar_head.backward_accumulate(h, &d_logvar, &mut grads.logvar_head);
        let d_h: Vec<f64> = dh_mu.iter().zip(&dh_lv).map(|(a, b)| a + b).collect();
        self.trunk.backward_accumulate(&trunk_trace, &d_h, &mut grads.trunk)?;
        Ok(terms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub c: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 5e-4,
            beta: 20.0,
            c: 1.0,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let problem = if self.epochs == 0 {
            Some("epochs must be >= 1")
        } else if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            Some("learning_rate must be > 0")
        } else if !(self.beta >= 0.0 && self.beta.is_finite()) {
            Some("beta must be >= 0")
        } else if !(self.c > 0.0 && self.c.is_finite()) {
            Some("c must be > 0")
        } else if self.batch_size == 0 {
            Some("batch_size must be >= 1")
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::InvalidConfig(p.into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn first(&self) -> Option<&EpochRecord> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,total,recon,kl\n");
        for (i, e) in self.epochs.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i + 1, e.total, e.recon, e.kl));
        }
        out
    }
}

/// Sample visiting order for one epoch.
pub(crate) fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, streams::SHUFFLE, epoch as u64));
    order
}

/// Trains the standard 256-input architecture.
pub fn train(windows: &[SignalWindow], config: &TrainConfig) -> Result<(VaeParams, TrainHistory)> {
    train_with_arch(windows, VaeArch::default(), config)
}

pub fn train_with_arch(
    windows: &[SignalWindow],
    arch: VaeArch,
    config: &TrainConfig,
) -> Result<(VaeParams, TrainHistory)> {
    config.validate()?;
    check_training_windows(windows, arch.input_dim())?;

    let mut params = VaeParams::init(arch, config.seed)?;
    let shapes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
    let mut adam = AdamState::new(&shapes);
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);
    let latent = params.arch.latent_dim;
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        let order = epoch_order(windows.len(), config.seed, epoch);
        let mut eps_rng = stream_rng(config.seed, streams::EPS, epoch as u64);
        let mut sums = LossTerms::default();
        let mut eps = vec![0.0; latent];
        for batch in order.chunks(config.batch_size) {
            let mut grads = VaeGrads::zeros_like(&params);
            for &idx in batch {
                for e in eps.iter_mut() {
                    *e = StandardNormal.sample(&mut eps_rng);
                }
                let t = params.accumulate_grad(&windows[idx].values, &eps, config.beta, config.c, &mut grads)?;
                sums.total += t.total;
                sums.recon += t.recon;
                sums.kl += t.kl;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params.param_slices_mut(), &grads.slices(), &adam_cfg)?;
        }
        let n = windows.len() as f64;
        let record = EpochRecord {
            total: sums.total / n,
            recon: sums.recon / n,
            kl: sums.kl / n,
        };
        if !(record.total.is_finite() && record.recon.is_finite() && record.kl.is_finite()) {
            return Err(Error::NonFinite("training loss"));
        }
        history.epochs.push(record);
    }
    Ok((params, history))
}
