use crate::data::{check_training_windows, SignalWindow};
use crate::error::{Error, Result};
use crate::health::{distance, LatentEmbedding, Metric, ReferenceMean};
use crate::nn::{Activation, AdamConfig, AdamState, Mlp, MlpGrads, MlpSpec};
use crate::rng::{stream_rng, streams};
use crate::vae::{epoch_order, EpochRecord, TrainConfig, TrainHistory, VaeArch};

/// Deterministic autoencoder on the same ladder as the VAE: relu encoder
/// ending in a linear bottleneck, relu decoder with linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaAe {
    arch: VaeArch,
    encoder: Mlp,
    decoder: Mlp,
}

impl VanillaAe {
    pub fn init(arch: VaeArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut sizes = arch.encoder_sizes.clone();
        sizes.push(arch.latent_dim);
        let encoder_spec = MlpSpec::relu_with_last(sizes, Activation::Identity)?;
        let mut rng = stream_rng(seed, streams::INIT, 1);
        let encoder = Mlp::init(encoder_spec, &mut rng);
        let decoder = Mlp::init(arch.decoder_spec()?, &mut rng);
        Ok(Self { arch, encoder, decoder })
    }

    pub fn arch(&self) -> &VaeArch {
        &self.arch
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn bottleneck(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("autoencoder input"));
        }
        self.encoder.output(x)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.output(&self.bottleneck(x)?)
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.param_slices_mut();
        out.extend(self.decoder.param_slices_mut());
        out
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.encoder.param_slices();
        out.extend(self.decoder.param_slices());
        out
    }

    /// Adds the gradient of `||x - xhat||^2 / 2` and returns that loss.
    fn accumulate_grad(&self, x: &[f64], enc: &mut MlpGrads, dec: &mut MlpGrads) -> Result<f64> {
        let et = self.encoder.forward(x)?;
        let dt = self.decoder.forward(et.output())?;
        let diff: Vec<f64> = dt.output().iter().zip(x).map(|(a, b)| a - b).collect();
        let loss = 0.5 * diff.iter().map(|d| d * d).sum::<f64>();
        let dz = self.decoder.backward_accumulate(&dt, &diff, dec)?;
        self.encoder.backward_accumulate(&et, &dz, enc)?;
        Ok(loss)
    }
}

impl LatentEmbedding for VanillaAe {
    fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.bottleneck(x)
    }
}

/// Adam on the plain reconstruction loss with the batching and shuffling of
/// VAE training. `beta` and `c` in the config are not used.
pub fn ae_train(windows: &[SignalWindow], config: &TrainConfig) -> Result<(VanillaAe, TrainHistory)> {
    ae_train_with_arch(windows, VaeArch::default(), config)
}

pub fn ae_train_with_arch(
    windows: &[SignalWindow],
    arch: VaeArch,
    config: &TrainConfig,
) -> Result<(VanillaAe, TrainHistory)> {
    config.validate()?;
    check_training_windows(windows, arch.input_dim())?;
    let mut ae = VanillaAe::init(arch, config.seed)?;
    let shapes: Vec<usize> = ae.param_slices().iter().map(|s| s.len()).collect();
    let mut adam = AdamState::new(&shapes);
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        let order = epoch_order(windows.len(), config.seed, epoch);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut enc = MlpGrads::zeros_like(&ae.encoder);
            let mut dec = MlpGrads::zeros_like(&ae.decoder);
            for &i in batch {
                total += ae.accumulate_grad(&windows[i].values, &mut enc, &mut dec)?;
            }
            enc.scale(1.0 / batch.len() as f64);
            dec.scale(1.0 / batch.len() as f64);
            let mut grads = enc.slices();
            grads.extend(dec.slices());
            adam.step(&mut ae.param_slices_mut(), &grads, &adam_cfg)?;
        }
        let mean = total / windows.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("autoencoder training loss"));
        }
        history.epochs.push(EpochRecord {
            total: mean,
            recon: mean,
            kl: 0.0,
        });
    }
    Ok((ae, history))
}

pub fn ae_health_index(ae: &VanillaAe, window: &[f64], reference: &ReferenceMean, metric: Metric) -> Result<f64> {
    distance(&ae.bottleneck(window)?, &reference.0, metric)
}
