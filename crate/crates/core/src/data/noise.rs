use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

use super::SignalWindow;

/// Mean of squared values.
pub fn signal_power(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64
}

/// `P / 10^(snr_db / 10)`.
pub fn awgn_noise_variance(power: f64, snr_db: f64) -> f64 {
    power / 10f64.powf(snr_db / 10.0)
}

/// Adds white Gaussian noise at the requested SNR relative to the window's
/// own power.
pub fn add_awgn(window: &SignalWindow, snr_db: f64, seed: u64) -> Result<SignalWindow> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("SNR {snr_db} dB is not finite")));
    }
    let power = signal_power(&window.values);
    if power == 0.0 {
        return Err(Error::Data("cannot add noise at a fixed SNR to an all-zero window".into()));
    }
    let sigma = awgn_noise_variance(power, snr_db).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = stream_rng(seed, streams::NOISE, 0);
    let values = window.values.iter().map(|v| v + normal.sample(&mut rng)).collect();
    Ok(SignalWindow {
        values,
        ..window.clone()
    })
}
