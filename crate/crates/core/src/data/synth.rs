//! Synthetic bearing vibration.
//!
//! Every condition shares a unit-variance Gaussian noise floor plus three
//! low-amplitude shaft harmonics (2000 rpm at 20 kHz). Faults add trains of
//! exponentially decaying resonance bursts at a fault repetition period;
//! burst amplitude, burst rate and the broadband floor all grow with
//! severity. A scalar wear level interpolates between the
//! three profiles so run-to-failure sequences can ramp smoothly.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

use super::{Condition, FileRange, LabelPlan, RawRecording, SignalWindow, WindowSource, SAMPLE_RATE_HZ};

const SHAFT_HZ: f64 = 2000.0 / 60.0;
/// Samples between possible impacts (outer-race defect frequency near 235 Hz).
const DEFECT_PERIOD: f64 = 85.0;
/// The excited structural resonance sits on the 13th defect harmonic.
const RESONANCE_HARMONIC: f64 = 13.0;
const DECAY_SAMPLES: f64 = 200.0;
const FLOOR_DRIFT: f64 = 0.5;
const IMPACT_DRIFT: f64 = 0.25;
const WINDOW: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultProfile {
    pub noise_std: f64,
    pub harmonic_amps: [f64; 3],
    pub impulse_amp: f64,
    /// Fraction of defect passes that produce an impact.
    pub impulse_rate: f64,
}

impl FaultProfile {
    pub fn normal() -> Self {
        Self {
            noise_std: 1.0,
            harmonic_amps: [0.5, 0.3, 0.2],
            impulse_amp: 0.0,
            impulse_rate: 0.0,
        }
    }

    pub fn degraded() -> Self {
        Self {
            noise_std: 3.0,
            impulse_amp: 12.0,
            impulse_rate: 0.8,
            ..Self::normal()
        }
    }

    pub fn severe() -> Self {
        Self {
            noise_std: 4.0,
            harmonic_amps: [0.8, 0.5, 0.3],
            impulse_amp: 36.0,
            impulse_rate: 1.0,
        }
    }

    pub fn for_condition(condition: Condition) -> Self {
        match condition {
            Condition::Normal => Self::normal(),
            Condition::Degraded => Self::degraded(),
            Condition::Severe => Self::severe(),
        }
    }

    /// Wear 0 is normal, 1 degraded, 2 severe; linear in between and
    /// extrapolated past 2 (impact rate capped at 1).
    pub fn at_wear(wear: f64) -> Self {
        let wear = wear.max(0.0);
        let (a, b, t) = if wear <= 1.0 {
            (Self::normal(), Self::degraded(), wear)
        } else {
            (Self::degraded(), Self::severe(), wear - 1.0)
        };
        let lerp = |x: f64, y: f64| x + (y - x) * t;
        Self {
            noise_std: lerp(a.noise_std, b.noise_std),
            harmonic_amps: [
                lerp(a.harmonic_amps[0], b.harmonic_amps[0]),
                lerp(a.harmonic_amps[1], b.harmonic_amps[1]),
                lerp(a.harmonic_amps[2], b.harmonic_amps[2]),
            ],
            impulse_amp: lerp(a.impulse_amp, b.impulse_amp),
            impulse_rate: lerp(a.impulse_rate, b.impulse_rate).min(1.0),
        }
    }

    /// A continuous signal of `len` samples with random phases.
    pub fn signal<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        // Load and sensor gain drift moves the broadband floor between windows.
        let floor = self.noise_std * (1.0 + FLOOR_DRIFT * (2.0 * rng.random::<f64>() - 1.0));
        let noise = Normal::new(0.0, floor).expect("finite noise std");
        let mut x: Vec<f64> = (0..len).map(|_| noise.sample(rng)).collect();

        for (k, &amp) in self.harmonic_amps.iter().enumerate() {
            let phase = rng.random::<f64>() * 2.0 * PI;
            let w = 2.0 * PI * SHAFT_HZ * (k + 1) as f64 / SAMPLE_RATE_HZ;
            for (t, v) in x.iter_mut().enumerate() {
                *v += amp * (w * t as f64 + phase).sin();
            }
        }

        if self.impulse_amp > 0.0 && self.impulse_rate > 0.0 {
            let tail = (8.0 * DECAY_SAMPLES) as usize;
            let gain = self.impulse_amp * (1.0 + IMPACT_DRIFT * (2.0 * rng.random::<f64>() - 1.0));
            let wr = 2.0 * PI * RESONANCE_HARMONIC / DEFECT_PERIOD;
            // Bursts that started before the signal still ring into it.
            let mut t0 = -rng.random::<f64>() * DEFECT_PERIOD - (tail as f64 / DEFECT_PERIOD).floor() * DEFECT_PERIOD;
            while t0 < len as f64 {
                let hit = rng.random::<f64>() < self.impulse_rate;
                let jitter: f64 = StandardNormal.sample(rng);
                if hit {
                    let amp = gain * (1.0 + 0.1 * jitter);
                    let start = t0.ceil().max(0.0) as usize;
                    let stop = ((t0 + tail as f64).ceil().max(0.0) as usize).min(len);
                    for (t, v) in x.iter_mut().enumerate().take(stop).skip(start) {
                        let dt = t as f64 - t0;
                        *v += amp * (-dt / DECAY_SAMPLES).exp() * (wr * dt).sin();
                    }
                }
                t0 += DEFECT_PERIOD;
            }
        }
        x
    }
}

/// `n_windows` independent 256-sample windows of one condition.
pub fn synth_generate(condition: Condition, n_windows: usize, seed: u64) -> Result<Vec<SignalWindow>> {
    if n_windows == 0 {
        return Err(Error::InvalidConfig("n_windows must be >= 1".into()));
    }
    let profile = FaultProfile::for_condition(condition);
    let mut rng = stream_rng(seed, streams::SYNTH, condition as u64);
    Ok((0..n_windows)
        .map(|i| SignalWindow {
            values: profile.signal(WINDOW, &mut rng),
            label: Some(condition),
            source: WindowSource {
                file_index: 0,
                channel: 0,
                offset: i * WINDOW,
            },
        })
        .collect())
}

/// A synthetic run-to-failure sequence of single-channel recordings whose
/// wear level rises monotonically from file to file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRun {
    pub files: usize,
    pub windows_per_file: usize,
    pub seed: u64,
}

impl Default for SyntheticRun {
    fn default() -> Self {
        Self {
            files: 100,
            windows_per_file: 20,
            seed: 0,
        }
    }
}

// (position in run, wear) knots of the piecewise-linear wear curve.
const WEAR_KNOTS: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.35, 0.15),
    (0.45, 0.85),
    (0.75, 1.15),
    (0.82, 1.85),
    (1.0, 2.2),
];
const NORMAL_MAX_WEAR: f64 = 0.15;
const DEGRADED_WEAR: (f64, f64) = (0.85, 1.15);
const SEVERE_MIN_WEAR: f64 = 1.85;

impl SyntheticRun {
    pub fn validate(&self) -> Result<()> {
        if self.files < 10 || self.windows_per_file == 0 {
            return Err(Error::InvalidConfig(
                "a synthetic run needs >= 10 files and >= 1 window per file".into(),
            ));
        }
        Ok(())
    }

    pub fn wear(&self, file_index: usize) -> f64 {
        let x = file_index as f64 / (self.files - 1) as f64;
        for k in WEAR_KNOTS.windows(2) {
            let ((x0, y0), (x1, y1)) = (k[0], k[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        WEAR_KNOTS[WEAR_KNOTS.len() - 1].1
    }

    /// Label ranges implied by the wear bands.
    pub fn label_plan(&self) -> Result<LabelPlan> {
        self.validate()?;
        let band = |pred: &dyn Fn(f64) -> bool| {
            let hits: Vec<usize> = (0..self.files).filter(|&i| pred(self.wear(i))).collect();
            match (hits.first(), hits.last()) {
                (Some(&a), Some(&b)) => Ok(FileRange::new(a, b)),
                _ => Err(Error::InvalidConfig("synthetic run too short for all bands".into())),
            }
        };
        let plan = LabelPlan {
            normal: band(&|w| w <= NORMAL_MAX_WEAR)?,
            degraded: band(&|w| (DEGRADED_WEAR.0..=DEGRADED_WEAR.1).contains(&w))?,
            severe: band(&|w| w >= SEVERE_MIN_WEAR)?,
            channel: 0,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn recording(&self, file_index: usize) -> Result<RawRecording> {
        let profile = FaultProfile::at_wear(self.wear(file_index));
        let mut rng = stream_rng(self.seed, streams::SYNTH, 1000 + file_index as u64);
        RawRecording::from_channel(profile.signal(self.windows_per_file * WINDOW, &mut rng), file_index)
    }

    pub fn recordings(&self) -> Result<Vec<RawRecording>> {
        self.validate()?;
        (0..self.files).map(|i| self.recording(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mean of squared values at or above the 90th percentile of |x|.
    fn impulse_band_energy(values: &[f64]) -> f64 {
        let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        mags.sort_by(f64::total_cmp);
        let cut = mags[(0.9 * (mags.len() - 1) as f64) as usize];
        let top: Vec<f64> = mags.into_iter().filter(|&m| m >= cut).collect();
        top.iter().map(|m| m * m).sum::<f64>() / top.len() as f64
    }

    fn mean_band_energy(c: Condition) -> f64 {
        let ws = synth_generate(c, 200, 5).unwrap();
        ws.iter().map(|w| impulse_band_energy(&w.values)).sum::<f64>() / ws.len() as f64
    }

    #[test]
    fn severity_ordered_by_impulse_energy() {
        let n = mean_band_energy(Condition::Normal);
        let d = mean_band_energy(Condition::Degraded);
        let s = mean_band_energy(Condition::Severe);
        assert!(n < d && d < s, "{n} {d} {s}");
    }

    #[test]
    fn shapes_and_determinism() {
        let a = synth_generate(Condition::Degraded, 12, 3).unwrap();
        assert!(a.iter().all(|w| w.values.len() == 256));
        assert!(a.iter().all(|w| w.label == Some(Condition::Degraded)));
        assert_eq!(a, synth_generate(Condition::Degraded, 12, 3).unwrap());
        assert_ne!(a, synth_generate(Condition::Degraded, 12, 4).unwrap());
        assert!(synth_generate(Condition::Normal, 0, 0).is_err());
    }

    #[test]
    fn wear_profiles_hit_conditions() {
        assert_eq!(FaultProfile::at_wear(0.0), FaultProfile::normal());
        assert_eq!(FaultProfile::at_wear(1.0), FaultProfile::degraded());
        assert_eq!(FaultProfile::at_wear(2.0), FaultProfile::severe());
    }

    #[test]
    fn run_wear_is_increasing_and_bands_ordered() {
        let run = SyntheticRun::default();
        for i in 1..run.files {
            assert!(run.wear(i) > run.wear(i - 1));
        }
        let plan = run.label_plan().unwrap();
        assert!(plan.normal.end < plan.degraded.start);
        assert!(plan.degraded.end < plan.severe.start);
        assert_eq!(plan.normal.start, 0);
        assert_eq!(plan.severe.end, run.files - 1);
        let rec = run.recording(3).unwrap();
        assert_eq!(rec.n_rows(), 20 * 256);
        assert_eq!(rec, run.recording(3).unwrap());
    }
}
