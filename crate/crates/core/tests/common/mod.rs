//! Numeric oracles shared by the oracle and acceptance test targets.

#![allow(dead_code)]

use latent_health::health::{distance, Metric};
use latent_health::nn::{finite_difference_gradient, Mlp};
use latent_health::vae::{kl_divergence, LatentCode, VaeArch, VaeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Worst relative gap between the closed-form KL and a plain Monte-Carlo
/// average of `log q(z) - log p(z)` with `z ~ q`, over `codes` random codes.
pub fn kl_monte_carlo_max_rel_error(codes: usize, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..codes {
        let dim = 5;
        let mu: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let logvar: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let code = LatentCode::new(mu.clone(), logvar.clone()).unwrap();
        let exact = kl_divergence(&code);
        let sigma: Vec<f64> = logvar.iter().map(|lv| (0.5 * lv).exp()).collect();
        let mut sum = 0.0;
        for _ in 0..draws {
            let mut log_ratio = 0.0;
            for i in 0..dim {
                let e: f64 = StandardNormal.sample(&mut rng);
                let z = mu[i] + sigma[i] * e;
                // log N(z; mu, s^2) - log N(z; 0, 1), constants cancel.
                log_ratio += -0.5 * e * e - 0.5 * logvar[i] + 0.5 * z * z;
            }
            sum += log_ratio;
        }
        let estimate = sum / draws as f64;
        worst = worst.max((estimate - exact).abs() / exact);
    }
    worst
}

fn brute_force(p: &[f64], q: &[f64], metric: Metric) -> f64 {
    let order = match metric {
        Metric::Manhattan => 1.0,
        Metric::Euclidean => 2.0,
        Metric::Minkowski3 => 3.0,
    };
    let mut acc = 0.0;
    for i in 0..p.len() {
        acc += (p[i] - q[i]).abs().powf(order);
    }
    acc.powf(1.0 / order)
}

/// Worst relative gap between `distance` and a direct `(sum |d|^p)^(1/p)`
/// evaluation over `pairs` random pairs, for every metric.
pub fn distance_max_rel_error(pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let dim = rng.random_range(1..=16);
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
        for metric in Metric::ALL {
            let got = distance(&p, &q, metric).unwrap();
            let want = brute_force(&p, &q, metric);
            worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Relative error with a floor on the denominator so that components whose
/// true value is zero compare absolutely.
pub fn rel_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn relu_pre_activations(mlp: &Mlp, x: &[f64], out: &mut Vec<f64>) {
    let mut a = x.to_vec();
    let n = mlp.layers().len();
    for (i, layer) in mlp.layers().iter().enumerate() {
        let z = layer.forward(&a).unwrap();
        if i + 1 < n {
            out.extend(&z);
        }
        a = z.iter().map(|v| v.max(0.0)).collect();
    }
}

pub fn gradient_check_arch() -> VaeArch {
    VaeArch::new(vec![6, 4, 3], 2).unwrap()
}

/// Full-loss gradient check of the small VAE for one seed: random
/// parameters, input and eps, beta 20, c 1. Parameters are redrawn while any
/// relu pre-activation is within 1e-3 of its kink. Returns the worst
/// relative error over all parameters.
pub fn vae_gradient_max_rel_error(seed: u64) -> f64 {
    let arch = gradient_check_arch();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (beta, c) = (20.0, 1.0);
    let (params, x, eps) = loop {
        let flat: Vec<f64> = (0..arch.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = VaeParams::from_flat(arch.clone(), &flat).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let eps: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut pre = Vec::new();
        relu_pre_activations(params.trunk(), &x, &mut pre);
        let code = params.encode(&x).unwrap();
        let z: Vec<f64> = (0..2).map(|i| code.mu[i] + (0.5 * code.logvar[i]).exp() * eps[i]).collect();
        relu_pre_activations(params.decoder(), &z, &mut pre);
        if pre.iter().all(|v| v.abs() >= 1e-3) {
            break (params, x, eps);
        }
    };
    let (_, grads) = params.loss_and_grad(&x, &eps, beta, c).unwrap();
    let analytic = grads.flatten();
    let numeric = finite_difference_gradient(
        |flat| {
            VaeParams::from_flat(arch.clone(), flat)
                .unwrap()
                .sample_loss(&x, &eps, beta, c)
                .unwrap()
                .total
        },
        &params.flatten(),
        1e-4,
    );
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| rel_error(*a, *n, 1e-6))
        .fold(0.0, f64::max)
}
