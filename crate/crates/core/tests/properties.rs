use latent_health::baselines::kmeans_fit;
use latent_health::data::{
    add_awgn, denormalize, label_windows, normalize, segment, shuffle_split, signal_power, Condition, FileRange,
    LabelPlan, NormStats, RawRecording, SignalWindow, WindowSource,
};
use latent_health::eval::{confusion, metrics, ConfusionMatrix};
use latent_health::health::{
    classify, distance, health_index, HealthRecord, Metric, ReferenceMean, ThresholdSet,
};
use latent_health::nn::{finite_difference_gradient, Activation, AdamConfig, AdamState, Mlp, MlpSpec};
use latent_health::vae::{kl_divergence, LatentCode, VaeArch, VaeParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CLASSES: [Condition; 3] = [Condition::Normal, Condition::Degraded, Condition::Severe];

fn window(values: Vec<f64>, file_index: usize, label: Option<Condition>) -> SignalWindow {
    SignalWindow::new(
        values,
        label,
        WindowSource {
            file_index,
            channel: 0,
            offset: 0,
        },
    )
    .unwrap()
}

fn set_params(mlp: &mut Mlp, flat: &[f64]) {
    let mut rest = flat;
    for slot in mlp.param_slices_mut() {
        let (head, tail) = rest.split_at(slot.len());
        slot.copy_from_slice(head);
        rest = tail;
    }
}

fn pre_activations(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut all = Vec::new();
    let mut a = x.to_vec();
    for (layer, act) in mlp.layers().iter().zip(mlp.spec().activations()) {
        let z = layer.forward(&a).unwrap();
        all.extend(&z);
        a = if *act == Activation::Relu { z.iter().map(|v| v.max(0.0)).collect() } else { z };
    }
    all
}

fn small_mlp() -> impl Strategy<Value = (Vec<usize>, Vec<bool>, u64)> {
    (prop::collection::vec(1usize..=10, 2..=4), any::<u64>()).prop_flat_map(|(sizes, seed)| {
        let n = sizes.len() - 1;
        (Just(sizes), prop::collection::vec(any::<bool>(), n), Just(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mlp_backward_matches_finite_differences((sizes, relu, seed) in small_mlp(), xs in prop::collection::vec(-2.0f64..2.0, 10), ts in prop::collection::vec(-1.0f64..1.0, 10)) {
        let acts: Vec<Activation> = relu.iter().map(|&r| if r { Activation::Relu } else { Activation::Identity }).collect();
        let spec = MlpSpec::new(sizes.clone(), acts).unwrap();
        let mlp = Mlp::init(spec, &mut ChaCha8Rng::seed_from_u64(seed));
        let x = &xs[..sizes[0]];
        let target = &ts[..*sizes.last().unwrap()];
        prop_assume!(pre_activations(&mlp, x).iter().all(|z| z.abs() >= 1e-3));

        let trace = mlp.forward(x).unwrap();
        let out_grad: Vec<f64> = trace.output().iter().zip(target).map(|(o, t)| o - t).collect();
        let (grads, _) = mlp.backward(&trace, &out_grad).unwrap();
        let analytic = grads.slices().concat();

        let flat = mlp.param_slices().concat();
        let mut probe = mlp.clone();
        let numeric = finite_difference_gradient(
            |p| {
                set_params(&mut probe, p);
                let out = probe.output(x).unwrap();
                0.5 * out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
            },
            &flat,
            1e-4,
        );
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            prop_assert!(rel < 1e-4, "analytic {a} numeric {n}");
        }
    }

    #[test]
    fn mlp_forward_is_deterministic((sizes, relu, seed) in small_mlp(), xs in prop::collection::vec(-2.0f64..2.0, 10)) {
        let acts: Vec<Activation> = relu.iter().map(|&r| if r { Activation::Relu } else { Activation::Identity }).collect();
        let spec = MlpSpec::new(sizes.clone(), acts).unwrap();
        let a = Mlp::init(spec.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
        let b = Mlp::init(spec, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&a, &b);
        let x = &xs[..sizes[0]];
        let (oa, ob) = (a.output(x).unwrap(), b.output(x).unwrap());
        prop_assert!(oa.iter().zip(&ob).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn adam_preserves_shapes(shapes in prop::collection::vec(0usize..12, 1..6), seed in any::<u64>(), steps in 1u64..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniform = rand_distr::Uniform::new(-3.0, 3.0).unwrap();
        use rand_distr::Distribution;
        let mut params: Vec<Vec<f64>> = shapes.iter().map(|&n| (0..n).map(|_| uniform.sample(&mut rng)).collect()).collect();
        let grads: Vec<Vec<f64>> = shapes.iter().map(|&n| (0..n).map(|_| uniform.sample(&mut rng)).collect()).collect();
        let mut adam = AdamState::new(&shapes);
        let cfg = AdamConfig::with_learning_rate(1e-2);
        for _ in 0..steps {
            let mut views: Vec<&mut [f64]> = params.iter_mut().map(Vec::as_mut_slice).collect();
            let gviews: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            adam.step(&mut views, &gviews, &cfg).unwrap();
        }
        prop_assert_eq!(adam.step_count(), steps);
        prop_assert_eq!(params.iter().map(Vec::len).collect::<Vec<_>>(), shapes);
        prop_assert!(params.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn kl_is_nonnegative(mu in prop::collection::vec(-5.0f64..5.0, 1..8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let logvar: Vec<f64> = mu.iter().map(|_| rng.random_range(-6.0..4.0)).collect();
        let kl = kl_divergence(&LatentCode::new(mu, logvar).unwrap());
        prop_assert!(kl >= 0.0);
    }

    #[test]
    fn kl_is_zero_only_at_the_prior(dim in 1usize..8, which in 0usize..8, mu_side in any::<bool>(), v in prop_oneof![-3.0f64..-1e-3, 1e-3f64..3.0]) {
        let zero = LatentCode::new(vec![0.0; dim], vec![0.0; dim]).unwrap();
        prop_assert_eq!(kl_divergence(&zero), 0.0);
        let (mut mu, mut logvar) = (vec![0.0; dim], vec![0.0; dim]);
        let i = which % dim;
        if mu_side { mu[i] = v } else { logvar[i] = v }
        prop_assert!(kl_divergence(&LatentCode::new(mu, logvar).unwrap()) > 0.0);
    }
}

fn vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    use rand::Rng;
    (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect()
}

#[test]
fn distance_axioms_over_ten_thousand_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..10_000 {
        use rand::Rng;
        let dim = rng.random_range(1..=8);
        let (p, q, r) = (vector(&mut rng, dim), vector(&mut rng, dim), vector(&mut rng, dim));
        for metric in Metric::ALL {
            let d = |a: &[f64], b: &[f64]| distance(a, b, metric).unwrap();
            let (pq, qp, qr, pr) = (d(&p, &q), d(&q, &p), d(&q, &r), d(&p, &r));
            assert!(pq >= 0.0, "triple {i} {metric}");
            assert_eq!(pq, qp, "symmetry, triple {i} {metric}");
            assert_eq!(d(&p, &p), 0.0);
            if p != q {
                assert!(pq > 0.0);
            }
            assert!(pr <= (pq + qr) * (1.0 + 1e-12), "triangle, triple {i} {metric}");
        }
    }
}

proptest! {
    #[test]
    fn classify_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0, h1 in 0.0f64..20.0, h2 in 0.0f64..20.0) {
        let t = ThresholdSet::new(a.min(b), a.max(b), Metric::Euclidean).unwrap();
        let (lo, hi) = (h1.min(h2), h1.max(h2));
        prop_assert!(classify(lo, &t) <= classify(hi, &t));
    }

    #[test]
    fn reference_mean_ignores_order(points in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 1..40), seed in any::<u64>()) {
        let mut shuffled = points.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = ReferenceMean::from_points(&points).unwrap();
        let b = ReferenceMean::from_points(&shuffled).unwrap();
        prop_assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn shuffle_split_keeps_every_item(items in prop::collection::vec(any::<u32>(), 1..200), frac in 0.01f64..0.99, seed in any::<u64>()) {
        let (a, b) = shuffle_split(items.clone(), frac, seed).unwrap();
        let mut joined: Vec<u32> = a.into_iter().chain(b).collect();
        let mut orig = items;
        joined.sort_unstable();
        orig.sort_unstable();
        prop_assert_eq!(joined, orig);
    }

    #[test]
    fn segment_partitions_the_prefix(values in prop::collection::vec(-1e3f64..1e3, 0..600), w in 1usize..100) {
        let rec = RawRecording::from_channel(values.clone(), 3).unwrap();
        let windows = segment(&rec, 0, w).unwrap();
        prop_assert_eq!(windows.len(), values.len() / w);
        let joined: Vec<f64> = windows.iter().flat_map(|s| s.values.clone()).collect();
        prop_assert_eq!(&joined[..], &values[..windows.len() * w]);
        for (i, s) in windows.iter().enumerate() {
            prop_assert_eq!(s.source.offset, i * w);
            prop_assert_eq!(s.source.file_index, 3);
        }
    }

    #[test]
    fn labels_never_severe_in_seen_ranges(mut cuts in prop::collection::vec(0usize..500, 6), files in prop::collection::vec(0usize..520, 1..100)) {
        cuts.sort_unstable();
        let plan = LabelPlan {
            normal: FileRange::new(cuts[0], cuts[1]),
            degraded: FileRange::new(cuts[2] + 1, cuts[3] + 1),
            severe: FileRange::new(cuts[4] + 2, cuts[5] + 2),
            channel: 0,
        };
        let mut windows: Vec<SignalWindow> = files.iter().map(|&f| window(vec![0.0], f, None)).collect();
        label_windows(&mut windows, &plan).unwrap();
        for w in &windows {
            let f = w.source.file_index;
            if plan.normal.contains(f) || plan.degraded.contains(f) {
                prop_assert_ne!(w.label, Some(Condition::Severe));
            }
        }
    }

    #[test]
    fn normalize_round_trip(values in prop::collection::vec(-10.0f64..10.0, 1..300), mean in -10.0f64..10.0, std in 0.1f64..10.0) {
        let stats = NormStats::new(mean, std).unwrap();
        let ws = vec![window(values.clone(), 0, None)];
        let back = denormalize(&normalize(&ws, &stats), &stats);
        for (a, b) in back[0].values.iter().zip(&values) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn awgn_hits_requested_snr(snr in -5.0f64..20.0, seed in any::<u64>(), amp in 0.1f64..10.0) {
        let clean: Vec<f64> = (0..4096).map(|i| amp * (i as f64 * 0.37).sin()).collect();
        let w = window(clean.clone(), 0, None);
        let noisy = add_awgn(&w, snr, seed).unwrap();
        let noise: Vec<f64> = noisy.values.iter().zip(&clean).map(|(n, c)| n - c).collect();
        let measured = 10.0 * (signal_power(&clean) / signal_power(&noise)).log10();
        prop_assert!((measured - snr).abs() <= 0.5, "requested {snr} measured {measured}");
    }
}

fn matrix(counts: &[u64]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for t in 0..3 {
        for p in 0..3 {
            cm.counts[t][p] = counts[3 * t + p];
        }
    }
    cm
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

proptest! {
    #[test]
    fn macro_f1_ignores_class_order(counts in prop::collection::vec(0u64..50, 9), perm in 0usize..6) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let cm = matrix(&counts);
        let s = PERMUTATIONS[perm];
        let mut permuted = ConfusionMatrix::default();
        for t in 0..3 {
            for p in 0..3 {
                permuted.counts[s[t]][s[p]] = cm.counts[t][p];
            }
        }
        let (a, b) = (metrics(&cm).unwrap(), metrics(&permuted).unwrap());
        prop_assert!((a.f1 - b.f1).abs() <= 1e-12);
        prop_assert!((a.accuracy - b.accuracy).abs() <= 1e-12);
    }

    #[test]
    fn metrics_stay_in_unit_interval(counts in prop::collection::vec(0u64..50, 9)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let r = metrics(&matrix(&counts)).unwrap();
        for (name, v) in r.named_values() {
            prop_assert!((0.0..=1.0).contains(&v), "{name} = {v}");
        }
    }

    #[test]
    fn all_correct_records_score_one(truths in prop::collection::vec(0usize..3, 1..60)) {
        let records: Vec<HealthRecord> = truths
            .iter()
            .enumerate()
            .map(|(i, &t)| HealthRecord {
                file_index: i,
                offset: None,
                health_index: 0.0,
                metric: Metric::Euclidean,
                predicted: CLASSES[t],
                truth: Some(CLASSES[t]),
            })
            .collect();
        let cm = confusion(&records).unwrap();
        prop_assert_eq!(cm.total(), truths.len() as u64);
        let r = metrics(&cm).unwrap();
        prop_assert_eq!(r.accuracy, 1.0);
        for t in 0..3 {
            let present = truths.contains(&t);
            let c = &r.per_class[t];
            prop_assert_eq!((c.precision, c.recall, c.f1), if present { (1.0, 1.0, 1.0) } else { (0.0, 0.0, 0.0) });
        }
    }

    #[test]
    fn kmeans_wcss_never_increases(points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 4..60), k in 1usize..5, seed in any::<u64>()) {
        prop_assume!(points.len() >= k);
        let labels: Vec<Condition> = (0..points.len()).map(|i| if i % 2 == 0 { Condition::Normal } else { Condition::Degraded }).collect();
        let model = kmeans_fit(&points, &labels, k, seed, 50).unwrap();
        prop_assert!(!model.wcss_history.is_empty());
        for pair in model.wcss_history.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-12, "{:?}", model.wcss_history);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn health_index_ignores_reference_order(seed in any::<u64>(), n in 2usize..20, probe in prop::collection::vec(-2.0f64..2.0, 6)) {
        let model = VaeParams::init(VaeArch::new(vec![6, 4, 3], 2).unwrap(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        use rand::Rng;
        let mut normal: Vec<SignalWindow> = (0..n)
            .map(|i| window((0..6).map(|_| rng.random_range(-2.0..2.0)).collect(), i, Some(Condition::Normal)))
            .collect();
        // Non-zero mu head so the embedding actually depends on the input.
        let mut model = model;
        for (j, w) in model.mu_head_mut().weights_mut().iter_mut().enumerate() {
            *w = 0.3 * (j as f64 + 1.0).sin();
        }
        let a = ReferenceMean::fit(&model, &normal).unwrap();
        normal.reverse();
        use rand::seq::SliceRandom;
        normal.shuffle(&mut rng);
        let b = ReferenceMean::fit(&model, &normal).unwrap();
        for metric in Metric::ALL {
            let ha = health_index(&model, &probe, &a, metric).unwrap();
            let hb = health_index(&model, &probe, &b, metric).unwrap();
            prop_assert_eq!(ha.to_bits(), hb.to_bits());
        }
    }
}
