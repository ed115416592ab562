use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Condition;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

use super::{majority, squared_distance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub cluster_labels: Vec<Condition>,
    pub severe_threshold: f64,
    /// Within-cluster sum of squares after each assignment pass.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

/// Nearest centroid index and squared distance; ties pick the lower index.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_seeds<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = d2.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, centroids.last().unwrap()));
        }
    }
    centroids
}

/// Lloyd iterations from k-means++ seeds until assignments stop changing or
/// `max_iters` passes. A cluster left empty is re-seeded at the point
/// farthest from its current centroid. Clusters take the majority label of
/// their members (ties go to degraded); the severe cutoff is the largest
/// nearest-centroid distance among degraded training points.
pub fn kmeans_fit(
    points: &[Vec<f64>],
    labels: &[Condition],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KmeansModel> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if points.len() < k {
        return Err(Error::Data(format!("{} points for k = {k}", points.len())));
    }
    if labels.len() != points.len() {
        return Err(Error::shape("kmeans labels", points.len(), labels.len()));
    }
    if labels.contains(&Condition::Severe) {
        return Err(Error::Contamination(labels.iter().filter(|&&l| l == Condition::Severe).count()));
    }
    if max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::shape("kmeans point", dim, p.len()));
    }

    let mut rng = stream_rng(seed, streams::KMEANS, 0);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    let mut wcss_history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        let mut changed = false;
        let mut wcss = 0.0;
        for (a, p) in assign.iter_mut().zip(points) {
            let (j, d) = nearest(&centroids, p);
            wcss += d;
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        wcss_history.push(wcss);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..points.len())
                .max_by(|&a, &b| {
                    let da = squared_distance(&points[a], &centroids[assign[a]]);
                    let db = squared_distance(&points[b], &centroids[assign[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap();
            centroids[j] = points[far].clone();
            assign[far] = j;
        }
    }

    let cluster_labels: Vec<Condition> = (0..k)
        .map(|j| majority(assign.iter().zip(labels).filter(|(&a, _)| a == j).map(|(_, &l)| l)))
        .collect();
    let severe_threshold = points
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == Condition::Degraded)
        .map(|(p, _)| nearest(&centroids, p).1.sqrt())
        .fold(0.0f64, f64::max);
    Ok(KmeansModel {
        centroids,
        cluster_labels,
        severe_threshold,
        wcss_history,
        iterations,
    })
}

/// Distance to the nearest centroid and the resulting class.
pub fn kmeans_score(model: &KmeansModel, x: &[f64]) -> Result<(f64, Condition)> {
    let dim = model.centroids.first().map(Vec::len).unwrap_or(0);
    if x.len() != dim {
        return Err(Error::shape("kmeans query", dim, x.len()));
    }
    let (j, d2) = nearest(&model.centroids, x);
    let d = d2.sqrt();
    if d > model.severe_threshold {
        return Ok((d, Condition::Severe));
    }
    Ok((d, model.cluster_labels[j]))
}

/// Severe beyond the cutoff from the nearest centroid, else that
/// centroid's label.
pub fn kmeans_classify(model: &KmeansModel, x: &[f64]) -> Result<Condition> {
    kmeans_score(model, x).map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};
    use Condition::*;

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<Condition>) {
        let mut rng = stream_rng(seed, 99, 0);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let (cx, cy, l) = if i % 2 == 0 { (0.0, 0.0, Normal) } else { (8.0, 5.0, Degraded) };
            pts.push(vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]);
            labels.push(l);
        }
        (pts, labels)
    }

    #[test]
    fn separated_blobs_recovered() {
        let (pts, labels) = blobs(1);
        let m = kmeans_fit(&pts, &labels, 2, 7, 100).unwrap();
        for (target, label) in [([0.0, 0.0], Normal), ([8.0, 5.0], Degraded)] {
            let j = m
                .centroids
                .iter()
                .position(|c| squared_distance(c, &target).sqrt() < 0.1)
                .expect("a centroid near each blob");
            assert_eq!(m.cluster_labels[j], label);
        }
        for w in m.wcss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn single_cluster_is_global_mean() {
        let (pts, labels) = blobs(2);
        let m = kmeans_fit(&pts, &labels, 1, 0, 10).unwrap();
        let n = pts.len() as f64;
        let mean: Vec<f64> = (0..2).map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / n).collect();
        for (a, b) in m.centroids[0].iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (pts, labels) = blobs(3);
        assert_eq!(
            kmeans_fit(&pts, &labels, 2, 5, 50).unwrap(),
            kmeans_fit(&pts, &labels, 2, 5, 50).unwrap()
        );
    }

    #[test]
    fn classify_rules() {
        let m = KmeansModel {
            centroids: vec![vec![0.0], vec![2.0]],
            cluster_labels: vec![Normal, Degraded],
            severe_threshold: 3.0,
            wcss_history: vec![],
            iterations: 0,
        };
        assert_eq!(kmeans_classify(&m, &[0.0]).unwrap(), Normal);
        assert_eq!(kmeans_classify(&m, &[2.0]).unwrap(), Degraded);
        assert_eq!(kmeans_classify(&m, &[1.0]).unwrap(), Normal);
        assert_eq!(kmeans_classify(&m, &[9.0]).unwrap(), Severe);
        assert_eq!(kmeans_classify(&m, &[-7.0]).unwrap(), Severe);
        assert!(kmeans_classify(&m, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn duplicate_points_force_reseed() {
        let pts = vec![vec![0.0], vec![0.0], vec![0.0], vec![5.0]];
        let labels = vec![Normal, Normal, Normal, Degraded];
        let m = kmeans_fit(&pts, &labels, 3, 0, 20).unwrap();
        assert_eq!(m.centroids.len(), 3);
        assert!(m.cluster_labels.len() == 3);
    }

    #[test]
    fn guards() {
        assert!(kmeans_fit(&[vec![1.0]], &[Normal], 2, 0, 5).is_err());
        assert!(kmeans_fit(&[vec![1.0]], &[Severe], 1, 0, 5).is_err());
        assert!(kmeans_fit(&[vec![1.0]], &[Normal], 0, 0, 5).is_err());
    }
}
