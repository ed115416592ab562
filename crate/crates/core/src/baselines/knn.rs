use serde::{Deserialize, Serialize};

use crate::data::{Condition, SignalWindow};
use crate::error::{Error, Result};

use super::{labeled_points, majority, squared_distance};

/// Labeled reference set with a mean-k-distance cutoff for the severe class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    points: Vec<Vec<f64>>,
    labels: Vec<Condition>,
    k: usize,
    severe_threshold: f64,
}

impl KnnModel {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<Condition>, k: usize, severe_threshold: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("empty knn reference set".into()));
        }
        if labels.len() != points.len() {
            return Err(Error::shape("knn labels", points.len(), labels.len()));
        }
        if k == 0 || k > points.len() {
            return Err(Error::InvalidConfig(format!("k = {k} with {} reference points", points.len())));
        }
        if labels.contains(&Condition::Severe) {
            return Err(Error::Contamination(labels.iter().filter(|&&l| l == Condition::Severe).count()));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::shape("knn reference point", dim, p.len()));
        }
        if severe_threshold.is_nan() || severe_threshold < 0.0 {
            return Err(Error::InvalidConfig(format!("severe threshold {severe_threshold}")));
        }
        Ok(Self {
            points,
            labels,
            k,
            severe_threshold,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn severe_threshold(&self) -> f64 {
        self.severe_threshold
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices and distances of the `k` nearest references, skipping
    /// `exclude`. Equal distances keep reference order.
    fn nearest(&self, x: &[f64], exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (i, squared_distance(x, p).sqrt()))
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d.truncate(self.k);
        d
    }
}

/// Fits on labeled normal/degraded windows. The severe cutoff is the largest
/// leave-one-out mean k-distance among degraded references.
pub fn knn_fit(train: &[SignalWindow], k: usize) -> Result<KnnModel> {
    let (points, labels) = labeled_points(train)?;
    if k >= points.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} needs more than {} training windows",
            points.len()
        )));
    }
    if !labels.contains(&Condition::Degraded) {
        return Err(Error::Data("knn needs degraded training windows".into()));
    }
    let mut model = KnnModel::new(points, labels, k, f64::INFINITY)?;
    let mut threshold = 0.0f64;
    for (i, label) in model.labels.iter().enumerate() {
        if *label != Condition::Degraded {
            continue;
        }
        let near = model.nearest(&model.points[i], Some(i));
        threshold = threshold.max(mean_distance(&near));
    }
    model.severe_threshold = threshold;
    Ok(model)
}

fn mean_distance(near: &[(usize, f64)]) -> f64 {
    near.iter().map(|(_, d)| d).sum::<f64>() / near.len() as f64
}

/// Mean distance to the `k` nearest references and the resulting class.
pub fn knn_score(model: &KnnModel, x: &[f64]) -> Result<(f64, Condition)> {
    let dim = model.points[0].len();
    if x.len() != dim {
        return Err(Error::shape("knn query", dim, x.len()));
    }
    let near = model.nearest(x, None);
    let d = mean_distance(&near);
    if d > model.severe_threshold {
        return Ok((d, Condition::Severe));
    }
    Ok((d, majority(near.iter().map(|&(i, _)| model.labels[i]))))
}

/// Severe when the mean distance to the `k` nearest references exceeds the
/// cutoff, otherwise their majority label (ties go to degraded).
pub fn knn_classify(model: &KnnModel, x: &[f64]) -> Result<Condition> {
    knn_score(model, x).map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Condition::*;

    fn line() -> KnnModel {
        let points = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
        KnnModel::new(points, vec![Normal, Degraded, Degraded, Normal], 3, 5.0).unwrap()
    }

    #[test]
    fn exact_reference_match() {
        let m = KnnModel::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]], vec![Normal, Degraded], 1, 1.0).unwrap();
        assert_eq!(knn_classify(&m, &[0.0, 0.0]).unwrap(), Normal);
        assert_eq!(knn_classify(&m, &[3.0, 4.0]).unwrap(), Degraded);
    }

    #[test]
    fn far_query_is_severe() {
        let m = KnnModel::new(vec![vec![0.0], vec![1.0]], vec![Normal, Degraded], 1, 2.0).unwrap();
        // 4.0 from every reference at the closest.
        assert_eq!(knn_classify(&m, &[5.0]).unwrap(), Severe);
        assert_eq!(knn_classify(&m, &[-4.0]).unwrap(), Severe);
    }

    #[test]
    fn majority_of_three() {
        assert_eq!(knn_classify(&line(), &[1.0]).unwrap(), Degraded);
    }

    #[test]
    fn tie_goes_to_degraded() {
        let m = KnnModel::new(vec![vec![0.0], vec![1.0]], vec![Normal, Degraded], 2, 10.0).unwrap();
        assert_eq!(knn_classify(&m, &[0.0]).unwrap(), Degraded);
    }

    #[test]
    fn full_k_infinite_threshold_is_global_majority() {
        let points: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 3.0]).collect();
        let labels = vec![Normal, Normal, Normal, Normal, Degraded, Degraded, Degraded];
        let m = KnnModel::new(points, labels, 7, f64::INFINITY).unwrap();
        for q in [-100.0, 0.0, 18.0, 1e6] {
            assert_eq!(knn_classify(&m, &[q]).unwrap(), Normal);
        }
    }

    #[test]
    fn guards() {
        assert!(KnnModel::new(vec![], vec![], 1, 1.0).is_err());
        assert!(KnnModel::new(vec![vec![0.0]], vec![Normal], 2, 1.0).is_err());
        assert!(matches!(
            KnnModel::new(vec![vec![0.0]], vec![Severe], 1, 1.0),
            Err(Error::Contamination(1))
        ));
        assert!(knn_classify(&line(), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn fit_threshold_covers_training_degraded() {
        use crate::data::WindowSource;
        let w = |v: f64, c| SignalWindow {
            values: vec![v, -v],
            label: Some(c),
            source: WindowSource {
                file_index: 0,
                channel: 0,
                offset: 0,
            },
        };
        let train = vec![w(0.0, Normal), w(0.1, Normal), w(0.2, Normal), w(3.0, Degraded), w(3.5, Degraded), w(4.5, Degraded)];
        let m = knn_fit(&train, 2).unwrap();
        for t in &train {
            assert_ne!(knn_classify(&m, &t.values).unwrap(), Severe);
        }
        assert_eq!(knn_classify(&m, &[40.0, -40.0]).unwrap(), Severe);
        assert!(knn_fit(&train, 6).is_err());
    }
}
