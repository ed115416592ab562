//! Comparison detectors sharing the normal/degraded training scheme with a
//! distance-overflow rule for the unseen severe class.

mod autoencoder;
mod kmeans;
mod knn;

pub use autoencoder::{ae_health_index, ae_train, ae_train_with_arch, VanillaAe};
pub use kmeans::{kmeans_classify, kmeans_fit, kmeans_score, KmeansModel};
pub use knn::{knn_classify, knn_fit, knn_score, KnnModel};

use crate::data::{Condition, SignalWindow};
use crate::error::{Error, Result};

/// Values and labels of normal/degraded training windows.
pub(crate) fn labeled_points(windows: &[SignalWindow]) -> Result<(Vec<Vec<f64>>, Vec<Condition>)> {
    let mut points = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    for w in windows {
        match w.label {
            Some(c @ (Condition::Normal | Condition::Degraded)) => {
                points.push(w.values.clone());
                labels.push(c);
            }
            Some(Condition::Severe) => {
                let n = windows.iter().filter(|w| w.label == Some(Condition::Severe)).count();
                return Err(Error::Contamination(n));
            }
            None => return Err(Error::Data("baseline training window without a label".into())),
        }
    }
    if points.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }
    Ok((points, labels))
}

/// Majority of normal/degraded votes; ties go to degraded.
pub(crate) fn majority(labels: impl IntoIterator<Item = Condition>) -> Condition {
    let (mut normal, mut degraded) = (0usize, 0usize);
    for l in labels {
        match l {
            Condition::Normal => normal += 1,
            _ => degraded += 1,
        }
    }
    if normal > degraded {
        Condition::Normal
    } else {
        Condition::Degraded
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
