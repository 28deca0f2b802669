//! Evaluation scopes and the multi-model hard-point subset.
//!
//! A scope is a boolean mask selecting which points aggregate statistics
//! run over. Per-point distances never depend on the scope; they always
//! reference the full scene, so scoping changes only the aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classification::{classification_stats, confusion_matrix, ClassificationStats};
use crate::distance::{
    aggregate_distance_stats, compute_point_records, DistanceStatsBundle, PointDistanceRecord,
    ThresholdConfig,
};
use crate::error::ValidationError;
use crate::model::{LabeledCloud, PredictionSet};
use crate::spatial::ClassIndexSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeLabel {
    Full,
    Hard,
}

impl std::fmt::Display for ScopeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScopeLabel::Full => f.write_str("full"),
            ScopeLabel::Hard => f.write_str("hard"),
        }
    }
}

/// Boolean per-point mask selecting the evaluation subset.
#[derive(Debug, Clone)]
pub struct EvalScope {
    label: ScopeLabel,
    mask: Vec<bool>,
    selected_count: usize,
}

impl EvalScope {
    pub fn new(label: ScopeLabel, mask: Vec<bool>) -> Self {
        let selected_count = mask.iter().filter(|&&m| m).count();
        Self {
            label,
            mask,
            selected_count,
        }
    }

    /// Scope selecting every point of an `n`-point cloud.
    pub fn full(n: usize) -> Self {
        Self {
            label: ScopeLabel::Full,
            mask: vec![true; n],
            selected_count: n,
        }
    }

    #[inline]
    pub fn label(&self) -> ScopeLabel {
        self.label
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    #[inline]
    pub fn selected_count(&self) -> usize {
        self.selected_count
    }

    /// Selected points as a fraction of the cloud.
    pub fn fraction(&self) -> f64 {
        if self.mask.is_empty() {
            0.0
        } else {
            self.selected_count as f64 / self.mask.len() as f64
        }
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.mask[index]
    }
}

/// Union of the compared models' error sets: a point is hard iff at least
/// one model misclassifies it. The subset is specific to the model set it
/// was computed from.
pub fn compute_hard_points(
    cloud: &LabeledCloud,
    preds: &[PredictionSet],
) -> Result<EvalScope, ValidationError> {
    if preds.is_empty() {
        return Err(ValidationError::NoModels);
    }
    for pred in preds {
        if pred.pred_labels.len() != cloud.len() {
            return Err(ValidationError::LengthMismatch {
                model: pred.model_name.clone(),
                expected: cloud.len(),
                got: pred.pred_labels.len(),
            });
        }
    }
    let gt = cloud.gt_labels();
    let mask: Vec<bool> = (0..cloud.len())
        .into_par_iter()
        .map(|i| preds.iter().any(|p| p.pred_labels[i] != gt[i]))
        .collect();
    Ok(EvalScope::new(ScopeLabel::Hard, mask))
}

/// Everything one model scored over one scope.
#[derive(Debug, Clone)]
pub struct ScopedModelMetrics {
    pub model_name: String,
    pub classification: ClassificationStats,
    pub distance: DistanceStatsBundle,
}

/// Scores every model over `scope`. Distance queries consult indexes built
/// over the unrestricted cloud; an empty scope yields entries whose
/// statistics are all undefined.
pub fn evaluate_scoped(
    cloud: &LabeledCloud,
    preds: &[PredictionSet],
    scope: &EvalScope,
    indexes: &ClassIndexSet,
    thresholds: &ThresholdConfig,
) -> Result<Vec<ScopedModelMetrics>, ValidationError> {
    preds
        .iter()
        .map(|pred| {
            let records = compute_point_records(cloud, pred, indexes, thresholds)?;
            Ok(evaluate_model_with_records(
                cloud, pred, &records, scope, thresholds,
            ))
        })
        .collect()
}

/// Same as [`evaluate_scoped`] for one model, reusing per-point distance
/// records that are shared across scopes.
pub fn evaluate_model_with_records(
    cloud: &LabeledCloud,
    pred: &PredictionSet,
    records: &[PointDistanceRecord],
    scope: &EvalScope,
    thresholds: &ThresholdConfig,
) -> ScopedModelMetrics {
    let n_classes = thresholds.n_classes();
    let cm = confusion_matrix(cloud.gt_labels(), &pred.pred_labels, scope, n_classes);
    ScopedModelMetrics {
        model_name: pred.model_name.clone(),
        classification: classification_stats(&cm),
        distance: aggregate_distance_stats(records, scope, thresholds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassId;

    fn ids(v: &[u16]) -> Vec<ClassId> {
        v.iter().copied().map(ClassId).collect()
    }

    fn five_point_cloud() -> LabeledCloud {
        let positions = (0..5).map(|i| [i as f64, 0.0, 0.0]).collect();
        LabeledCloud::new(positions, ids(&[0, 0, 1, 1, 0])).unwrap()
    }

    #[test]
    fn hard_points_union_of_error_sets() {
        let cloud = five_point_cloud();
        // model a errs at {1, 3}, model b errs at {3, 4}
        let a = PredictionSet::new("a", ids(&[0, 1, 1, 0, 0]));
        let b = PredictionSet::new("b", ids(&[0, 0, 1, 0, 1]));
        let scope = compute_hard_points(&cloud, &[a, b]).unwrap();
        assert_eq!(scope.mask(), &[false, true, false, true, true]);
        assert_eq!(scope.selected_count(), 3);
        assert_eq!(scope.label(), ScopeLabel::Hard);
    }

    #[test]
    fn perfect_models_give_empty_hard_set() {
        let cloud = five_point_cloud();
        let a = PredictionSet::new("a", cloud.gt_labels().to_vec());
        let scope = compute_hard_points(&cloud, &[a]).unwrap();
        assert_eq!(scope.selected_count(), 0);
        assert_eq!(scope.fraction(), 0.0);
    }

    #[test]
    fn single_model_hard_set_is_its_error_set() {
        let cloud = five_point_cloud();
        let a = PredictionSet::new("a", ids(&[1, 0, 1, 1, 0]));
        let scope = compute_hard_points(&cloud, &[a]).unwrap();
        assert_eq!(scope.mask(), &[true, false, false, false, false]);
    }

    #[test]
    fn no_models_is_an_error() {
        let cloud = five_point_cloud();
        assert!(matches!(
            compute_hard_points(&cloud, &[]),
            Err(ValidationError::NoModels)
        ));
    }
}
