//! Clipped nearest-neighbor distance metrics.
//!
//! Every point gets a raw error distance: zero when the prediction matches
//! the ground truth, otherwise the exact distance to the nearest
//! ground-truth point of the *predicted* class. Raw distances are clipped
//! at a class-specific threshold so isolated extreme errors cannot
//! dominate the averages. From the per-point records come, per predicted
//! class: the mean clipped distance over all predicted points (correct
//! points contributing zero), the fraction of errors beyond the threshold,
//! and the mean distance of the remaining near errors.
//!
//! When a predicted class has no ground-truth points anywhere in the
//! scene, the raw distance is infinite: it clips to the threshold and the
//! point counts as distant, so the worst failures stay in the statistics
//! instead of silently dropping out.
//!
//! Per-point records never depend on the evaluation scope and may be
//! computed in parallel; aggregation folds them in ascending point order
//! with compensated sums, so output does not depend on the thread count.

use rayon::prelude::*;

use crate::error::ValidationError;
use crate::hard::EvalScope;
use crate::model::{ClassId, LabeledCloud, PredictionSet};
use crate::spatial::ClassIndexSet;
use crate::sum::CompensatedSum;

/// Per-class clipping thresholds in meters, strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    tau: Vec<f64>,
}

impl ThresholdConfig {
    pub fn new(tau: Vec<f64>) -> Result<Self, ValidationError> {
        if tau.is_empty() {
            return Err(ValidationError::NoClasses);
        }
        for (c, &t) in tau.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(ValidationError::InvalidThreshold {
                    class: c.to_string(),
                    value: t,
                });
            }
        }
        Ok(Self { tau })
    }

    /// Same threshold for every one of `n_classes` classes.
    pub fn uniform(n_classes: usize, tau: f64) -> Result<Self, ValidationError> {
        Self::new(vec![tau; n_classes])
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.tau.len()
    }

    #[inline]
    pub fn get(&self, class: ClassId) -> f64 {
        self.tau[class.index()]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.tau
    }
}

/// Scope-independent distance facts about a single point under one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDistanceRecord {
    pub index: u32,
    pub predicted: ClassId,
    /// Meters; `f64::INFINITY` iff the predicted class has no ground truth.
    pub raw_distance: f64,
    /// `min(raw, tau_predicted)`.
    pub clipped_distance: f64,
    pub is_error: bool,
    /// Error whose raw distance strictly exceeds the threshold.
    pub is_distant: bool,
}

/// Distance from point `point_index` to the nearest ground-truth point of
/// `pred`. Exactly zero for correctly classified points (the point itself
/// belongs to that set); `f64::INFINITY` iff the predicted class has no
/// ground-truth points.
pub fn raw_error_distance(
    point_index: usize,
    pred: ClassId,
    cloud: &LabeledCloud,
    indexes: &ClassIndexSet,
) -> Result<f64, ValidationError> {
    if cloud.gt_labels()[point_index] == pred {
        return Ok(0.0);
    }
    indexes.nearest_distance(pred, &cloud.positions()[point_index])
}

/// Clips a raw distance at the class threshold. An infinite raw distance
/// clips to the threshold.
#[inline]
pub fn clip_distance(raw: f64, tau_c: f64) -> f64 {
    raw.min(tau_c)
}

/// Computes the per-point record for every point of the cloud under one
/// model. `indexes` must be built over the full cloud, never a scoped
/// subset.
pub fn compute_point_records(
    cloud: &LabeledCloud,
    pred: &PredictionSet,
    indexes: &ClassIndexSet,
    thresholds: &ThresholdConfig,
) -> Result<Vec<PointDistanceRecord>, ValidationError> {
    assert_eq!(
        indexes.cloud_len(),
        cloud.len(),
        "distance indexes must cover the full cloud"
    );
    if pred.pred_labels.len() != cloud.len() {
        return Err(ValidationError::LengthMismatch {
            model: pred.model_name.clone(),
            expected: cloud.len(),
            got: pred.pred_labels.len(),
        });
    }
    let gt = cloud.gt_labels();
    let positions = cloud.positions();
    (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let predicted = pred.pred_labels[i];
            let tau = thresholds.get(predicted);
            let is_error = predicted != gt[i];
            let raw_distance = if is_error {
                indexes.nearest_distance(predicted, &positions[i])?
            } else {
                0.0
            };
            Ok(PointDistanceRecord {
                index: i as u32,
                predicted,
                raw_distance,
                clipped_distance: clip_distance(raw_distance, tau),
                is_error,
                is_distant: is_error && raw_distance > tau,
            })
        })
        .collect()
}

/// Distance statistics for one predicted class over one scope.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistanceStats {
    pub class: ClassId,
    /// Scope points predicted as this class, correct or not.
    pub predicted_count: u64,
    pub error_count: u64,
    pub distant_count: u64,
    pub near_count: u64,
    /// Mean clipped distance over all predicted points; `None` iff none.
    pub mde: Option<f64>,
    /// Fraction of errors that are distant; `None` iff no errors.
    pub rho: Option<f64>,
    /// Mean distance of near errors; `None` iff no near errors.
    pub mu: Option<f64>,
}

/// Per-class stats plus their macro average.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceStatsBundle {
    pub per_class: Vec<ClassDistanceStats>,
    /// Macro mean of the defined per-class mean distance errors.
    pub mmde: Option<f64>,
    pub mmde_defined_classes: usize,
}

impl DistanceStatsBundle {
    pub fn class(&self, class: ClassId) -> &ClassDistanceStats {
        &self.per_class[class.index()]
    }
}

#[derive(Clone)]
struct ClassAccumulator {
    predicted: u64,
    errors: u64,
    distant: u64,
    clipped_sum: CompensatedSum,
    near_sum: CompensatedSum,
}

impl ClassAccumulator {
    fn new() -> Self {
        Self {
            predicted: 0,
            errors: 0,
            distant: 0,
            clipped_sum: CompensatedSum::new(),
            near_sum: CompensatedSum::new(),
        }
    }
}

/// Folds per-point records into per-class statistics over `scope`.
/// Records are visited in ascending point order with compensated sums.
pub fn aggregate_distance_stats(
    records: &[PointDistanceRecord],
    scope: &EvalScope,
    thresholds: &ThresholdConfig,
) -> DistanceStatsBundle {
    assert_eq!(records.len(), scope.len());
    let n_classes = thresholds.n_classes();
    let mut acc = vec![ClassAccumulator::new(); n_classes];

    for record in records {
        if !scope.contains(record.index as usize) {
            continue;
        }
        let a = &mut acc[record.predicted.index()];
        a.predicted += 1;
        a.clipped_sum.add(record.clipped_distance);
        if record.is_error {
            a.errors += 1;
            if record.is_distant {
                a.distant += 1;
            } else {
                // near errors satisfy raw <= tau, so clipped == raw
                a.near_sum.add(record.clipped_distance);
            }
        }
    }

    let per_class: Vec<ClassDistanceStats> = acc
        .into_iter()
        .enumerate()
        .map(|(c, a)| {
            let near = a.errors - a.distant;
            // the mean of values each <= tau can round one ulp past tau;
            // pin it back so the stated range [0, tau] holds exactly
            let tau = thresholds.get(ClassId(c as u16));
            ClassDistanceStats {
                class: ClassId(c as u16),
                predicted_count: a.predicted,
                error_count: a.errors,
                distant_count: a.distant,
                near_count: near,
                mde: (a.predicted > 0)
                    .then(|| (a.clipped_sum.value() / a.predicted as f64).min(tau)),
                rho: (a.errors > 0).then(|| a.distant as f64 / a.errors as f64),
                mu: (near > 0).then(|| (a.near_sum.value() / near as f64).min(tau)),
            }
        })
        .collect();

    let mut mde_sum = 0.0;
    let mut defined = 0usize;
    for stats in &per_class {
        if let Some(mde) = stats.mde {
            mde_sum += mde;
            defined += 1;
        }
    }

    DistanceStatsBundle {
        per_class,
        mmde: (defined > 0).then(|| mde_sum / defined as f64),
        mmde_defined_classes: defined,
    }
}

/// Full pipeline for one model over one scope: per-point records plus
/// aggregation. The scope restricts aggregation only; distances always
/// reference the full scene.
pub fn class_distance_stats(
    cloud: &LabeledCloud,
    pred: &PredictionSet,
    scope: &EvalScope,
    indexes: &ClassIndexSet,
    thresholds: &ThresholdConfig,
) -> Result<DistanceStatsBundle, ValidationError> {
    let records = compute_point_records(cloud, pred, indexes, thresholds)?;
    Ok(aggregate_distance_stats(&records, scope, thresholds))
}
