//! Naive reference implementations used to verify the fast paths.
//!
//! Everything here recomputes results straight from the definitions:
//! nearest distances by linear scan over per-class ground-truth lists,
//! set memberships per point, aggregation in ascending point order. The
//! only things shared with the production path are the input types and
//! the output shape, so a bug would have to be made twice to go unseen.

use rayon::prelude::*;

use crate::distance::{ClassDistanceStats, DistanceStatsBundle, ThresholdConfig};
use crate::hard::EvalScope;
use crate::model::{ClassId, LabeledCloud, Position, PredictionSet};
use crate::spatial::brute_force_nearest;

struct NaiveSum {
    sum: f64,
    compensation: f64,
}

impl NaiveSum {
    fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Distance statistics recomputed from the definitions with brute-force
/// nearest-neighbor scans. Matches the production bundle bit for bit on
/// identical inputs.
pub fn naive_distance_bundle(
    cloud: &LabeledCloud,
    pred: &PredictionSet,
    scope: &EvalScope,
    thresholds: &ThresholdConfig,
) -> DistanceStatsBundle {
    let n = cloud.len();
    let n_classes = thresholds.n_classes();
    assert_eq!(pred.pred_labels.len(), n);
    assert_eq!(scope.len(), n);

    // per-class ground-truth positions, gathered directly
    let mut gt_points: Vec<Vec<Position>> = vec![Vec::new(); n_classes];
    for (i, label) in cloud.gt_labels().iter().enumerate() {
        gt_points[label.index()].push(cloud.positions()[i]);
    }

    // raw distance per point; the scans are independent, so they may run
    // in parallel without affecting the values
    let raw: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let predicted = pred.pred_labels[i];
            if predicted == cloud.gt_labels()[i] {
                0.0
            } else {
                brute_force_nearest(&gt_points[predicted.index()], &cloud.positions()[i])
            }
        })
        .collect();

    let mut predicted_count = vec![0u64; n_classes];
    let mut error_count = vec![0u64; n_classes];
    let mut distant_count = vec![0u64; n_classes];
    let mut clipped_sum: Vec<NaiveSum> = (0..n_classes).map(|_| NaiveSum::new()).collect();
    let mut near_sum: Vec<NaiveSum> = (0..n_classes).map(|_| NaiveSum::new()).collect();

    for (i, &raw_distance) in raw.iter().enumerate() {
        if !scope.contains(i) {
            continue;
        }
        let c = pred.pred_labels[i].index();
        let tau = thresholds.get(pred.pred_labels[i]);
        let clipped = if raw_distance < tau { raw_distance } else { tau };
        predicted_count[c] += 1;
        clipped_sum[c].add(clipped);
        if pred.pred_labels[i] != cloud.gt_labels()[i] {
            error_count[c] += 1;
            if raw_distance > tau {
                distant_count[c] += 1;
            } else {
                near_sum[c].add(clipped);
            }
        }
    }

    let per_class: Vec<ClassDistanceStats> = (0..n_classes)
        .map(|c| {
            let near = error_count[c] - distant_count[c];
            // means pinned to the threshold, same as the production path
            let tau = thresholds.get(ClassId(c as u16));
            ClassDistanceStats {
                class: ClassId(c as u16),
                predicted_count: predicted_count[c],
                error_count: error_count[c],
                distant_count: distant_count[c],
                near_count: near,
                mde: (predicted_count[c] > 0)
                    .then(|| (clipped_sum[c].value() / predicted_count[c] as f64).min(tau)),
                rho: (error_count[c] > 0)
                    .then(|| distant_count[c] as f64 / error_count[c] as f64),
                mu: (near > 0).then(|| (near_sum[c].value() / near as f64).min(tau)),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::class_distance_stats;
    use crate::model::partition_by_class;
    use crate::rng::SplitMix64;
    use crate::spatial::build_class_indexes;

    fn random_instance(
        rng: &mut SplitMix64,
        n: usize,
        n_classes: u16,
    ) -> (LabeledCloud, PredictionSet) {
        let positions = (0..n)
            .map(|_| {
                [
                    rng.range_f64(-30.0, 30.0),
                    rng.range_f64(-30.0, 30.0),
                    rng.range_f64(0.0, 15.0),
                ]
            })
            .collect();
        let gt = (0..n)
            .map(|_| ClassId(rng.below(n_classes as u64) as u16))
            .collect();
        let cloud = LabeledCloud::new(positions, gt).unwrap();
        // mostly-correct predictions with a sprinkling of random errors
        let pred_labels = cloud
            .gt_labels()
            .iter()
            .map(|&g| {
                if rng.next_f64() < 0.2 {
                    ClassId(rng.below(n_classes as u64) as u16)
                } else {
                    g
                }
            })
            .collect();
        (cloud, PredictionSet::new("m", pred_labels))
    }

    #[test]
    fn fast_bundle_equals_naive_exactly() {
        let mut rng = SplitMix64::new(31);
        for trial in 0..10 {
            let n_classes = 3 + (trial % 4) as u16;
            let (cloud, pred) = random_instance(&mut rng, 400, n_classes);
            let part = partition_by_class(cloud.gt_labels(), n_classes as usize);
            let indexes = build_class_indexes(&cloud, &part);
            let tau = ThresholdConfig::uniform(n_classes as usize, 2.5).unwrap();
            let scope = EvalScope::full(cloud.len());

            let fast = class_distance_stats(&cloud, &pred, &scope, &indexes, &tau).unwrap();
            let naive = naive_distance_bundle(&cloud, &pred, &scope, &tau);
            assert_eq!(fast, naive, "trial {trial}");
        }
    }
}
