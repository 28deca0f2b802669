//! Confusion-matrix classification metrics: overall accuracy, per-class
//! IoU, and macro-averaged mIoU over an arbitrary evaluation scope.
//!
//! Counts are exact integers; ratios are computed in double precision only
//! once the counting is done. A 0/0 cell yields `None` (never a fabricated
//! 0 or 1) and is excluded from the macro average, with the number of
//! defined classes reported alongside so the unconditional form can be
//! recovered by a reader.

use rayon::prelude::*;

use crate::hard::EvalScope;
use crate::model::ClassId;

/// Row-major count matrix: rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    n_classes: usize,
    scope_size: u64,
}

impl ConfusionMatrix {
    #[inline]
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Total number of points counted (the scope size).
    #[inline]
    pub fn scope_size(&self) -> u64 {
        self.scope_size
    }

    #[inline]
    pub fn count(&self, gt: ClassId, pred: ClassId) -> u64 {
        self.counts[gt.index() * self.n_classes + pred.index()]
    }

    /// Correctly classified points in scope.
    pub fn trace(&self) -> u64 {
        (0..self.n_classes)
            .map(|c| self.counts[c * self.n_classes + c])
            .sum()
    }

    pub fn true_positives(&self, c: ClassId) -> u64 {
        self.count(c, c)
    }

    /// Points predicted as `c` whose ground truth differs.
    pub fn false_positives(&self, c: ClassId) -> u64 {
        (0..self.n_classes)
            .map(|g| self.counts[g * self.n_classes + c.index()])
            .sum::<u64>()
            - self.true_positives(c)
    }

    /// Points of ground truth `c` predicted as something else.
    pub fn false_negatives(&self, c: ClassId) -> u64 {
        self.counts[c.index() * self.n_classes..(c.index() + 1) * self.n_classes]
            .iter()
            .sum::<u64>()
            - self.true_positives(c)
    }
}

/// Counts scope points into an `n_classes x n_classes` matrix. Accumulation
/// runs in parallel over point ranges and merges by cell-wise integer
/// addition, so the result is independent of the thread count.
pub fn confusion_matrix(
    gt: &[ClassId],
    pred: &[ClassId],
    scope: &EvalScope,
    n_classes: usize,
) -> ConfusionMatrix {
    assert_eq!(gt.len(), pred.len());
    assert_eq!(gt.len(), scope.len());
    let mask = scope.mask();

    let counts = (0..gt.len())
        .into_par_iter()
        .fold(
            || vec![0u64; n_classes * n_classes],
            |mut acc, i| {
                if mask[i] {
                    acc[gt[i].index() * n_classes + pred[i].index()] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n_classes * n_classes],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    ConfusionMatrix {
        counts,
        n_classes,
        scope_size: scope.selected_count() as u64,
    }
}

/// trace / scope size; `None` iff the scope is empty.
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Option<f64> {
    if cm.scope_size == 0 {
        None
    } else {
        Some(cm.trace() as f64 / cm.scope_size as f64)
    }
}

/// TP / (TP + FP + FN) per class; `None` where the denominator is zero,
/// i.e. the class appears in neither ground truth nor predictions in scope.
pub fn iou_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.n_classes)
        .map(|c| {
            let c = ClassId(c as u16);
            let tp = cm.true_positives(c);
            let denom = tp + cm.false_positives(c) + cm.false_negatives(c);
            if denom == 0 {
                None
            } else {
                Some(tp as f64 / denom as f64)
            }
        })
        .collect()
}

/// Arithmetic mean over the defined entries, with the defined count.
/// `None` iff no class is defined.
pub fn mean_iou(ious: &[Option<f64>]) -> (Option<f64>, usize) {
    let defined: Vec<f64> = ious.iter().flatten().copied().collect();
    if defined.is_empty() {
        (None, 0)
    } else {
        (
            Some(defined.iter().sum::<f64>() / defined.len() as f64),
            defined.len(),
        )
    }
}

/// Classification statistics bundle for one model over one scope.
#[derive(Debug, Clone)]
pub struct ClassificationStats {
    pub overall_accuracy: Option<f64>,
    pub iou_per_class: Vec<Option<f64>>,
    pub mean_iou: Option<f64>,
    pub defined_class_count: usize,
}

pub fn classification_stats(cm: &ConfusionMatrix) -> ClassificationStats {
    let ious = iou_per_class(cm);
    let (miou, defined) = mean_iou(&ious);
    ClassificationStats {
        overall_accuracy: overall_accuracy(cm),
        iou_per_class: ious,
        mean_iou: miou,
        defined_class_count: defined,
    }
}
