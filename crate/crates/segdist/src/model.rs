//! Shared data model: labeled clouds, prediction sets, and class partitions.
//!
//! All types here are immutable after validation and safe to share across
//! threads. Coordinates are double-precision meters; point order is the
//! file order and every derived index list is sorted ascending, so results
//! are reproducible byte for byte.

use serde::{Deserialize, Serialize};

use crate::distance::ThresholdConfig;
use crate::error::ValidationError;

/// Index into the evaluation's declared class list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u16);

impl ClassId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A 3D position in meters.
pub type Position = [f64; 3];

/// The scene: positions plus ground-truth labels, aligned by index.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    positions: Vec<Position>,
    gt_labels: Vec<ClassId>,
}

impl LabeledCloud {
    /// Builds a cloud, checking alignment and coordinate finiteness.
    /// Label range is checked later against a config by [`validate_inputs`].
    pub fn new(positions: Vec<Position>, gt_labels: Vec<ClassId>) -> Result<Self, ValidationError> {
        if positions.is_empty() {
            return Err(ValidationError::EmptyCloud);
        }
        if positions.len() != gt_labels.len() {
            return Err(ValidationError::LabelLengthMismatch {
                positions: positions.len(),
                labels: gt_labels.len(),
            });
        }
        for (index, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(ValidationError::NonFiniteCoordinate { index });
            }
        }
        Ok(Self {
            positions,
            gt_labels,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    #[inline]
    pub fn gt_labels(&self) -> &[ClassId] {
        &self.gt_labels
    }
}

/// Per-class probability rows, row-major, one row of `n_classes` per point.
#[derive(Debug, Clone)]
pub struct Probabilities {
    values: Vec<f64>,
    n_classes: usize,
}

impl Probabilities {
    pub fn new(values: Vec<f64>, n_classes: usize) -> Self {
        assert!(n_classes > 0 && values.len().is_multiple_of(n_classes));
        Self { values, n_classes }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_classes
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    /// Checks a row is finite, non-negative, and sums to 1 within `tol`.
    pub fn check_row(
        &self,
        model: &str,
        row: usize,
        tol: f64,
    ) -> Result<(), ValidationError> {
        let r = self.row(row);
        let mut sum = 0.0;
        for &v in r {
            if !v.is_finite() {
                return Err(ValidationError::InvalidDistribution {
                    model: model.to_owned(),
                    row,
                    reason: format!("non-finite entry {v}"),
                });
            }
            if v < 0.0 {
                return Err(ValidationError::InvalidDistribution {
                    model: model.to_owned(),
                    row,
                    reason: format!("negative entry {v}"),
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > tol {
            return Err(ValidationError::InvalidDistribution {
                model: model.to_owned(),
                row,
                reason: format!("row sums to {sum}"),
            });
        }
        Ok(())
    }
}

/// Tolerance on probability rows summing to one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-6;

/// One model's predicted labels (and optional per-class scores), aligned to a cloud.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub model_name: String,
    pub pred_labels: Vec<ClassId>,
    pub probabilities: Option<Probabilities>,
}

impl PredictionSet {
    pub fn new(model_name: impl Into<String>, pred_labels: Vec<ClassId>) -> Self {
        Self {
            model_name: model_name.into(),
            pred_labels,
            probabilities: None,
        }
    }

    pub fn with_probabilities(mut self, probabilities: Probabilities) -> Self {
        self.probabilities = Some(probabilities);
        self
    }
}

/// Point indices grouped by class. Lists are sorted ascending, disjoint,
/// and together cover `0..n` for the label sequence they were built from.
#[derive(Debug, Clone)]
pub struct ClassPartition {
    lists: Vec<Vec<u32>>,
}

impl ClassPartition {
    #[inline]
    pub fn n_classes(&self) -> usize {
        self.lists.len()
    }

    #[inline]
    pub fn indices(&self, class: ClassId) -> &[u32] {
        &self.lists[class.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &[u32])> {
        self.lists
            .iter()
            .enumerate()
            .map(|(c, l)| (ClassId(c as u16), l.as_slice()))
    }
}

/// Groups point indices by label. Classes absent from `labels` map to
/// empty lists; lists come out sorted because points are scanned in order.
pub fn partition_by_class(labels: &[ClassId], n_classes: usize) -> ClassPartition {
    let mut lists = vec![Vec::new(); n_classes];
    for (i, label) in labels.iter().enumerate() {
        lists[label.index()].push(i as u32);
    }
    ClassPartition { lists }
}

/// Inputs that passed [`validate_inputs`], plus the ground-truth partition
/// every later stage consumes.
#[derive(Debug)]
pub struct EvalContext<'a> {
    pub cloud: &'a LabeledCloud,
    pub preds: &'a [PredictionSet],
    pub thresholds: &'a ThresholdConfig,
    pub gt_partition: ClassPartition,
}

impl EvalContext<'_> {
    #[inline]
    pub fn n_classes(&self) -> usize {
        self.thresholds.n_classes()
    }
}

fn check_labels(
    labels: &[ClassId],
    n_classes: usize,
) -> Result<(), ValidationError> {
    for (index, label) in labels.iter().enumerate() {
        if label.index() >= n_classes {
            return Err(ValidationError::UnknownClass {
                label: label.0 as u32,
                index,
                n_classes,
            });
        }
    }
    Ok(())
}

/// Checks every cross-cutting invariant: prediction alignment, label range,
/// probability rows, threshold coverage, and model-name uniqueness.
pub fn validate_inputs<'a>(
    cloud: &'a LabeledCloud,
    preds: &'a [PredictionSet],
    thresholds: &'a ThresholdConfig,
) -> Result<EvalContext<'a>, ValidationError> {
    let n = cloud.len();
    let n_classes = thresholds.n_classes();

    check_labels(cloud.gt_labels(), n_classes)?;

    let mut seen = std::collections::HashSet::new();
    for pred in preds {
        if !seen.insert(pred.model_name.as_str()) {
            return Err(ValidationError::DuplicateModel(pred.model_name.clone()));
        }
        if pred.pred_labels.len() != n {
            return Err(ValidationError::LengthMismatch {
                model: pred.model_name.clone(),
                expected: n,
                got: pred.pred_labels.len(),
            });
        }
        check_labels(&pred.pred_labels, n_classes)?;
        if let Some(probs) = &pred.probabilities {
            if probs.n_rows() != n || probs.n_classes() != n_classes {
                return Err(ValidationError::ProbabilityShape {
                    model: pred.model_name.clone(),
                    expected: n,
                    got: probs.n_rows(),
                });
            }
            for row in 0..n {
                probs.check_row(&pred.model_name, row, PROBABILITY_SUM_TOL)?;
            }
        }
    }

    Ok(EvalContext {
        cloud,
        preds,
        thresholds,
        gt_partition: partition_by_class(cloud.gt_labels(), n_classes),
    })
}
