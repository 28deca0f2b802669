//! Spatially-aware evaluation of 3D point-cloud semantic segmentation.
//!
//! Conventional classification scores treat every misclassification the
//! same, no matter how far it lands from anything of its predicted class.
//! This crate scores predictions along two extra axes:
//!
//! * **Distance metrics** — each point gets the exact distance to the
//!   nearest ground-truth point of its predicted class (zero when
//!   correct), clipped at a per-class threshold. Per predicted class this
//!   yields the mean distance error over all predicted points, the
//!   fraction of errors beyond the threshold, and the mean distance of
//!   the remaining near errors, plus a macro average across classes.
//! * **Hard-point scoping** — when several models are compared, the union
//!   of their error sets forms a shared subset of difficult points, and
//!   every metric (classification and distance) can be recomputed over
//!   just that subset. Distance queries still reference the full scene.
//!
//! The crate also ships the classic confusion-matrix metrics (overall
//! accuracy, per-class IoU, mIoU), a columnar text format for clouds and
//! predictions, probability-averaging merge of overlapping tile
//! predictions, deterministic synthetic scenes for fixtures, and naive
//! reference implementations for verifying the fast paths.
//!
//! Everything is deterministic: identical inputs produce byte-identical
//! reports regardless of thread count.
//!
//! ```
//! use segdist::{
//!     build_class_indexes, compute_hard_points, evaluate_scoped, validate_inputs,
//!     ClassId, EvalConfig, EvalScope, LabeledCloud, PredictionSet,
//! };
//!
//! let config = EvalConfig::from_parts(
//!     vec!["ground".into(), "building".into()],
//!     vec![2.0, 10.0],
//! )?;
//! let cloud = LabeledCloud::new(
//!     vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 9.0]],
//!     vec![ClassId(0), ClassId(0), ClassId(1)],
//! )?;
//! let preds = vec![PredictionSet::new(
//!     "m",
//!     vec![ClassId(0), ClassId(1), ClassId(1)],
//! )];
//!
//! let ctx = validate_inputs(&cloud, &preds, config.thresholds())?;
//! let indexes = build_class_indexes(&cloud, &ctx.gt_partition);
//! let hard = compute_hard_points(&cloud, &preds)?;
//! assert_eq!(hard.selected_count(), 1);
//!
//! let full = EvalScope::full(cloud.len());
//! let metrics = evaluate_scoped(&cloud, &preds, &full, &indexes, config.thresholds())?;
//! assert_eq!(metrics[0].classification.overall_accuracy, Some(2.0 / 3.0));
//! # Ok::<(), segdist::ValidationError>(())
//! ```

pub mod classification;
pub mod distance;
pub mod error;
pub mod hard;
pub mod io;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod rng;
pub mod spatial;
pub mod sum;
pub mod synth;

pub use classification::{
    classification_stats, confusion_matrix, iou_per_class, mean_iou, overall_accuracy,
    ClassificationStats, ConfusionMatrix,
};
pub use distance::{
    aggregate_distance_stats, class_distance_stats, clip_distance, compute_point_records,
    raw_error_distance, ClassDistanceStats, DistanceStatsBundle, PointDistanceRecord,
    ThresholdConfig,
};
pub use error::{Error, MergeError, ParseError, SceneError, ValidationError};
pub use hard::{
    compute_hard_points, evaluate_model_with_records, evaluate_scoped, EvalScope, ScopeLabel,
    ScopedModelMetrics,
};
pub use io::config::{EvalConfig, ScopeSelection};
pub use io::report::{build_report, emit_report, MetricsReport, ReportFormat};
pub use io::table::{parse_cloud_file, write_table_file};
pub use model::{
    partition_by_class, validate_inputs, ClassId, ClassPartition, EvalContext, LabeledCloud,
    Position, PredictionSet, Probabilities,
};
pub use spatial::{brute_force_nearest, build_class_indexes, ClassIndexSet, KdTree};
pub use synth::{generate_scene, GeneratedScene, ModelRecipe, SceneSpec};
