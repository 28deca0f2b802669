//! Machine-readable comparison reports.
//!
//! JSON keeps full double precision (numbers are emitted with Rust's
//! shortest round-trip formatting); CSV rounds to 6 significant digits.
//! Undefined statistics are `null` in JSON and empty cells in CSV, never
//! a fabricated zero. Map keys are written in insertion order (model
//! order, class id order), so identical runs produce identical bytes.

use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hard::{EvalScope, ScopedModelMetrics, ScopeLabel};
use crate::io::config::EvalConfig;
use crate::model::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(crate::error::ParseError::Config(format!(
                "format must be json or csv, got '{other}'"
            ))),
        }
    }
}

/// Resolved policy choices echoed into every report so numbers are never
/// interpreted against the wrong conventions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policies {
    pub undefined_values: String,
    pub mmde_average: String,
    pub tile_tie_break: String,
    pub tile_point_identity: String,
}

impl Default for Policies {
    fn default() -> Self {
        Self {
            undefined_values: "null".to_owned(),
            mmde_average: "defined-classes-only".to_owned(),
            tile_tie_break: "lowest-class-id".to_owned(),
            tile_point_identity: "bitwise-xyz".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub classes: Vec<String>,
    pub thresholds: IndexMap<String, f64>,
    pub policies: Policies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub oa: Option<f64>,
    pub iou: IndexMap<String, Option<f64>>,
    pub miou: Option<f64>,
    pub defined_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistanceReport {
    pub mde: Option<f64>,
    pub rho: Option<f64>,
    pub mu: Option<f64>,
    pub predicted_count: u64,
    pub error_count: u64,
    pub distant_count: u64,
    pub near_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub mmde: Option<f64>,
    pub mmde_defined_classes: usize,
    pub per_class: IndexMap<String, ClassDistanceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub classification: ClassificationReport,
    pub distance: DistanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeReport {
    pub label: ScopeLabel,
    pub selected_count: u64,
    pub selected_fraction: f64,
    pub per_model: IndexMap<String, ModelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_echo: ConfigEcho,
    pub models: Vec<String>,
    pub scopes: Vec<ScopeReport>,
}

/// Assembles the report from per-scope evaluation results.
pub fn build_report(
    config: &EvalConfig,
    scoped: &[(&EvalScope, &[ScopedModelMetrics])],
) -> MetricsReport {
    let class_names = config.class_names();
    let models: Vec<String> = scoped
        .first()
        .map(|(_, entries)| entries.iter().map(|e| e.model_name.clone()).collect())
        .unwrap_or_default();

    let scopes = scoped
        .iter()
        .map(|(scope, entries)| {
            let per_model = entries
                .iter()
                .map(|entry| {
                    let iou: IndexMap<String, Option<f64>> = class_names
                        .iter()
                        .cloned()
                        .zip(entry.classification.iou_per_class.iter().copied())
                        .collect();
                    let per_class: IndexMap<String, ClassDistanceReport> = class_names
                        .iter()
                        .enumerate()
                        .map(|(c, name)| {
                            let stats = entry.distance.class(ClassId(c as u16));
                            (
                                name.clone(),
                                ClassDistanceReport {
                                    mde: stats.mde,
                                    rho: stats.rho,
                                    mu: stats.mu,
                                    predicted_count: stats.predicted_count,
                                    error_count: stats.error_count,
                                    distant_count: stats.distant_count,
                                    near_count: stats.near_count,
                                },
                            )
                        })
                        .collect();
                    (
                        entry.model_name.clone(),
                        ModelReport {
                            classification: ClassificationReport {
                                oa: entry.classification.overall_accuracy,
                                iou,
                                miou: entry.classification.mean_iou,
                                defined_classes: entry.classification.defined_class_count,
                            },
                            distance: DistanceReport {
                                mmde: entry.distance.mmde,
                                mmde_defined_classes: entry.distance.mmde_defined_classes,
                                per_class,
                            },
                        },
                    )
                })
                .collect();
            ScopeReport {
                label: scope.label(),
                selected_count: scope.selected_count() as u64,
                selected_fraction: scope.fraction(),
                per_model,
            }
        })
        .collect();

    MetricsReport {
        config_echo: ConfigEcho {
            classes: class_names.to_vec(),
            thresholds: class_names
                .iter()
                .cloned()
                .zip(config.thresholds().values().iter().copied())
                .collect(),
            policies: Policies::default(),
        },
        models,
        scopes,
    }
}

pub fn to_json_string(report: &MetricsReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

pub fn from_json_str(text: &str) -> Result<MetricsReport, serde_json::Error> {
    serde_json::from_str(text)
}

/// Formats with 6 significant digits in plain decimal notation.
fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

fn cell(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

pub fn to_csv_string(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(
        "model,scope,row,class,oa,miou,defined_classes,mmde,mmde_defined_classes,\
         iou,mde,rho,mu,predicted_count,error_count,distant_count,near_count\n",
    );
    for scope in &report.scopes {
        for (model, entry) in &scope.per_model {
            out.push_str(&format!(
                "{model},{label},summary,,{oa},{miou},{defined},{mmde},{mmde_defined},,,,,,,,\n",
                label = scope.label,
                oa = cell(entry.classification.oa),
                miou = cell(entry.classification.miou),
                defined = entry.classification.defined_classes,
                mmde = cell(entry.distance.mmde),
                mmde_defined = entry.distance.mmde_defined_classes,
            ));
            for (class, iou) in &entry.classification.iou {
                let d = &entry.distance.per_class[class];
                out.push_str(&format!(
                    "{model},{label},class,{class},,,,,,{iou},{mde},{rho},{mu},{pc},{ec},{dc},{nc}\n",
                    label = scope.label,
                    iou = cell(*iou),
                    mde = cell(d.mde),
                    rho = cell(d.rho),
                    mu = cell(d.mu),
                    pc = d.predicted_count,
                    ec = d.error_count,
                    dc = d.distant_count,
                    nc = d.near_count,
                ));
            }
        }
    }
    out
}

/// Writes the report to `path` in the requested format.
pub fn emit_report(
    report: &MetricsReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<(), Error> {
    let text = match format {
        ReportFormat::Json => to_json_string(report),
        ReportFormat::Csv => to_csv_string(report),
    };
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::class_distance_stats;
    use crate::hard::{compute_hard_points, evaluate_scoped};
    use crate::model::{partition_by_class, LabeledCloud, PredictionSet};
    use crate::spatial::build_class_indexes;

    fn tiny_report() -> MetricsReport {
        let config = EvalConfig::from_parts(
            vec!["ground".into(), "building".into()],
            vec![2.0, 10.0],
        )
        .unwrap();
        let cloud = LabeledCloud::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 5.0, 0.0]],
            vec![ClassId(0), ClassId(0), ClassId(1)],
        )
        .unwrap();
        let preds = vec![PredictionSet::new(
            "m",
            vec![ClassId(0), ClassId(1), ClassId(1)],
        )];
        let part = partition_by_class(cloud.gt_labels(), 2);
        let indexes = build_class_indexes(&cloud, &part);
        let full = EvalScope::full(cloud.len());
        let hard = compute_hard_points(&cloud, &preds).unwrap();
        let full_entries =
            evaluate_scoped(&cloud, &preds, &full, &indexes, config.thresholds()).unwrap();
        let hard_entries =
            evaluate_scoped(&cloud, &preds, &hard, &indexes, config.thresholds()).unwrap();
        build_report(
            &config,
            &[(&full, &full_entries), (&hard, &hard_entries)],
        )
    }

    #[test]
    fn json_round_trip_preserves_values() {
        let report = tiny_report();
        let text = to_json_string(&report);
        let reparsed = from_json_str(&text).unwrap();
        assert_eq!(reparsed, report);
    }

    #[test]
    fn undefined_serializes_as_null() {
        let config =
            EvalConfig::from_parts(vec!["a".into(), "b".into()], vec![1.0, 1.0]).unwrap();
        let cloud = LabeledCloud::new(vec![[0.0; 3]], vec![ClassId(0)]).unwrap();
        let preds = vec![PredictionSet::new("m", vec![ClassId(0)])];
        let part = partition_by_class(cloud.gt_labels(), 2);
        let indexes = build_class_indexes(&cloud, &part);
        let full = EvalScope::full(1);
        let bundle =
            class_distance_stats(&cloud, &preds[0], &full, &indexes, config.thresholds())
                .unwrap();
        assert_eq!(bundle.class(ClassId(1)).mu, None);

        let entries =
            evaluate_scoped(&cloud, &preds, &full, &indexes, config.thresholds()).unwrap();
        let report = build_report(&config, &[(&full, &entries)]);
        let text = to_json_string(&report);
        assert!(text.contains("\"mu\": null"));
        assert!(!text.contains("\"mu\": 0"));
    }

    #[test]
    fn empty_scope_block_is_present() {
        let config =
            EvalConfig::from_parts(vec!["a".into()], vec![1.0]).unwrap();
        let cloud = LabeledCloud::new(vec![[0.0; 3]], vec![ClassId(0)]).unwrap();
        let preds = vec![PredictionSet::new("m", vec![ClassId(0)])];
        let part = partition_by_class(cloud.gt_labels(), 1);
        let indexes = build_class_indexes(&cloud, &part);
        let hard = compute_hard_points(&cloud, &preds).unwrap();
        let entries =
            evaluate_scoped(&cloud, &preds, &hard, &indexes, config.thresholds()).unwrap();
        let report = build_report(&config, &[(&hard, &entries)]);
        assert_eq!(report.scopes[0].selected_count, 0);
        assert_eq!(report.scopes[0].per_model["m"].classification.oa, None);
        let text = to_json_string(&report);
        assert!(text.contains("\"selected_count\": 0"));
    }

    #[test]
    fn csv_has_one_class_row_per_model_scope_class() {
        let report = tiny_report();
        let csv = to_csv_string(&report);
        let class_rows = csv.lines().skip(1).filter(|l| l.contains(",class,")).count();
        // 2 scopes x 1 model x 2 classes
        assert_eq!(class_rows, 4);
        let summary_rows = csv.lines().skip(1).filter(|l| l.contains(",summary,")).count();
        assert_eq!(summary_rows, 2);
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.5), "1.50000");
        assert_eq!(sig6(0.0012345678), "0.00123457");
        assert_eq!(sig6(123456.78), "123457");
        assert_eq!(sig6(0.0), "0");
    }
}
