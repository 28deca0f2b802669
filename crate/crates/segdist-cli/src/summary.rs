//! Human-facing summary tables printed after an evaluation.
//!
//! One section per scope: a headline table (OA, mIoU, mMDE) and per-class
//! IoU and MDE tables, with the best value per column set in bold when
//! stdout is a terminal and `NO_COLOR` is unset. Undefined statistics
//! render as `-`.

use std::io::IsTerminal;

use segdist::io::report::{MetricsReport, ScopeReport};

const BOLD: &str = "\x1b[1m";
const RESET: &str = "\x1b[0m";

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn fmt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "-".to_owned(),
    }
}

/// Index of the best defined value, or None when no value is defined or
/// fewer than two are (bolding a single row is noise).
fn best_index(values: &[Option<f64>], higher_is_better: bool) -> Option<usize> {
    let defined = values.iter().filter(|v| v.is_some()).count();
    if defined < 2 {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            let better = match best {
                None => true,
                Some((_, b)) => {
                    if higher_is_better {
                        v > b
                    } else {
                        v < b
                    }
                }
            };
            if better {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Per data column (excluding the model column): which row is bold.
    bold: Vec<Option<usize>>,
}

impl Table {
    fn render(&self, color: bool) -> String {
        let n_cols = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let mut out = String::new();
        for (i, h) in self.header.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{h:<width$}", width = widths[i]));
        }
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            for (i, cell) in row.iter().enumerate().take(n_cols) {
                if i > 0 {
                    out.push_str("  ");
                }
                let is_bold = color && i > 0 && self.bold.get(i - 1) == Some(&Some(r));
                if is_bold {
                    out.push_str(BOLD);
                }
                out.push_str(&format!("{cell:<width$}", width = widths[i]));
                if is_bold {
                    out.push_str(RESET);
                }
            }
            out.push('\n');
        }
        out
    }
}

fn scope_section(scope: &ScopeReport, classes: &[String], color: bool) -> String {
    let models: Vec<&String> = scope.per_model.keys().collect();
    let mut out = format!(
        "== scope: {} ({} points, {:.2}% of cloud) ==\n",
        scope.label,
        scope.selected_count,
        100.0 * scope.selected_fraction
    );

    // headline: OA, mIoU, mMDE
    let oa: Vec<Option<f64>> = models
        .iter()
        .map(|m| scope.per_model[*m].classification.oa)
        .collect();
    let miou: Vec<Option<f64>> = models
        .iter()
        .map(|m| scope.per_model[*m].classification.miou)
        .collect();
    let mmde: Vec<Option<f64>> = models
        .iter()
        .map(|m| scope.per_model[*m].distance.mmde)
        .collect();
    let headline = Table {
        header: vec![
            "model".into(),
            "OA".into(),
            "mIoU".into(),
            "mMDE[m]".into(),
        ],
        rows: models
            .iter()
            .enumerate()
            .map(|(r, m)| {
                vec![
                    (*m).clone(),
                    fmt(oa[r]),
                    fmt(miou[r]),
                    fmt(mmde[r]),
                ]
            })
            .collect(),
        bold: vec![
            best_index(&oa, true),
            best_index(&miou, true),
            best_index(&mmde, false),
        ],
    };
    out.push_str(&headline.render(color));

    // per-class IoU and MDE
    for (title, higher_is_better) in [("IoU", true), ("MDE[m]", false)] {
        let mut header = vec![format!("{title} by class")];
        header.extend(classes.iter().cloned());
        let mut columns: Vec<Vec<Option<f64>>> = Vec::with_capacity(classes.len());
        for class in classes {
            let column: Vec<Option<f64>> = models
                .iter()
                .map(|m| {
                    let entry = &scope.per_model[*m];
                    if higher_is_better {
                        entry.classification.iou[class]
                    } else {
                        entry.distance.per_class[class].mde
                    }
                })
                .collect();
            columns.push(column);
        }
        let table = Table {
            header,
            rows: models
                .iter()
                .enumerate()
                .map(|(r, m)| {
                    let mut row = vec![(*m).clone()];
                    row.extend(columns.iter().map(|col| fmt(col[r])));
                    row
                })
                .collect(),
            bold: columns
                .iter()
                .map(|col| best_index(col, higher_is_better))
                .collect(),
        };
        out.push('\n');
        out.push_str(&table.render(color));
    }
    out
}

pub fn render(report: &MetricsReport) -> String {
    let color = use_color();
    let mut out = String::new();
    for (i, scope) in report.scopes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&scope_section(scope, &report.config_echo.classes, color));
    }
    out
}
