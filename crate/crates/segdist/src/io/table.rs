//! Columnar text table: the input/output format for clouds and predictions.
//!
//! UTF-8, one header line, comma or tab delimited (auto-detected from the
//! header). Required columns `x,y,z,gt`; any number of `pred_<model>`
//! label columns and `prob_<model>_<k>` per-class score columns; an
//! optional `hard` 0/1 column on export. Coordinates are finite decimals
//! in meters, labels non-negative integers. Row order is preserved
//! everywhere.
//!
//! Parsing is total: any input either yields a table or a positioned
//! error, never a panic, and anything the writer produces parses back to
//! an equal table.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, ParseError, ValidationError};
use crate::io::config::EvalConfig;
use crate::model::{ClassId, LabeledCloud, Position, Probabilities, PredictionSet};

/// Parsed but not yet config-bound table contents.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub positions: Vec<Position>,
    pub gt: Vec<u32>,
    pub models: Vec<RawModel>,
    pub hard: Option<Vec<bool>>,
}

/// Per-model columns found in a file, in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawModel {
    pub name: String,
    pub pred: Option<Vec<u32>>,
    /// Row-major scores and the number of classes covered by the columns.
    pub probs: Option<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    X,
    Y,
    Z,
    Gt,
    Hard,
    /// (model slot, )
    Pred(usize),
    /// (model slot, class index)
    Prob(usize, usize),
}

fn valid_model_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

struct HeaderLayout {
    delimiter: char,
    columns: Vec<Column>,
    model_names: Vec<String>,
    has_hard: bool,
}

fn parse_header(line: &str) -> Result<HeaderLayout, ParseError> {
    let delimiter = if line.contains('\t') { '\t' } else { ',' };
    let mut columns = Vec::new();
    let mut model_names: Vec<String> = Vec::new();
    let mut pred_seen: Vec<bool> = Vec::new();
    // per model: class indexes seen so far in prob columns
    let mut prob_classes: Vec<Vec<usize>> = Vec::new();
    let mut seen_xyzgt = [false; 4];
    let mut has_hard = false;

    let slot_for = |name: &str,
                        model_names: &mut Vec<String>,
                        pred_seen: &mut Vec<bool>,
                        prob_classes: &mut Vec<Vec<usize>>| {
        match model_names.iter().position(|m| m == name) {
            Some(i) => i,
            None => {
                model_names.push(name.to_owned());
                pred_seen.push(false);
                prob_classes.push(Vec::new());
                model_names.len() - 1
            }
        }
    };

    for field in line.split(delimiter) {
        let field = field.trim();
        let column = match field {
            "x" | "y" | "z" | "gt" => {
                let i = ["x", "y", "z", "gt"].iter().position(|&f| f == field).unwrap();
                if seen_xyzgt[i] {
                    return Err(ParseError::DuplicateColumn(field.to_owned()));
                }
                seen_xyzgt[i] = true;
                [Column::X, Column::Y, Column::Z, Column::Gt][i]
            }
            "hard" => {
                if has_hard {
                    return Err(ParseError::DuplicateColumn(field.to_owned()));
                }
                has_hard = true;
                Column::Hard
            }
            _ => {
                if let Some(name) = field.strip_prefix("pred_") {
                    if !valid_model_name(name) {
                        return Err(ParseError::UnknownColumn(field.to_owned()));
                    }
                    let slot = slot_for(name, &mut model_names, &mut pred_seen, &mut prob_classes);
                    if pred_seen[slot] {
                        return Err(ParseError::DuplicateColumn(field.to_owned()));
                    }
                    pred_seen[slot] = true;
                    Column::Pred(slot)
                } else if let Some(rest) = field.strip_prefix("prob_") {
                    // model names may contain underscores; the class index
                    // is always the last _-separated token
                    let Some((name, class_str)) = rest.rsplit_once('_') else {
                        return Err(ParseError::UnknownColumn(field.to_owned()));
                    };
                    let Ok(class) = class_str.parse::<usize>() else {
                        return Err(ParseError::UnknownColumn(field.to_owned()));
                    };
                    if !valid_model_name(name) {
                        return Err(ParseError::UnknownColumn(field.to_owned()));
                    }
                    let slot = slot_for(name, &mut model_names, &mut pred_seen, &mut prob_classes);
                    if prob_classes[slot].contains(&class) {
                        return Err(ParseError::DuplicateColumn(field.to_owned()));
                    }
                    prob_classes[slot].push(class);
                    Column::Prob(slot, class)
                } else {
                    return Err(ParseError::UnknownColumn(field.to_owned()));
                }
            }
        };
        columns.push(column);
    }

    for (required, present) in ["x", "y", "z", "gt"].iter().zip(seen_xyzgt) {
        if !present {
            return Err(ParseError::MissingColumn((*required).to_owned()));
        }
    }

    // probability columns for a model must cover classes 0..K contiguously
    for (slot, classes) in prob_classes.iter().enumerate() {
        if classes.is_empty() {
            continue;
        }
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &c)| i != c) {
            return Err(ParseError::Syntax {
                line: 1,
                msg: format!(
                    "prob_{}_* columns must cover classes 0..{} contiguously",
                    model_names[slot],
                    classes.len()
                ),
            });
        }
    }

    Ok(HeaderLayout {
        delimiter,
        columns,
        model_names,
        has_hard,
    })
}

/// Parses a full table from text.
pub fn parse_str(input: &str) -> Result<RawTable, ParseError> {
    let mut lines = input.lines();
    let header_line = lines.next().ok_or(ParseError::Syntax {
        line: 1,
        msg: "empty input".to_owned(),
    })?;
    let layout = parse_header(header_line)?;
    let n_fields = layout.columns.len();
    let n_models = layout.model_names.len();

    let mut positions: Vec<Position> = Vec::new();
    let mut gt: Vec<u32> = Vec::new();
    let mut hard: Vec<bool> = Vec::new();
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n_models];
    let mut probs: Vec<Vec<f64>> = vec![Vec::new(); n_models];
    let mut prob_width = vec![0usize; n_models];
    for col in &layout.columns {
        if let Column::Prob(slot, class) = col {
            prob_width[*slot] = prob_width[*slot].max(class + 1);
        }
    }
    let has_pred: Vec<bool> = (0..n_models)
        .map(|slot| layout.columns.contains(&Column::Pred(slot)))
        .collect();

    for (line_index, line) in lines.enumerate() {
        let line_no = line_index + 2;
        let mut fields = line.split(layout.delimiter);
        let mut position = [0.0f64; 3];
        let mut prob_row: Vec<Vec<f64>> = prob_width.iter().map(|&w| vec![0.0; w]).collect();

        for (seen, column) in layout.columns.iter().enumerate() {
            let Some(field) = fields.next() else {
                return Err(ParseError::Syntax {
                    line: line_no,
                    msg: format!("expected {n_fields} fields, got {seen}"),
                });
            };
            let field = field.trim();
            match *column {
                Column::X | Column::Y | Column::Z => {
                    let axis = match column {
                        Column::X => 0,
                        Column::Y => 1,
                        _ => 2,
                    };
                    position[axis] = parse_finite(field, line_no, ["x", "y", "z"][axis])?;
                }
                Column::Gt => gt.push(parse_label(field, line_no, "gt")?),
                Column::Hard => match field {
                    "0" => hard.push(false),
                    "1" => hard.push(true),
                    _ => {
                        return Err(ParseError::Value {
                            line: line_no,
                            column: "hard".to_owned(),
                            value: field.to_owned(),
                            expected: "0 or 1",
                        })
                    }
                },
                Column::Pred(slot) => {
                    let value = parse_label(field, line_no, &format!("pred_{}", layout.model_names[slot]))?;
                    preds[slot].push(value);
                }
                Column::Prob(slot, class) => {
                    let column_name =
                        format!("prob_{}_{}", layout.model_names[slot], class);
                    prob_row[slot][class] = parse_finite(field, line_no, &column_name)?;
                }
            }
        }
        if fields.next().is_some() {
            return Err(ParseError::Syntax {
                line: line_no,
                msg: format!("expected {n_fields} fields, got more"),
            });
        }

        positions.push(position);
        for slot in 0..n_models {
            probs[slot].extend_from_slice(&prob_row[slot]);
        }
    }

    let models = layout
        .model_names
        .iter()
        .enumerate()
        .map(|(slot, name)| RawModel {
            name: name.clone(),
            pred: has_pred[slot].then(|| std::mem::take(&mut preds[slot])),
            probs: (prob_width[slot] > 0)
                .then(|| (prob_width[slot], std::mem::take(&mut probs[slot]))),
        })
        .collect();

    Ok(RawTable {
        positions,
        gt,
        models,
        hard: layout.has_hard.then_some(hard),
    })
}

fn parse_finite(field: &str, line: usize, column: &str) -> Result<f64, ParseError> {
    let value: f64 = field.parse().map_err(|_| ParseError::Value {
        line,
        column: column.to_owned(),
        value: field.to_owned(),
        expected: "a decimal number",
    })?;
    if !value.is_finite() {
        return Err(ParseError::Value {
            line,
            column: column.to_owned(),
            value: field.to_owned(),
            expected: "a finite decimal number",
        });
    }
    Ok(value)
}

fn parse_label(field: &str, line: usize, column: &str) -> Result<u32, ParseError> {
    field.parse().map_err(|_| ParseError::Value {
        line,
        column: column.to_owned(),
        value: field.to_owned(),
        expected: "a non-negative integer label",
    })
}

/// Binds a parsed table to a config, producing the validated cloud and the
/// prediction sets usable for evaluation (models with `pred_` columns).
pub fn bind_for_eval(
    raw: &RawTable,
    config: &EvalConfig,
) -> Result<(LabeledCloud, Vec<PredictionSet>), Error> {
    let n_classes = config.n_classes();
    let gt_labels = bind_labels(&raw.gt, n_classes)?;
    let cloud = LabeledCloud::new(raw.positions.clone(), gt_labels).map_err(Error::from)?;

    let selected: Vec<&RawModel> = match config.models.as_deref() {
        Some(wanted) => wanted
            .iter()
            .map(|name| {
                raw.models
                    .iter()
                    .find(|m| &m.name == name && m.pred.is_some())
                    .ok_or_else(|| ParseError::MissingColumn(format!("pred_{name}")))
            })
            .collect::<Result<_, _>>()?,
        None => raw.models.iter().filter(|m| m.pred.is_some()).collect(),
    };

    let mut preds = Vec::with_capacity(selected.len());
    for model in selected {
        let labels = bind_labels(model.pred.as_ref().unwrap(), n_classes)?;
        let mut pred = PredictionSet::new(model.name.clone(), labels);
        if let Some((width, values)) = &model.probs {
            if *width != n_classes {
                return Err(ValidationError::ProbabilityClassCount {
                    model: model.name.clone(),
                    expected: n_classes,
                    got: *width,
                }
                .into());
            }
            pred = pred.with_probabilities(Probabilities::new(values.clone(), n_classes));
        }
        preds.push(pred);
    }
    Ok((cloud, preds))
}

fn bind_labels(raw: &[u32], n_classes: usize) -> Result<Vec<ClassId>, ValidationError> {
    raw.iter()
        .enumerate()
        .map(|(index, &label)| {
            if (label as usize) < n_classes {
                Ok(ClassId(label as u16))
            } else {
                Err(ValidationError::UnknownClass {
                    label,
                    index,
                    n_classes,
                })
            }
        })
        .collect()
}

/// Reads and binds a cloud file in one step.
pub fn parse_cloud_file(
    path: impl AsRef<Path>,
    config: &EvalConfig,
) -> Result<(LabeledCloud, Vec<PredictionSet>), Error> {
    let text = std::fs::read_to_string(path)?;
    let raw = parse_str(&text)?;
    bind_for_eval(&raw, config)
}

/// Writes a cloud, its prediction sets (probability columns included for
/// models that carry them), and an optional hard-point column.
pub fn write_table(
    mut dst: impl Write,
    cloud: &LabeledCloud,
    preds: &[PredictionSet],
    hard: Option<&[bool]>,
) -> std::io::Result<()> {
    let mut header = String::from("x,y,z,gt");
    for pred in preds {
        header.push_str(",pred_");
        header.push_str(&pred.model_name);
    }
    for pred in preds {
        if let Some(probs) = &pred.probabilities {
            for class in 0..probs.n_classes() {
                header.push_str(&format!(",prob_{}_{}", pred.model_name, class));
            }
        }
    }
    if hard.is_some() {
        header.push_str(",hard");
    }
    writeln!(dst, "{header}")?;

    let mut line = String::new();
    for i in 0..cloud.len() {
        line.clear();
        let p = cloud.positions()[i];
        line.push_str(&format!("{},{},{},{}", p[0], p[1], p[2], cloud.gt_labels()[i].0));
        for pred in preds {
            line.push_str(&format!(",{}", pred.pred_labels[i].0));
        }
        for pred in preds {
            if let Some(probs) = &pred.probabilities {
                for &v in probs.row(i) {
                    line.push_str(&format!(",{v}"));
                }
            }
        }
        if let Some(hard) = hard {
            line.push_str(if hard[i] { ",1" } else { ",0" });
        }
        writeln!(dst, "{line}")?;
    }
    Ok(())
}

/// [`write_table`] into a file at `path`.
pub fn write_table_file(
    path: impl AsRef<Path>,
    cloud: &LabeledCloud,
    preds: &[PredictionSet],
    hard: Option<&[bool]>,
) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    write_table(&mut writer, cloud, preds, hard)?;
    writer.flush()?;
    Ok(())
}
