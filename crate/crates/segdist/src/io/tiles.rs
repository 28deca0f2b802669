//! Merging predictions from overlapping tiles.
//!
//! A point covered by several tiles has one probability row per covering
//! tile and model. Global point identity is the exact (x, y, z) triple
//! matched bitwise; no fuzzy-match radius is invented, and a diagnostic
//! counts ground-truth labels that disagree between duplicates. Merged
//! labels are the argmax of the arithmetic mean of a point's rows, ties
//! broken toward the lowest class id.
//!
//! Rows are put in a canonical order before the compensated mean, so
//! permuting the tile list cannot change a single output bit.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, MergeError, ValidationError};
use crate::io::config::EvalConfig;
use crate::io::table::{parse_str, RawTable};
use crate::model::{ClassId, LabeledCloud, Position, Probabilities, PredictionSet};
use crate::sum::CompensatedSum;

/// One tile's worth of inputs: positions (after applying the tile origin
/// offset), raw ground-truth labels, and per-model probability rows.
#[derive(Debug, Clone)]
pub struct Tile {
    pub name: String,
    pub positions: Vec<Position>,
    pub gt: Vec<u32>,
    /// Row-major `n x n_classes` per model, in stack model order.
    pub probs: Vec<Vec<f64>>,
}

/// Tiles plus the model set and class count they were validated against.
#[derive(Debug, Clone)]
pub struct TileStack {
    pub model_names: Vec<String>,
    pub n_classes: usize,
    pub tiles: Vec<Tile>,
}

/// Merge outcome diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeDiagnostics {
    pub tiles: usize,
    pub global_points: usize,
    /// Rows beyond the first per global point, summed over points.
    pub duplicate_rows: usize,
    /// Duplicates whose ground-truth label disagrees with the first
    /// occurrence; the first occurrence wins.
    pub gt_conflicts: usize,
    /// Largest number of tiles covering a single point.
    pub max_coverage: usize,
}

/// Everything `merge_tiles` produces.
#[derive(Debug)]
pub struct MergedTiles {
    pub cloud: LabeledCloud,
    pub preds: Vec<PredictionSet>,
    pub diagnostics: MergeDiagnostics,
}

/// Builds a stack from already-parsed tables. `origin` per tile is added
/// to its positions; tiles storing absolute coordinates pass zeros.
pub fn stack_tiles(
    tables: Vec<(String, RawTable, [f64; 3])>,
    config: &EvalConfig,
) -> Result<TileStack, Error> {
    if tables.is_empty() {
        return Err(MergeError::NoTiles.into());
    }
    let n_classes = config.n_classes();

    // model set: from config when given, else every prob-carrying model
    // of the first tile, in column order
    let model_names: Vec<String> = match config.models.clone() {
        Some(models) => models,
        None => tables[0]
            .1
            .models
            .iter()
            .filter(|m| m.probs.is_some())
            .map(|m| m.name.clone())
            .collect(),
    };
    if model_names.is_empty() {
        return Err(ValidationError::NoModels.into());
    }

    let mut tiles = Vec::with_capacity(tables.len());
    for (name, raw, origin) in tables {
        let mut probs = Vec::with_capacity(model_names.len());
        for model in &model_names {
            let Some(raw_model) = raw.models.iter().find(|m| &m.name == model) else {
                let got: Vec<String> = raw.models.iter().map(|m| m.name.clone()).collect();
                return Err(MergeError::ModelSetMismatch {
                    tile: name,
                    expected: model_names.clone(),
                    got,
                }
                .into());
            };
            let Some((width, values)) = &raw_model.probs else {
                return Err(MergeError::MissingProbabilities {
                    tile: name,
                    model: model.clone(),
                }
                .into());
            };
            if *width != n_classes {
                return Err(MergeError::ClassCountMismatch {
                    tile: name,
                    expected: n_classes,
                    got: *width,
                }
                .into());
            }
            let matrix = Probabilities::new(values.clone(), n_classes);
            for row in 0..matrix.n_rows() {
                matrix.check_row(model, row, crate::model::PROBABILITY_SUM_TOL)?;
            }
            probs.push(values.clone());
        }
        let positions = raw
            .positions
            .iter()
            .map(|p| [p[0] + origin[0], p[1] + origin[1], p[2] + origin[2]])
            .collect();
        tiles.push(Tile {
            name,
            positions,
            gt: raw.gt.clone(),
            probs,
        });
    }

    Ok(TileStack {
        model_names,
        n_classes,
        tiles,
    })
}

/// Reads tile files and stacks them (absolute coordinates, zero origins).
pub fn stack_tile_files(
    paths: &[impl AsRef<Path>],
    config: &EvalConfig,
) -> Result<TileStack, Error> {
    let mut tables = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let raw = parse_str(&text)?;
        tables.push((path.display().to_string(), raw, [0.0; 3]));
    }
    stack_tiles(tables, config)
}

/// Merges a stack into one cloud with one label per model per point.
pub fn merge_tiles(stack: &TileStack) -> Result<MergedTiles, Error> {
    let n_classes = stack.n_classes;
    let n_models = stack.model_names.len();

    // global identity: first-appearance order over bitwise (x, y, z)
    let mut order: HashMap<[u64; 3], usize> = HashMap::new();
    let mut positions: Vec<Position> = Vec::new();
    let mut gt: Vec<u32> = Vec::new();
    // per global point, per model, the covering rows
    let mut rows: Vec<Vec<Vec<&[f64]>>> = Vec::new();
    let mut duplicate_rows = 0usize;
    let mut gt_conflicts = 0usize;

    for tile in &stack.tiles {
        for (i, position) in tile.positions.iter().enumerate() {
            let key = [
                position[0].to_bits(),
                position[1].to_bits(),
                position[2].to_bits(),
            ];
            let row_per_model = |m: usize| stack.tiles_row(tile, m, i);
            match order.get(&key) {
                Some(&global) => {
                    duplicate_rows += 1;
                    if gt[global] != tile.gt[i] {
                        gt_conflicts += 1;
                    }
                    for (m, model_rows) in rows[global].iter_mut().enumerate() {
                        model_rows.push(row_per_model(m));
                    }
                }
                None => {
                    let global = positions.len();
                    order.insert(key, global);
                    positions.push(*position);
                    gt.push(tile.gt[i]);
                    rows.push((0..n_models).map(|m| vec![row_per_model(m)]).collect());
                }
            }
        }
    }

    let max_coverage = rows.iter().map(|r| r[0].len()).max().unwrap_or(0);
    let diagnostics = MergeDiagnostics {
        tiles: stack.tiles.len(),
        global_points: positions.len(),
        duplicate_rows,
        gt_conflicts,
        max_coverage,
    };

    let gt_labels = gt
        .iter()
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
        .collect::<Result<Vec<_>, _>>()?;
    let cloud = LabeledCloud::new(positions, gt_labels)?;

    let preds = (0..n_models)
        .map(|m| {
            let merged: Vec<(ClassId, Vec<f64>)> = rows
                .par_iter()
                .map(|point_rows| merge_point(&point_rows[m], n_classes))
                .collect();
            let mut labels = Vec::with_capacity(merged.len());
            let mut values = Vec::with_capacity(merged.len() * n_classes);
            for (label, mean) in merged {
                labels.push(label);
                values.extend_from_slice(&mean);
            }
            PredictionSet::new(stack.model_names[m].clone(), labels)
                .with_probabilities(Probabilities::new(values, n_classes))
        })
        .collect();

    Ok(MergedTiles {
        cloud,
        preds,
        diagnostics,
    })
}

impl TileStack {
    fn tiles_row<'a>(&self, tile: &'a Tile, model: usize, row: usize) -> &'a [f64] {
        let w = self.n_classes;
        &tile.probs[model][row * w..(row + 1) * w]
    }
}

/// Mean of the covering rows then argmax, lowest class id on ties. Rows
/// are sorted lexicographically first so the sum is independent of tile
/// order.
fn merge_point(covering: &[&[f64]], n_classes: usize) -> (ClassId, Vec<f64>) {
    let mut sorted: Vec<&[f64]> = covering.to_vec();
    sorted.sort_unstable_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let k = sorted.len() as f64;
    let mean: Vec<f64> = (0..n_classes)
        .map(|c| {
            let sum: CompensatedSum = sorted.iter().map(|row| row[c]).collect();
            sum.value() / k
        })
        .collect();

    let mut best = 0usize;
    for c in 1..n_classes {
        if mean[c] > mean[best] {
            best = c;
        }
    }
    (ClassId(best as u16), mean)
}

/// Argmax of the mean of `rows`, recomputed naively; the oracle for
/// [`merge_tiles`] label selection.
pub fn naive_merged_label(rows: &[Vec<f64>], n_classes: usize) -> ClassId {
    let mut best = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for c in 0..n_classes {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
        if mean > best_value {
            best_value = mean;
            best = c;
        }
    }
    ClassId(best as u16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn config2() -> EvalConfig {
        EvalConfig::from_parts(vec!["a".into(), "b".into()], vec![1.0, 1.0]).unwrap()
    }

    fn tile(name: &str, positions: Vec<Position>, gt: Vec<u32>, probs: Vec<f64>) -> Tile {
        Tile {
            name: name.into(),
            positions,
            gt,
            probs: vec![probs],
        }
    }

    fn stack_of(tiles: Vec<Tile>) -> TileStack {
        TileStack {
            model_names: vec!["m".into()],
            n_classes: 2,
            tiles,
        }
    }

    #[test]
    fn single_row_argmax() {
        let stack = stack_of(vec![tile(
            "t0",
            vec![[0.0, 0.0, 0.0]],
            vec![0],
            vec![0.2, 0.8],
        )]);
        let merged = merge_tiles(&stack).unwrap();
        assert_eq!(merged.preds[0].pred_labels, vec![ClassId(1)]);
        assert_eq!(merged.diagnostics.global_points, 1);
        assert_eq!(merged.diagnostics.max_coverage, 1);
    }

    #[test]
    fn tie_breaks_to_lowest_class() {
        let p = [1.0, 2.0, 3.0];
        let stack = stack_of(vec![
            tile("t0", vec![p], vec![0], vec![0.9, 0.1]),
            tile("t1", vec![p], vec![0], vec![0.1, 0.9]),
        ]);
        let merged = merge_tiles(&stack).unwrap();
        // mean (0.5, 0.5): lowest class id wins
        assert_eq!(merged.preds[0].pred_labels, vec![ClassId(0)]);
        assert_eq!(merged.diagnostics.duplicate_rows, 1);
        assert_eq!(merged.diagnostics.max_coverage, 2);
    }

    #[test]
    fn tile_order_does_not_change_labels() {
        let mut rng = SplitMix64::new(4);
        let points: Vec<Position> = (0..40)
            .map(|_| [rng.range_f64(0.0, 10.0), rng.range_f64(0.0, 10.0), 0.0])
            .collect();
        let mk_tile = |name: &str, rng: &mut SplitMix64| {
            let probs: Vec<f64> = (0..points.len())
                .flat_map(|_| {
                    let p = rng.next_f64();
                    [p, 1.0 - p]
                })
                .collect();
            tile(name, points.clone(), vec![0; points.len()], probs)
        };
        let t0 = mk_tile("t0", &mut rng);
        let t1 = mk_tile("t1", &mut rng);
        let t2 = mk_tile("t2", &mut rng);

        let forward = merge_tiles(&stack_of(vec![t0.clone(), t1.clone(), t2.clone()]))
            .unwrap();
        let backward =
            merge_tiles(&stack_of(vec![t2, t1, t0])).unwrap();

        // identical point set: compare labels keyed by position
        for (i, p) in forward.cloud.positions().iter().enumerate() {
            let j = backward
                .cloud
                .positions()
                .iter()
                .position(|q| q == p)
                .unwrap();
            assert_eq!(
                forward.preds[0].pred_labels[i],
                backward.preds[0].pred_labels[j]
            );
            assert_eq!(
                forward.preds[0].probabilities.as_ref().unwrap().row(i),
                backward.preds[0].probabilities.as_ref().unwrap().row(j)
            );
        }
    }

    #[test]
    fn random_stacks_match_naive_argmax() {
        let mut rng = SplitMix64::new(12);
        for _ in 0..50 {
            let coverage = 1 + rng.below(4) as usize;
            let n_classes = 2 + rng.below(4) as usize;
            let rows: Vec<Vec<f64>> = (0..coverage)
                .map(|_| {
                    let mut row: Vec<f64> = (0..n_classes).map(|_| rng.next_f64()).collect();
                    let sum: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= sum);
                    row
                })
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let (label, _) = merge_point(&refs, n_classes);
            assert_eq!(label, naive_merged_label(&rows, n_classes));
        }
    }

    #[test]
    fn identical_covering_rows_keep_their_argmax() {
        let p = [4.0, 4.0, 0.0];
        let row = vec![0.25, 0.75];
        let tiles: Vec<Tile> = (0..3)
            .map(|i| tile(&format!("t{i}"), vec![p], vec![1], row.clone()))
            .collect();
        let merged = merge_tiles(&stack_of(tiles)).unwrap();
        assert_eq!(merged.preds[0].pred_labels, vec![ClassId(1)]);
        assert_eq!(
            merged.preds[0].probabilities.as_ref().unwrap().row(0),
            row.as_slice()
        );
    }

    #[test]
    fn gt_conflicts_are_counted_first_wins() {
        let p = [0.0, 0.0, 0.0];
        let stack = stack_of(vec![
            tile("t0", vec![p], vec![0], vec![1.0, 0.0]),
            tile("t1", vec![p], vec![1], vec![1.0, 0.0]),
        ]);
        let merged = merge_tiles(&stack).unwrap();
        assert_eq!(merged.diagnostics.gt_conflicts, 1);
        assert_eq!(merged.cloud.gt_labels()[0], ClassId(0));
    }

    #[test]
    fn missing_probabilities_is_an_error() {
        let raw = parse_str("x,y,z,gt,pred_m\n0,0,0,0,0\n").unwrap();
        let err = stack_tiles(vec![("t".into(), raw, [0.0; 3])], &{
            let mut c = config2();
            c.models = Some(vec!["m".into()]);
            c
        })
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Merge(MergeError::MissingProbabilities { .. })
        ));
    }

    #[test]
    fn origins_shift_positions() {
        let raw = parse_str("x,y,z,gt,prob_m_0,prob_m_1\n1,1,0,0,1,0\n").unwrap();
        let stack = stack_tiles(vec![("t".into(), raw, [10.0, 20.0, 0.0])], &config2()).unwrap();
        assert_eq!(stack.tiles[0].positions[0], [11.0, 21.0, 0.0]);
    }
}
