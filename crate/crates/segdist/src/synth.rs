//! Parametric synthetic scenes with controlled error geometry.
//!
//! A scene is a jittered ground grid, one box building (roof plus walls),
//! and scattered vegetation, over three classes: ground (tau 2 m),
//! building (tau 10 m), vegetation (tau 3 m). Prediction sets are derived
//! from the ground truth by error recipes that relabel building points as
//! ground:
//!
//! * `boundary-band` picks points within `band` meters of true ground
//!   (wall bases), so every injected error is a near error when
//!   `band < tau_ground`;
//! * `displaced-blob` picks the roof cluster, at least `min_offset`
//!   meters from any true ground point, so every injected error is
//!   distant when `min_offset > tau_ground`.
//!
//! Two recipes with equal error counts force identical confusion matrices
//! while the distance statistics differ, which is the fixture the
//! acceptance suite uses to show that models tied on IoU can diverge by
//! a factor of two or more on the distance side.
//!
//! Generation is single-threaded and draws from one SplitMix64 stream in
//! a fixed order, so one seed pins every coordinate bit.

use serde::{Deserialize, Serialize};

use crate::error::{ParseError, SceneError};
use crate::io::config::EvalConfig;
use crate::model::{partition_by_class, ClassId, LabeledCloud, Position, PredictionSet};
use crate::rng::SplitMix64;
use crate::spatial::build_class_indexes;

pub const GROUND: ClassId = ClassId(0);
pub const BUILDING: ClassId = ClassId(1);
pub const VEGETATION: ClassId = ClassId(2);

const TAU_GROUND: f64 = 2.0;
const TAU_BUILDING: f64 = 10.0;
const TAU_VEGETATION: f64 = 3.0;

/// An error recipe: which points one synthetic model gets wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelRecipe {
    /// Relabels `errors` building points lying within `band` meters of
    /// true ground as ground.
    BoundaryBand {
        name: String,
        band: f64,
        errors: usize,
    },
    /// Relabels the `errors` building points closest to the roof center,
    /// all at least `min_offset` meters from true ground, as ground.
    DisplacedBlob {
        name: String,
        min_offset: f64,
        errors: usize,
    },
}

impl ModelRecipe {
    pub fn name(&self) -> &str {
        match self {
            ModelRecipe::BoundaryBand { name, .. } => name,
            ModelRecipe::DisplacedBlob { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    /// Nominal side of the square scene in meters.
    pub extent: f64,
    pub ground_spacing: f64,
    pub building_min: [f64; 2],
    pub building_max: [f64; 2],
    pub building_height: f64,
    pub roof_spacing: f64,
    pub wall_spacing: f64,
    pub vegetation_count: usize,
    pub models: Vec<ModelRecipe>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            extent: 100.0,
            ground_spacing: 0.5,
            building_min: [30.0, 30.0],
            building_max: [50.0, 50.0],
            building_height: 8.0,
            roof_spacing: 0.5,
            wall_spacing: 0.4,
            vegetation_count: 3000,
            models: vec![
                ModelRecipe::BoundaryBand {
                    name: "boundary-confuser".to_owned(),
                    band: 1.0,
                    errors: 150,
                },
                ModelRecipe::DisplacedBlob {
                    name: "blob-confuser".to_owned(),
                    min_offset: 6.0,
                    errors: 150,
                },
            ],
        }
    }
}

impl SceneSpec {
    pub fn parse_toml(text: &str) -> Result<Self, ParseError> {
        toml::from_str(text).map_err(|e| ParseError::SceneSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    fn validate(&self) -> Result<(), SceneError> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.extent) {
            return Err(SceneError::Degenerate(format!(
                "extent must be positive, got {}",
                self.extent
            )));
        }
        for (label, v) in [
            ("ground_spacing", self.ground_spacing),
            ("roof_spacing", self.roof_spacing),
            ("wall_spacing", self.wall_spacing),
            ("building_height", self.building_height),
        ] {
            if !finite_pos(v) {
                return Err(SceneError::Degenerate(format!(
                    "{label} must be positive, got {v}"
                )));
            }
        }
        for axis in 0..2 {
            if !(self.building_min[axis].is_finite()
                && self.building_max[axis].is_finite()
                && self.building_min[axis] < self.building_max[axis]
                && self.building_min[axis] > 0.0
                && self.building_max[axis] < self.extent)
            {
                return Err(SceneError::Degenerate(
                    "building box must lie strictly inside the extent".to_owned(),
                ));
            }
        }
        let mut names = std::collections::HashSet::new();
        for recipe in &self.models {
            if recipe.name().is_empty() || !names.insert(recipe.name().to_owned()) {
                return Err(SceneError::Degenerate(format!(
                    "model names must be unique and non-empty, got '{}'",
                    recipe.name()
                )));
            }
            match recipe {
                ModelRecipe::BoundaryBand { band, .. } => {
                    if !(band.is_finite() && *band > 0.0 && *band < TAU_GROUND) {
                        return Err(SceneError::Degenerate(format!(
                            "band must satisfy 0 < band < {TAU_GROUND}, got {band}"
                        )));
                    }
                }
                ModelRecipe::DisplacedBlob { min_offset, .. } => {
                    if !(min_offset.is_finite() && *min_offset > TAU_GROUND) {
                        return Err(SceneError::Degenerate(format!(
                            "min_offset must exceed {TAU_GROUND}, got {min_offset}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The evaluation config matching generated scenes.
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig::from_parts(
            vec![
                "ground".to_owned(),
                "building".to_owned(),
                "vegetation".to_owned(),
            ],
            vec![TAU_GROUND, TAU_BUILDING, TAU_VEGETATION],
        )
        .expect("scene config is valid")
    }
}

/// Which model the generator guarantees to be spatially better-behaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedContrast {
    pub perturbed_class: ClassId,
    /// The boundary-band model: lower MDE and rho on the perturbed class.
    pub near_model: String,
    /// The displaced-blob model: higher MDE and rho.
    pub distant_model: String,
}

#[derive(Debug)]
pub struct GeneratedScene {
    pub spec: SceneSpec,
    pub cloud: LabeledCloud,
    pub preds: Vec<PredictionSet>,
    pub config: EvalConfig,
    pub contrast: Option<ExpectedContrast>,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<GeneratedScene, SceneError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut positions: Vec<Position> = Vec::new();
    let mut labels: Vec<ClassId> = Vec::new();

    let [bx0, by0] = spec.building_min;
    let [bx1, by1] = spec.building_max;
    let inside_footprint = |x: f64, y: f64| x >= bx0 && x <= bx1 && y >= by0 && y <= by1;

    // ground grid, jittered, excluding the building footprint
    let steps = (spec.extent / spec.ground_spacing).floor() as usize;
    let xy_jitter = 0.2 * spec.ground_spacing;
    for ix in 0..=steps {
        for iy in 0..=steps {
            let x = ix as f64 * spec.ground_spacing;
            let y = iy as f64 * spec.ground_spacing;
            if inside_footprint(x, y) {
                continue;
            }
            positions.push([
                x + rng.range_f64(-xy_jitter, xy_jitter),
                y + rng.range_f64(-xy_jitter, xy_jitter),
                rng.range_f64(-0.05, 0.05),
            ]);
            labels.push(GROUND);
        }
    }

    // roof grid
    let roof_x = ((bx1 - bx0) / spec.roof_spacing).floor() as usize;
    let roof_y = ((by1 - by0) / spec.roof_spacing).floor() as usize;
    for ix in 0..=roof_x {
        for iy in 0..=roof_y {
            positions.push([
                bx0 + ix as f64 * spec.roof_spacing,
                by0 + iy as f64 * spec.roof_spacing,
                spec.building_height + rng.range_f64(-0.05, 0.05),
            ]);
            labels.push(BUILDING);
        }
    }

    // walls: columns along the perimeter, rows of points up the face
    let z_rows = (spec.building_height / spec.wall_spacing).ceil() as usize;
    let perimeter = [
        ([bx0, by0], [bx1, by0]),
        ([bx1, by0], [bx1, by1]),
        ([bx1, by1], [bx0, by1]),
        ([bx0, by1], [bx0, by0]),
    ];
    for (from, to) in perimeter {
        let length = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
        let columns = (length / spec.wall_spacing).floor() as usize;
        for col in 0..columns {
            let t = col as f64 / columns as f64;
            let x = from[0] + t * (to[0] - from[0]);
            let y = from[1] + t * (to[1] - from[1]);
            for row in 1..z_rows {
                let z = row as f64 * spec.wall_spacing;
                if z >= spec.building_height {
                    break;
                }
                positions.push([x, y, z + rng.range_f64(-0.05, 0.05)]);
                labels.push(BUILDING);
            }
        }
    }

    // scattered vegetation outside the footprint
    let veg_top = (0.8 * spec.building_height).max(1.0);
    for _ in 0..spec.vegetation_count {
        loop {
            let x = rng.range_f64(0.0, spec.extent);
            let y = rng.range_f64(0.0, spec.extent);
            if !inside_footprint(x, y) {
                positions.push([x, y, rng.range_f64(0.3, veg_top)]);
                labels.push(VEGETATION);
                break;
            }
        }
    }

    let cloud = LabeledCloud::new(positions, labels)
        .map_err(|e| SceneError::Degenerate(e.to_string()))?;

    // distances from building points to true ground, for recipe selection
    let partition = partition_by_class(cloud.gt_labels(), 3);
    let indexes = build_class_indexes(&cloud, &partition);
    let building_points: Vec<u32> = partition.indices(BUILDING).to_vec();
    let ground_distance: Vec<f64> = building_points
        .iter()
        .map(|&i| {
            indexes
                .nearest_distance(GROUND, &cloud.positions()[i as usize])
                .expect("ground class exists")
        })
        .collect();

    let roof_center = [
        (bx0 + bx1) / 2.0,
        (by0 + by1) / 2.0,
        spec.building_height,
    ];

    let mut preds = Vec::with_capacity(spec.models.len());
    for recipe in &spec.models {
        let selected: Vec<u32> = match recipe {
            ModelRecipe::BoundaryBand { name, band, errors } => {
                let mut candidates: Vec<u32> = building_points
                    .iter()
                    .zip(&ground_distance)
                    .filter(|(_, &d)| d <= *band)
                    .map(|(&i, _)| i)
                    .collect();
                if candidates.len() < *errors {
                    return Err(SceneError::NotEnoughCandidates {
                        name: name.clone(),
                        needed: *errors,
                        available: candidates.len(),
                    });
                }
                // Fisher-Yates, then keep the head
                for i in (1..candidates.len()).rev() {
                    let j = rng.below(i as u64 + 1) as usize;
                    candidates.swap(i, j);
                }
                candidates.truncate(*errors);
                candidates
            }
            ModelRecipe::DisplacedBlob {
                name,
                min_offset,
                errors,
            } => {
                let mut candidates: Vec<(u32, f64)> = building_points
                    .iter()
                    .zip(&ground_distance)
                    .filter(|(_, &d)| d >= *min_offset)
                    .map(|(&i, _)| {
                        let p = cloud.positions()[i as usize];
                        let dx = p[0] - roof_center[0];
                        let dy = p[1] - roof_center[1];
                        let dz = p[2] - roof_center[2];
                        (i, dx * dx + dy * dy + dz * dz)
                    })
                    .collect();
                if candidates.len() < *errors {
                    return Err(SceneError::NotEnoughCandidates {
                        name: name.clone(),
                        needed: *errors,
                        available: candidates.len(),
                    });
                }
                candidates
                    .sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                candidates.truncate(*errors);
                candidates.into_iter().map(|(i, _)| i).collect()
            }
        };

        let mut pred_labels = cloud.gt_labels().to_vec();
        for &i in &selected {
            pred_labels[i as usize] = GROUND;
        }
        preds.push(PredictionSet::new(recipe.name().to_owned(), pred_labels));
    }

    let contrast = expected_contrast(&spec.models);

    Ok(GeneratedScene {
        spec: spec.clone(),
        cloud,
        preds,
        config: spec.eval_config(),
        contrast,
    })
}

/// The band/blob contrast is only promised when the scene bundles exactly
/// one recipe of each kind with the same nonzero error count.
fn expected_contrast(models: &[ModelRecipe]) -> Option<ExpectedContrast> {
    if models.len() != 2 {
        return None;
    }
    let band = models.iter().find_map(|m| match m {
        ModelRecipe::BoundaryBand { name, errors, .. } => Some((name.clone(), *errors)),
        _ => None,
    })?;
    let blob = models.iter().find_map(|m| match m {
        ModelRecipe::DisplacedBlob { name, errors, .. } => Some((name.clone(), *errors)),
        _ => None,
    })?;
    (band.1 == blob.1 && band.1 > 0).then_some(ExpectedContrast {
        perturbed_class: GROUND,
        near_model: band.0,
        distant_model: blob.0,
    })
}
