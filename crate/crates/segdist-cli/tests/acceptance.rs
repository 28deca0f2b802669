//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers once its assertions hold.
//!
//! Run with `cargo test -p segdist-cli --test acceptance`.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use segdist::classification::{classification_stats, confusion_matrix};
use segdist::distance::{class_distance_stats, compute_point_records, ThresholdConfig};
use segdist::hard::{compute_hard_points, EvalScope};
use segdist::io::table::write_table_file;
use segdist::io::tiles::{merge_tiles, naive_merged_label, Tile, TileStack};
use segdist::model::{partition_by_class, ClassId, LabeledCloud, Position, PredictionSet};
use segdist::oracle::naive_distance_bundle;
use segdist::rng::SplitMix64;
use segdist::spatial::{brute_force_nearest, build_class_indexes};
use segdist::synth::{generate_scene, SceneSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_segdist"))
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("segdist-acceptance-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn random_cloud(rng: &mut SplitMix64, n: usize, n_classes: u16) -> LabeledCloud {
    let positions = (0..n)
        .map(|_| {
            [
                rng.range_f64(-60.0, 60.0),
                rng.range_f64(-60.0, 60.0),
                rng.range_f64(0.0, 25.0),
            ]
        })
        .collect();
    let labels = (0..n)
        .map(|_| ClassId(rng.below(n_classes as u64) as u16))
        .collect();
    LabeledCloud::new(positions, labels).unwrap()
}

fn noisy_prediction(
    rng: &mut SplitMix64,
    cloud: &LabeledCloud,
    n_classes: u16,
    error_rate: f64,
    name: &str,
) -> PredictionSet {
    let labels = cloud
        .gt_labels()
        .iter()
        .map(|&g| {
            if rng.next_f64() < error_rate {
                ClassId(rng.below(n_classes as u64) as u16)
            } else {
                g
            }
        })
        .collect();
    PredictionSet::new(name, labels)
}

/// Criterion 1: on 50 random clouds (N <= 2000, 3-8 classes) every indexed
/// nearest distance matches brute force within 1e-9 m and the fast
/// distance bundle equals the naive reference exactly, in under 60 s.
#[test]
fn criterion_1_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACC_0001);
    let mut max_delta = 0.0f64;

    for trial in 0..50 {
        let n_classes = 3 + (rng.below(6) as u16); // 3..=8
        let n = 50 + rng.below(1951) as usize; // 50..=2000
        let cloud = random_cloud(&mut rng, n, n_classes);
        let pred = noisy_prediction(&mut rng, &cloud, n_classes, 0.15, "m");
        let partition = partition_by_class(cloud.gt_labels(), n_classes as usize);
        let indexes = build_class_indexes(&cloud, &partition);

        let class_points: Vec<Vec<Position>> = (0..n_classes as usize)
            .map(|c| {
                partition
                    .indices(ClassId(c as u16))
                    .iter()
                    .map(|&i| cloud.positions()[i as usize])
                    .collect()
            })
            .collect();

        for (i, query) in cloud.positions().iter().enumerate() {
            for c in 0..n_classes {
                let class = ClassId(c);
                let indexed = indexes.nearest_distance(class, query).unwrap();
                let brute = brute_force_nearest(&class_points[class.index()], query);
                if indexed != brute {
                    let delta = (indexed - brute).abs();
                    max_delta = max_delta.max(delta);
                    assert!(
                        delta <= 1e-9,
                        "trial {trial} point {i} class {c}: indexed {indexed} vs brute {brute}"
                    );
                }
            }
        }

        let tau = ThresholdConfig::new(
            (0..n_classes)
                .map(|c| 1.0 + c as f64 * 0.75)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let scope = EvalScope::full(cloud.len());
        let fast = class_distance_stats(&cloud, &pred, &scope, &indexes, &tau).unwrap();
        let naive = naive_distance_bundle(&cloud, &pred, &scope, &tau);
        assert_eq!(fast, naive, "trial {trial}: fast bundle != naive reference");
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "oracle equivalence took {elapsed:?}, budget is 60 s"
    );
    println!(
        "criterion 1 PASS: 50 clouds, max nearest-distance delta {max_delta:.3e} (<= 1e-9), \
         bundles exactly equal, {elapsed:?} (< 60 s)"
    );
}

/// Criterion 2: the hand-computable fixtures come out exactly.
#[test]
fn criterion_2_equation_level_fixtures() {
    // MDE fixture: 4 points predicted as class 0, two correct, errors at
    // raw distances 1.0 and 7.0, tau = 5 => MDE 1.5, rho 0.5, mu 1.0
    let cloud = LabeledCloud::new(
        vec![
            [0.0, 0.0, 0.0],
            [10.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [17.0, 0.0, 0.0],
        ],
        vec![ClassId(0), ClassId(0), ClassId(1), ClassId(1)],
    )
    .unwrap();
    let pred = PredictionSet::new("m", vec![ClassId(0); 4]);
    let partition = partition_by_class(cloud.gt_labels(), 2);
    let indexes = build_class_indexes(&cloud, &partition);
    let tau = ThresholdConfig::uniform(2, 5.0).unwrap();
    let bundle =
        class_distance_stats(&cloud, &pred, &EvalScope::full(4), &indexes, &tau).unwrap();
    let c0 = bundle.class(ClassId(0));
    assert_eq!(c0.mde, Some(1.5));
    assert_eq!(c0.rho, Some(0.5));
    assert_eq!(c0.mu, Some(1.0));

    // 3-4-5 nearest distance
    let cloud345 = LabeledCloud::new(
        vec![[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]],
        vec![ClassId(0), ClassId(1)],
    )
    .unwrap();
    let part345 = partition_by_class(cloud345.gt_labels(), 2);
    let idx345 = build_class_indexes(&cloud345, &part345);
    assert_eq!(
        idx345
            .nearest_distance(ClassId(0), &[3.0, 4.0, 0.0])
            .unwrap(),
        5.0
    );

    // [[1,1],[0,1]] confusion matrix: OA 2/3, both IoU 1/2
    let gt = vec![ClassId(0), ClassId(0), ClassId(1)];
    let pr = vec![ClassId(0), ClassId(1), ClassId(1)];
    let cm = confusion_matrix(&gt, &pr, &EvalScope::full(3), 2);
    assert_eq!(cm.count(ClassId(0), ClassId(0)), 1);
    assert_eq!(cm.count(ClassId(0), ClassId(1)), 1);
    assert_eq!(cm.count(ClassId(1), ClassId(0)), 0);
    assert_eq!(cm.count(ClassId(1), ClassId(1)), 1);
    let stats = classification_stats(&cm);
    assert_eq!(stats.overall_accuracy, Some(2.0 / 3.0));
    assert_eq!(stats.iou_per_class, vec![Some(0.5), Some(0.5)]);

    println!(
        "criterion 2 PASS: MDE 1.5 / rho 0.5 / mu 1.0, 3-4-5 distance 5.0, OA 2/3 with IoU 1/2"
    );
}

/// Criterion 3: on 100 random 3-model instances the hard set is the union
/// of error sets, FP/FN are bit-identical across scopes, and the OA
/// identity holds exactly in integer arithmetic.
#[test]
fn criterion_3_hard_points_algebra() {
    let mut rng = SplitMix64::new(0xACC_0003);
    for trial in 0..100 {
        let n_classes = 2 + rng.below(5) as u16;
        let n = 20 + rng.below(600) as usize;
        let cloud = random_cloud(&mut rng, n, n_classes);
        let preds: Vec<PredictionSet> = (0..3)
            .map(|m| {
                noisy_prediction(&mut rng, &cloud, n_classes, 0.1 + 0.1 * m as f64, &format!("m{m}"))
            })
            .collect();

        let hard = compute_hard_points(&cloud, &preds).unwrap();
        for i in 0..n {
            let any_err = preds
                .iter()
                .any(|p| p.pred_labels[i] != cloud.gt_labels()[i]);
            assert_eq!(hard.mask()[i], any_err, "trial {trial} point {i}");
        }

        let full = EvalScope::full(n);
        let h = hard.selected_count() as u64;
        for pred in &preds {
            let cm_full =
                confusion_matrix(cloud.gt_labels(), &pred.pred_labels, &full, n_classes as usize);
            let cm_hard =
                confusion_matrix(cloud.gt_labels(), &pred.pred_labels, &hard, n_classes as usize);
            let mut errors = 0u64;
            for c in 0..n_classes {
                let c = ClassId(c);
                assert_eq!(
                    cm_full.false_positives(c),
                    cm_hard.false_positives(c),
                    "trial {trial}: FP differs between scopes"
                );
                assert_eq!(
                    cm_full.false_negatives(c),
                    cm_hard.false_negatives(c),
                    "trial {trial}: FN differs between scopes"
                );
                // only TP can shrink when the scope narrows
                assert!(
                    cm_hard.true_positives(c) <= cm_full.true_positives(c),
                    "trial {trial}: TP grew on the hard scope"
                );
                errors += cm_full.false_negatives(c);
            }
            // OA_H * |H| is the correct-count on H, an exact integer
            assert_eq!(cm_hard.trace() + errors, h, "trial {trial}: OA identity");
            if h > 0 {
                let oa = classification_stats(&cm_hard).overall_accuracy.unwrap();
                assert!((oa * h as f64 + errors as f64 - h as f64).abs() <= 1e-9 * h as f64);
            }
        }
    }
    println!(
        "criterion 3 PASS: 100 instances, hard set = union of error sets, \
         FP/FN bit-identical across scopes, OA identity exact"
    );
}

/// Criterion 4: the bundled synthetic scene produces two models with
/// bit-identical classification metrics whose mMDE differs by >= 2x and
/// whose rho differs by >= 0.3 on the perturbed class.
#[test]
fn criterion_4_equal_iou_different_mde() {
    let spec = SceneSpec::default();
    let scene = generate_scene(&spec).unwrap();
    let contrast = scene.contrast.as_ref().expect("default spec has contrast");
    let n_classes = scene.config.n_classes();
    let full = EvalScope::full(scene.cloud.len());
    let partition = partition_by_class(scene.cloud.gt_labels(), n_classes);
    let indexes = build_class_indexes(&scene.cloud, &partition);

    let cms: Vec<_> = scene
        .preds
        .iter()
        .map(|p| confusion_matrix(scene.cloud.gt_labels(), &p.pred_labels, &full, n_classes))
        .collect();
    assert_eq!(cms[0], cms[1], "confusion matrices must be identical");
    let stats: Vec<_> = cms.iter().map(classification_stats).collect();
    assert_eq!(stats[0].overall_accuracy, stats[1].overall_accuracy);
    assert_eq!(stats[0].iou_per_class, stats[1].iou_per_class);
    assert_eq!(stats[0].mean_iou, stats[1].mean_iou);

    let bundles: Vec<_> = scene
        .preds
        .iter()
        .map(|p| {
            class_distance_stats(&scene.cloud, p, &full, &indexes, scene.config.thresholds())
                .unwrap()
        })
        .collect();
    let near_index = scene
        .preds
        .iter()
        .position(|p| p.model_name == contrast.near_model)
        .unwrap();
    let distant_index = 1 - near_index;

    let mmde_near = bundles[near_index].mmde.unwrap();
    let mmde_distant = bundles[distant_index].mmde.unwrap();
    let factor = mmde_distant / mmde_near;
    assert!(
        factor >= 2.0,
        "mMDE factor {factor} below 2 ({mmde_distant} vs {mmde_near})"
    );

    let rho_near = bundles[near_index]
        .class(contrast.perturbed_class)
        .rho
        .unwrap();
    let rho_distant = bundles[distant_index]
        .class(contrast.perturbed_class)
        .rho
        .unwrap();
    let rho_gap = rho_distant - rho_near;
    assert!(rho_gap >= 0.3, "rho gap {rho_gap} below 0.3");

    println!(
        "criterion 4 PASS: identical confusion matrices; mMDE {mmde_near:.6} vs \
         {mmde_distant:.6} (factor {factor:.2} >= 2), rho {rho_near:.2} vs {rho_distant:.2} \
         (gap {rho_gap:.2} >= 0.3)"
    );
}

/// Criterion 5: clipping and range invariants over 1000 randomized trials,
/// plus zero-error behavior and threshold monotonicity under doubling.
#[test]
fn criterion_5_clipping_and_range_invariants() {
    let mut rng = SplitMix64::new(0xACC_0005);
    for trial in 0..1000 {
        let n_classes = 2 + rng.below(5) as u16;
        let n = 10 + rng.below(300) as usize;
        let cloud = random_cloud(&mut rng, n, n_classes);
        let pred = noisy_prediction(&mut rng, &cloud, n_classes, 0.25, "m");
        let partition = partition_by_class(cloud.gt_labels(), n_classes as usize);
        let indexes = build_class_indexes(&cloud, &partition);
        let tau_values: Vec<f64> = (0..n_classes)
            .map(|_| 0.5 + rng.next_f64() * 7.5)
            .collect();
        let tau = ThresholdConfig::new(tau_values.clone()).unwrap();

        // random sub-scope half the time
        let scope = if rng.below(2) == 0 {
            EvalScope::full(n)
        } else {
            let mask = (0..n).map(|_| rng.below(2) == 1).collect();
            EvalScope::new(segdist::ScopeLabel::Hard, mask)
        };

        let records = compute_point_records(&cloud, &pred, &indexes, &tau).unwrap();
        for record in &records {
            let t = tau.get(record.predicted);
            assert!(record.clipped_distance <= t, "trial {trial}: clip exceeded tau");
        }

        let bundle = segdist::aggregate_distance_stats(&records, &scope, &tau);
        for stats in &bundle.per_class {
            let t = tau.get(stats.class);
            if let Some(mde) = stats.mde {
                assert!((0.0..=t).contains(&mde), "trial {trial}: MDE {mde} out of [0, {t}]");
            }
            if let Some(rho) = stats.rho {
                assert!((0.0..=1.0).contains(&rho), "trial {trial}: rho {rho}");
            }
            if let Some(mu) = stats.mu {
                assert!(mu > 0.0 && mu <= t, "trial {trial}: mu {mu} out of (0, {t}]");
            }
        }

        // all-correct predictions zero the whole bundle
        let perfect = PredictionSet::new("p", cloud.gt_labels().to_vec());
        let zero = class_distance_stats(&cloud, &perfect, &scope, &indexes, &tau).unwrap();
        if scope.selected_count() > 0 {
            assert_eq!(zero.mmde, Some(0.0), "trial {trial}: perfect mMDE");
        } else {
            assert_eq!(zero.mmde, None);
        }

        // doubling tau: MDE never decreases, rho never increases,
        // error counts unchanged
        let doubled = ThresholdConfig::new(tau_values.iter().map(|t| t * 2.0).collect()).unwrap();
        let bundle2 = class_distance_stats(&cloud, &pred, &scope, &indexes, &doubled).unwrap();
        for (a, b) in bundle.per_class.iter().zip(&bundle2.per_class) {
            assert_eq!(a.error_count, b.error_count, "trial {trial}: errors changed");
            if let (Some(ma), Some(mb)) = (a.mde, b.mde) {
                assert!(mb >= ma - 1e-12, "trial {trial}: MDE decreased {ma} -> {mb}");
            }
            if let (Some(ra), Some(rb)) = (a.rho, b.rho) {
                assert!(rb <= ra + 1e-12, "trial {trial}: rho increased {ra} -> {rb}");
            }
        }
    }
    println!(
        "criterion 5 PASS: 1000 trials, clipped <= tau, MDE in [0,tau], rho in [0,1], \
         mu in (0,tau], perfect => mMDE 0, tau-doubling monotone"
    );
}

/// Criterion 6: evaluate twice on the same fixture with --threads 1 and
/// --threads 8 produces byte-identical report files, JSON and CSV.
#[test]
fn criterion_6_determinism_across_thread_counts() {
    let dir = scratch_dir("determinism");
    let scene_dir = dir.join("scene");
    let status = bin()
        .args(["generate", "--output-dir"])
        .arg(&scene_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let mut outputs = Vec::new();
    for (threads, tag) in [("1", "t1"), ("8", "t8")] {
        for format in ["json", "csv"] {
            let out = dir.join(format!("report-{tag}.{format}"));
            let status = bin()
                .args(["evaluate", "--scope", "both", "--threads", threads, "--format", format])
                .arg("--input")
                .arg(scene_dir.join("scene.csv"))
                .arg("--config")
                .arg(scene_dir.join("config.toml"))
                .arg("--output")
                .arg(&out)
                .status()
                .unwrap();
            assert!(status.success());
            outputs.push((format, std::fs::read(&out).unwrap()));
        }
    }
    let json_t1 = &outputs[0].1;
    let csv_t1 = &outputs[1].1;
    let json_t8 = &outputs[2].1;
    let csv_t8 = &outputs[3].1;
    assert_eq!(json_t1, json_t8, "JSON reports differ across thread counts");
    assert_eq!(csv_t1, csv_t8, "CSV reports differ across thread counts");
    assert!(!json_t1.is_empty() && !csv_t1.is_empty());

    std::fs::remove_dir_all(&dir).unwrap();
    println!(
        "criterion 6 PASS: --threads 1 and --threads 8 reports byte-identical \
         ({} bytes JSON, {} bytes CSV)",
        json_t1.len(),
        csv_t1.len()
    );
}

/// Criterion 7: merged labels equal the naive argmax of mean rows on
/// randomized stacks, and the canonical tie resolves to class 0.
#[test]
fn criterion_7_tile_merge_correctness() {
    // canonical tie case
    let p = [2.0, 3.0, 0.0];
    let mk = |probs: Vec<f64>| Tile {
        name: "t".into(),
        positions: vec![p],
        gt: vec![0],
        probs: vec![probs],
    };
    let stack = TileStack {
        model_names: vec!["m".into()],
        n_classes: 2,
        tiles: vec![mk(vec![0.9, 0.1]), mk(vec![0.1, 0.9])],
    };
    let merged = merge_tiles(&stack).unwrap();
    assert_eq!(merged.preds[0].pred_labels, vec![ClassId(0)], "tie must go to class 0");

    // randomized stacks
    let mut rng = SplitMix64::new(0xACC_0007);
    for trial in 0..200 {
        let n_classes = 2 + rng.below(5) as usize;
        let n_points = 1 + rng.below(40) as usize;
        let n_tiles = 1 + rng.below(4) as usize;
        let points: Vec<Position> = (0..n_points)
            .map(|_| [rng.range_f64(0.0, 50.0), rng.range_f64(0.0, 50.0), 0.0])
            .collect();
        // each tile covers a prefix of the points, so coverage varies
        let tiles: Vec<Tile> = (0..n_tiles)
            .map(|t| {
                let count = if t == 0 {
                    n_points
                } else {
                    1 + rng.below(n_points as u64) as usize
                };
                let probs: Vec<f64> = (0..count)
                    .flat_map(|_| {
                        let mut row: Vec<f64> =
                            (0..n_classes).map(|_| rng.next_f64() + 1e-3).collect();
                        let sum: f64 = row.iter().sum();
                        row.iter_mut().for_each(|v| *v /= sum);
                        row
                    })
                    .collect();
                Tile {
                    name: format!("t{t}"),
                    positions: points[..count].to_vec(),
                    gt: vec![0; count],
                    probs: vec![probs],
                }
            })
            .collect();
        let stack = TileStack {
            model_names: vec!["m".into()],
            n_classes,
            tiles,
        };
        let merged = merge_tiles(&stack).unwrap();

        // naive recomputation per global point
        for (i, point) in merged.cloud.positions().iter().enumerate() {
            let mut rows = Vec::new();
            for tile in &stack.tiles {
                for (j, q) in tile.positions.iter().enumerate() {
                    if q == point {
                        rows.push(tile.probs[0][j * n_classes..(j + 1) * n_classes].to_vec());
                    }
                }
            }
            let expected = naive_merged_label(&rows, n_classes);
            assert_eq!(
                merged.preds[0].pred_labels[i], expected,
                "trial {trial} point {i}: merged label != naive argmax"
            );
        }
    }
    println!(
        "criterion 7 PASS: 200 random stacks match naive argmax; (0.9,0.1)/(0.1,0.9) \
         tie resolves to class 0"
    );
}

/// Criterion 8: a 1,000,000-point cloud with 8 classes and 2 models runs
/// `evaluate --scope both` end to end in under 30 s.
#[test]
fn criterion_8_desk_scale_performance() {
    let dir = scratch_dir("perf");
    let mut rng = SplitMix64::new(0xACC_0008);
    let n = 1_000_000;
    let n_classes = 8u16;
    let cloud = random_cloud(&mut rng, n, n_classes);
    let preds = vec![
        noisy_prediction(&mut rng, &cloud, n_classes, 0.05, "alpha"),
        noisy_prediction(&mut rng, &cloud, n_classes, 0.08, "beta"),
    ];
    let input = dir.join("million.csv");
    write_table_file(&input, &cloud, &preds, None).unwrap();

    let config_path = dir.join("config.toml");
    let names: Vec<String> = (0..n_classes).map(|c| format!("c{c}")).collect();
    let mut config_text = format!("classes = {names:?}\n\n[thresholds]\n");
    for name in &names {
        config_text.push_str(&format!("{name} = 4.0\n"));
    }
    std::fs::write(&config_path, config_text).unwrap();

    let output = dir.join("report.json");
    let started = Instant::now();
    let status = bin()
        .args(["evaluate", "--scope", "both"])
        .arg("--input")
        .arg(&input)
        .arg("--config")
        .arg(&config_path)
        .arg("--output")
        .arg(&output)
        .status()
        .unwrap();
    let elapsed = started.elapsed();
    assert!(status.success());
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "evaluate --scope both on 1M points took {elapsed:?}, budget is 30 s"
    );
    assert!(output.exists());

    std::fs::remove_dir_all(&dir).unwrap();
    println!(
        "criterion 8 PASS: 1M points, 8 classes, 2 models evaluated (both scopes) in {elapsed:?} \
         (< 30 s)"
    );
}
