//! `segdist` — evaluate point-cloud segmentation predictions with
//! classification metrics, clipped distance metrics, and multi-model
//! hard-point scoping.
//!
//! Exit codes: 0 success, 1 validation failure, 2 IO failure, 3 oracle
//! mismatch. Diagnostics go to standard error. `NO_COLOR` disables ANSI
//! styling in the printed summaries.

mod summary;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use segdist::io::report::{build_report, emit_report, ReportFormat};
use segdist::io::table::{parse_cloud_file, write_table_file};
use segdist::io::tiles::{merge_tiles, stack_tile_files};
use segdist::{
    build_class_indexes, compute_hard_points, compute_point_records, evaluate_model_with_records,
    generate_scene, partition_by_class, validate_inputs, ClassId, Error, EvalConfig, EvalScope,
    ScopeSelection, SceneSpec, ScopedModelMetrics, ValidationError,
};

#[derive(Parser)]
#[command(name = "segdist", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against ground truth and write a report
    Evaluate(EvaluateArgs),
    /// Merge overlapping-tile predictions by averaging per-class probabilities
    MergeTiles(MergeTilesArgs),
    /// Generate a deterministic synthetic scene with controlled errors
    Generate(GenerateArgs),
    /// Cross-check indexed distances and fast metrics against brute force
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Input point table (x,y,z,gt,pred_<model>,...)
    #[arg(long)]
    input: PathBuf,
    /// Evaluation config (classes, thresholds)
    #[arg(long)]
    config: PathBuf,
    /// Which scopes to evaluate; defaults to the config's choice
    #[arg(long)]
    scope: Option<ScopeArg>,
    /// Report file to write
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format
    #[arg(long, default_value = "json")]
    format: ReportFormatArg,
    /// Cap on worker threads; results are identical for any value
    #[arg(long)]
    threads: Option<usize>,
    /// Write the input table plus a hard membership column here
    #[arg(long)]
    export_hard_mask: Option<PathBuf>,
}

#[derive(Args)]
struct MergeTilesArgs {
    /// Glob matching the tile files to merge
    #[arg(long)]
    inputs: String,
    #[arg(long)]
    config: PathBuf,
    /// Merged point table to write
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scene spec file; omitted means the built-in default scene
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for scene.csv, config.toml, and scene_spec.toml
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Number of sampled nearest-distance comparisons
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ReportFormatArg {
    Json,
    Csv,
}

impl From<ReportFormatArg> for ReportFormat {
    fn from(value: ReportFormatArg) -> Self {
        match value {
            ReportFormatArg::Json => ReportFormat::Json,
            ReportFormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScopeArg {
    Full,
    Hard,
    Both,
}

impl From<ScopeArg> for ScopeSelection {
    fn from(value: ScopeArg) -> Self {
        match value {
            ScopeArg::Full => ScopeSelection::Full,
            ScopeArg::Hard => ScopeSelection::Hard,
            ScopeArg::Both => ScopeSelection::Both,
        }
    }
}

enum Failure {
    Validation(String),
    Io(String),
    OracleMismatch(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
            Failure::OracleMismatch(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Io(m) | Failure::OracleMismatch(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        if err.is_io() {
            Failure::Io(err.to_string())
        } else {
            Failure::Validation(err.to_string())
        }
    }
}

impl From<ValidationError> for Failure {
    fn from(err: ValidationError) -> Self {
        Failure::Validation(err.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::Io(err.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                std::process::exit(0);
            }
            eprint!("{err}");
            std::process::exit(1);
        }
    };

    let result = match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::MergeTiles(args) => cmd_merge_tiles(args),
        Command::Generate(args) => cmd_generate(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    };

    if let Err(failure) = result {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.exit_code());
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Validation(format!("cannot set thread count: {e}")))?;
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    init_threads(args.threads)?;
    let config = EvalConfig::load(&args.config)?;
    let (cloud, preds) = parse_cloud_file(&args.input, &config)?;
    if preds.is_empty() {
        return Err(ValidationError::NoModels.into());
    }
    let context = validate_inputs(&cloud, &preds, config.thresholds())?;
    let indexes = build_class_indexes(&cloud, &context.gt_partition);

    let selection = args.scope.map(ScopeSelection::from).unwrap_or(config.scope);
    let want_full = matches!(selection, ScopeSelection::Full | ScopeSelection::Both);
    let want_hard = matches!(selection, ScopeSelection::Hard | ScopeSelection::Both)
        || args.export_hard_mask.is_some();

    // records are scope-independent; compute once per model
    let records: Vec<_> = preds
        .iter()
        .map(|pred| compute_point_records(&cloud, pred, &indexes, config.thresholds()))
        .collect::<Result<_, _>>()?;

    let full_scope = want_full.then(|| EvalScope::full(cloud.len()));
    let hard_scope = if want_hard {
        Some(compute_hard_points(&cloud, &preds)?)
    } else {
        None
    };

    let evaluate_over = |scope: &EvalScope| -> Vec<ScopedModelMetrics> {
        preds
            .iter()
            .zip(&records)
            .map(|(pred, recs)| {
                evaluate_model_with_records(&cloud, pred, recs, scope, config.thresholds())
            })
            .collect()
    };

    let mut scoped: Vec<(&EvalScope, Vec<ScopedModelMetrics>)> = Vec::new();
    if let Some(scope) = &full_scope {
        scoped.push((scope, evaluate_over(scope)));
    }
    if matches!(selection, ScopeSelection::Hard | ScopeSelection::Both) {
        let scope = hard_scope.as_ref().expect("hard scope computed");
        scoped.push((scope, evaluate_over(scope)));
    }

    let borrowed: Vec<(&EvalScope, &[ScopedModelMetrics])> = scoped
        .iter()
        .map(|(scope, entries)| (*scope, entries.as_slice()))
        .collect();
    let report = build_report(&config, &borrowed);

    if let Some(path) = &args.output {
        emit_report(&report, path, args.format.into())?;
    }
    if let Some(path) = &args.export_hard_mask {
        let mask = hard_scope.as_ref().expect("hard scope computed").mask();
        write_table_file(path, &cloud, &preds, Some(mask))?;
    }

    print!("{}", summary::render(&report));
    Ok(())
}

fn cmd_merge_tiles(args: MergeTilesArgs) -> Result<(), Failure> {
    init_threads(args.threads)?;
    let config = EvalConfig::load(&args.config)?;
    let mut paths: Vec<PathBuf> = glob::glob(&args.inputs)
        .map_err(|e| Failure::Validation(format!("bad glob '{}': {e}", args.inputs)))?
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Io(e.to_string()))?;
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Validation(format!(
            "glob '{}' matched no files",
            args.inputs
        )));
    }

    let stack = stack_tile_files(&paths, &config)?;
    let merged = merge_tiles(&stack)?;

    // merged output carries labels only; probabilities served their purpose
    let lean: Vec<_> = merged
        .preds
        .iter()
        .map(|p| segdist::PredictionSet::new(p.model_name.clone(), p.pred_labels.clone()))
        .collect();
    write_table_file(&args.output, &merged.cloud, &lean, None)?;

    let d = &merged.diagnostics;
    println!(
        "merged {} tiles -> {} points ({} duplicate rows, max coverage {}, {} gt conflicts)",
        d.tiles, d.global_points, d.duplicate_rows, d.max_coverage, d.gt_conflicts
    );
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            SceneSpec::parse_toml(&text).map_err(Error::from)?
        }
        None => SceneSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }

    let scene = generate_scene(&spec).map_err(Error::from)?;
    std::fs::create_dir_all(&args.output_dir)?;
    write_table_file(
        args.output_dir.join("scene.csv"),
        &scene.cloud,
        &scene.preds,
        None,
    )?;
    std::fs::write(
        args.output_dir.join("config.toml"),
        scene.config.to_toml(),
    )?;
    std::fs::write(args.output_dir.join("scene_spec.toml"), spec.to_toml())?;

    println!(
        "generated {} points, {} models (seed {})",
        scene.cloud.len(),
        scene.preds.len(),
        spec.seed
    );
    if let Some(contrast) = &scene.contrast {
        println!(
            "equal-confusion contrast: '{}' stays near, '{}' errs distant (class {})",
            contrast.near_model, contrast.distant_model, contrast.perturbed_class
        );
    }
    Ok(())
}

const ORACLE_CHECK_MAX_POINTS: usize = 200_000;
const ORACLE_TOLERANCE: f64 = 1e-9;

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<(), Failure> {
    init_threads(args.threads)?;
    let config = EvalConfig::load(&args.config)?;
    let (cloud, preds) = parse_cloud_file(&args.input, &config)?;
    let context = validate_inputs(&cloud, &preds, config.thresholds())?;
    if cloud.len() > ORACLE_CHECK_MAX_POINTS {
        return Err(Failure::Validation(format!(
            "oracle-check is limited to {ORACLE_CHECK_MAX_POINTS} points, input has {}",
            cloud.len()
        )));
    }

    let indexes = build_class_indexes(&cloud, &context.gt_partition);
    let n_classes = config.n_classes();

    // test hook: bias every indexed distance so the check must trip
    let corrupt = std::env::var_os("SEGDIST_CORRUPT_INDEX").is_some_and(|v| v == "1");
    let bias = if corrupt { 1e-6 } else { 0.0 };

    // per-class ground-truth positions for the linear-scan side
    let partition = partition_by_class(cloud.gt_labels(), n_classes);
    let class_points: Vec<Vec<segdist::Position>> = (0..n_classes)
        .map(|c| {
            partition
                .indices(ClassId(c as u16))
                .iter()
                .map(|&i| cloud.positions()[i as usize])
                .collect()
        })
        .collect();

    let mut rng = segdist::rng::SplitMix64::new(0x5EAC_0DE5);
    let mut max_delta = 0.0f64;
    for _ in 0..args.samples {
        let point = rng.below(cloud.len() as u64) as usize;
        let class = ClassId(rng.below(n_classes as u64) as u16);
        let query = &cloud.positions()[point];
        let indexed = indexes.nearest_distance(class, query).map_err(Error::from)?;
        let indexed = if indexed.is_finite() { indexed + bias } else { indexed };
        let brute = segdist::brute_force_nearest(&class_points[class.index()], query);
        // infinities compare equal (both sides agree the class is empty)
        if indexed != brute {
            let delta = (indexed - brute).abs();
            max_delta = max_delta.max(delta);
            if delta > ORACLE_TOLERANCE {
                return Err(Failure::OracleMismatch(format!(
                    "nearest-distance mismatch at point {point} class {class}: \
                     indexed {indexed} vs brute force {brute} (|delta| {delta})"
                )));
            }
        }
    }

    let full = EvalScope::full(cloud.len());
    for pred in &preds {
        let fast =
            segdist::class_distance_stats(&cloud, pred, &full, &indexes, config.thresholds())
                .map_err(Error::from)?;
        let mut fast = fast;
        if corrupt {
            if let Some(m) = fast.mmde.as_mut() {
                *m += bias;
            }
        }
        let naive = segdist::oracle::naive_distance_bundle(&cloud, pred, &full, config.thresholds());
        if let Some(msg) = bundle_mismatch(&fast, &naive) {
            return Err(Failure::OracleMismatch(format!(
                "distance bundle mismatch for model '{}': {msg}",
                pred.model_name
            )));
        }
    }

    println!(
        "oracle-check ok: {} samples (max |delta| {:.3e}), {} model bundle(s) verified",
        args.samples,
        max_delta,
        preds.len()
    );
    Ok(())
}

fn float_close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => a == b || (a - b).abs() <= ORACLE_TOLERANCE,
        _ => false,
    }
}

fn bundle_mismatch(
    fast: &segdist::DistanceStatsBundle,
    naive: &segdist::DistanceStatsBundle,
) -> Option<String> {
    if !float_close(fast.mmde, naive.mmde) {
        return Some(format!("mmde {:?} vs {:?}", fast.mmde, naive.mmde));
    }
    if fast.mmde_defined_classes != naive.mmde_defined_classes {
        return Some("mmde defined-class counts differ".to_owned());
    }
    for (f, n) in fast.per_class.iter().zip(&naive.per_class) {
        let counts_match = f.predicted_count == n.predicted_count
            && f.error_count == n.error_count
            && f.distant_count == n.distant_count
            && f.near_count == n.near_count;
        if !counts_match {
            return Some(format!("counts differ for class {}", f.class));
        }
        if !(float_close(f.mde, n.mde) && float_close(f.rho, n.rho) && float_close(f.mu, n.mu)) {
            return Some(format!("statistics differ for class {}", f.class));
        }
    }
    None
}
