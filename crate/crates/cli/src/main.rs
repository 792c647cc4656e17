//! Command-line interface: inspect BVH files, preprocess datasets, train
//! reconstruction models, reconstruct sequences, run experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 I/O error, 3 parse/config
//! error. Dataset paths in catalogs resolve against `MOCAP_RECON_DATA` when
//! set, else against the catalog file's directory.

mod config;

use clap::{Parser, Subcommand};
use config::{apply_overrides, ExperimentFile, TrainFile};
use mocap_recon::bvh::{forward_kinematics, parse_bvh, BvhError};
use mocap_recon::corruption::{sample_mask, GapSpec, MaskSequence};
use mocap_recon::eval::{
    curves_to_csv, run_gap_sweep, run_generalization, run_long_gap, run_rate_table, EvalContext,
    EvalError, EvalReport, GapSweepSpec, GeneralizationSpec, LongGapSpec, Method, RateTableSpec,
};
use mocap_recon::files::{self, FilesError, PoseMeta};
use mocap_recon::model::{
    config_hash, load_model, save_model, train, ModelError, ModelFile, ModelParams, TrainConfig,
};
use mocap_recon::pipeline::{
    denormalize, hip_center, load_sequences, make_splits, normalize, prepare, Catalog,
    PipelineError, PreparedDataset, SplitFilter, SplitSpec,
};
use mocap_recon::Tensor2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mocap-recon", version, about = "Missing-marker reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print a summary of a BVH file.
    Inspect { path: PathBuf },
    /// Load a dataset, hip-center it and write pose CSVs plus the normalizer.
    Preprocess {
        /// Dataset catalog (TOML).
        #[arg(long)]
        catalog: PathBuf,
        /// Split spec (TOML); the normalizer is fit on its train list.
        #[arg(long)]
        split: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a config file.
    Train {
        config: PathBuf,
        /// Override config keys, e.g. --set epochs=1 --set seed=9.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Reconstruct missing markers in a BVH file or pose CSV.
    Reconstruct {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Input: .bvh, or a pose CSV in the model's marker layout.
        #[arg(long)]
        input: PathBuf,
        /// Mask CSV (frames × markers of 0/1). Mutually exclusive with --missing-rate.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Sample a random-gap mask at this missing rate instead.
        #[arg(long)]
        missing_rate: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        gap_mean: f64,
        #[arg(long, default_value_t = 5.0)]
        gap_std: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the mask that was used (for replay).
        #[arg(long)]
        mask_out: Option<PathBuf>,
        /// Output pose CSV.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run an experiment driver from a config file.
    Experiment {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

/// Error with a process exit code attached.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: String) -> Self {
        CliError { code, message }
    }

    pub fn config(message: String) -> Self {
        CliError::new(3, message)
    }

    fn io(message: String) -> Self {
        CliError::new(2, message)
    }

    fn runtime(message: String) -> Self {
        CliError::new(1, message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<BvhError> for CliError {
    fn from(e: BvhError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<FilesError> for CliError {
    fn from(e: FilesError) -> Self {
        match e {
            FilesError::Io(io) => CliError::io(io.to_string()),
            other => CliError::config(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(io) => CliError::io(io.to_string()),
            PipelineError::Bvh(b) => CliError::config(b.to_string()),
            PipelineError::Config(_) | PipelineError::UnknownSequenceId(_) => {
                CliError::config(e.to_string())
            }
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(io) => CliError::io(io.to_string()),
            ModelError::Config(_)
            | ModelError::CorruptFile(_)
            | ModelError::VersionMismatch { .. } => CliError::config(e.to_string()),
            ModelError::Pipeline(p) => p.into(),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) | EvalError::NoMissingMarkers => CliError::config(e.to_string()),
            EvalError::Model(m) => m.into(),
            EvalError::Pipeline(p) => p.into(),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<mocap_recon::corruption::CorruptionError> for CliError {
    fn from(e: mocap_recon::corruption::CorruptionError) -> Self {
        CliError::runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version print to stdout and exit 0; usage errors are
            // config errors (exit 3).
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Inspect { path } => cmd_inspect(&path),
        Cmd::Preprocess { catalog, split, out } => cmd_preprocess(&catalog, &split, &out),
        Cmd::Train { config, overrides } => cmd_train(&config, &overrides),
        Cmd::Reconstruct {
            model,
            input,
            mask,
            missing_rate,
            gap_mean,
            gap_std,
            seed,
            mask_out,
            output,
        } => cmd_reconstruct(ReconstructArgs {
            model,
            input,
            mask,
            missing_rate,
            gap_mean,
            gap_std,
            seed,
            mask_out,
            output,
        }),
        Cmd::Experiment { config, overrides } => cmd_experiment(&config, &overrides),
    }
}

/// Base directory for catalog-relative paths: env override or catalog dir.
fn data_root(catalog_path: &Path) -> PathBuf {
    std::env::var_os("MOCAP_RECON_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            catalog_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."))
        })
}

fn init_threads(threads: usize) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    let _ = threads;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn cmd_inspect(path: &Path) -> Result<(), CliError> {
    let text = read_to_string(path)?;
    let (skeleton, frames) =
        parse_bvh(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let n = skeleton.joint_count();
    let f = frames.frame_count();
    let rate = 1.0 / frames.frame_time;
    println!("file: {}", path.display());
    println!("joints: {n}");
    println!("markers: {n} (pose dimension {})", 3 * n);
    println!("frames: {f}");
    println!("frame rate: {rate:.2} Hz");
    println!("duration: {:.2} s", f as f64 * frames.frame_time);
    Ok(())
}

fn cmd_preprocess(catalog_path: &Path, split_path: &Path, out: &Path) -> Result<(), CliError> {
    let catalog = Catalog::load(catalog_path)?;
    let split = SplitSpec::load(split_path)?;
    let root = data_root(catalog_path);
    let all = load_sequences(&catalog, &root)?;
    let splits = make_splits(&all, &split, &SplitFilter::None)?;
    let prepared = prepare(&splits)?;
    std::fs::create_dir_all(out)?;
    let meta = PoseMeta {
        unit_scale_to_cm: prepared.unit_scale_to_cm,
        frame_rate: prepared.frame_rate,
        space: "hip_centered".into(),
    };
    let mut written = 0usize;
    for seq in prepared
        .train
        .iter()
        .chain(&prepared.validation)
        .chain(&prepared.test)
    {
        let csv_path = out.join(format!("{}.csv", seq.id));
        std::fs::write(
            &csv_path,
            files::pose_csv(&prepared.marker_names, &seq.centered),
        )?;
        std::fs::write(
            files::sidecar_path(&csv_path),
            serde_json::to_string_pretty(&meta).expect("meta serializes"),
        )?;
        written += 1;
    }
    std::fs::write(
        out.join("normalizer.json"),
        serde_json::to_string_pretty(&prepared.normalizer).expect("normalizer serializes"),
    )?;
    println!(
        "preprocessed {written} sequences ({} markers, {:.0} Hz) into {}",
        prepared.marker_count(),
        prepared.frame_rate,
        out.display()
    );
    Ok(())
}

fn load_prepared(catalog_path: &Path, split_path: &Path) -> Result<PreparedDataset, CliError> {
    let catalog = Catalog::load(catalog_path)?;
    let split = SplitSpec::load(split_path)?;
    let root = data_root(catalog_path);
    let all = load_sequences(&catalog, &root)?;
    let splits = make_splits(&all, &split, &SplitFilter::None)?;
    Ok(prepare(&splits)?)
}

fn cmd_train(config_path: &Path, overrides: &[String]) -> Result<(), CliError> {
    let raw = read_to_string(config_path)?;
    let effective = apply_overrides(&raw, overrides)?;
    let file = TrainFile::parse(&effective)?;
    let cfg: TrainConfig = file.params.to_train_config()?;
    init_threads(file.threads)?;

    let base = config_path.parent().unwrap_or(Path::new("."));
    let prepared = load_prepared(&base.join(&file.catalog), &base.join(&file.split))?;
    let (params, log) = train(&prepared, &cfg)?;

    let model_file = ModelFile {
        params,
        normalizer: prepared.normalizer.clone(),
        marker_names: prepared.marker_names.clone(),
        frame_rate: prepared.frame_rate,
        unit_scale_to_cm: prepared.unit_scale_to_cm,
        config_hash: config_hash(&effective),
    };
    let model_out = base.join(&file.model_out);
    save_model(&model_file, &model_out)?;
    if let Some(log_out) = &file.log_out {
        std::fs::write(base.join(log_out), log.to_csv())?;
    }
    println!(
        "trained {} ({} steps over {} epochs) -> {}",
        cfg.architecture,
        log.step_losses.len(),
        cfg.epochs,
        model_out.display()
    );
    match log.val_rmse_cm.last() {
        Some(v) => println!("final validation RMSE: {v:.4} cm"),
        None => println!("final validation RMSE: n/a (no validation sequences)"),
    }
    Ok(())
}

struct ReconstructArgs {
    model: PathBuf,
    input: PathBuf,
    mask: Option<PathBuf>,
    missing_rate: Option<f64>,
    gap_mean: f64,
    gap_std: f64,
    seed: u64,
    mask_out: Option<PathBuf>,
    output: PathBuf,
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let markers = model.marker_names.len();

    // Input: BVH (parse + FK + hip-center) or pose CSV (already centered).
    let centered: Tensor2 = if args.input.extension().is_some_and(|e| e == "bvh") {
        let text = read_to_string(&args.input)?;
        let (skeleton, frames) = parse_bvh(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", args.input.display())))?;
        if skeleton.marker_names() != model.marker_names {
            return Err(CliError::config(format!(
                "input skeleton ({} joints) does not match the model's marker set ({markers})",
                skeleton.joint_count()
            )));
        }
        let poses = forward_kinematics(&skeleton, &frames, model.unit_scale_to_cm);
        hip_center(&poses, &model.marker_names[0])
            .map_err(CliError::from)?
            .positions
    } else {
        let (names, positions) = files::parse_pose_csv(&read_to_string(&args.input)?)?;
        if names != model.marker_names {
            return Err(CliError::config(
                "input CSV marker names do not match the model's marker set".into(),
            ));
        }
        positions
    };
    let frames = centered.rows();

    let mask: MaskSequence = match (&args.mask, args.missing_rate) {
        (Some(path), None) => {
            let m = files::parse_mask_csv(&read_to_string(path)?)?;
            if m.frames() != frames || m.markers() != markers {
                return Err(CliError::config(format!(
                    "mask is {}x{}, input needs {frames}x{markers}",
                    m.frames(),
                    m.markers()
                )));
            }
            m
        }
        (None, Some(rate)) => sample_mask(
            frames,
            markers,
            &GapSpec {
                missing_rate: rate,
                gap_mean: args.gap_mean,
                gap_std: args.gap_std,
                rng_seed: args.seed,
            },
        )
        .map_err(|e| CliError::config(e.to_string()))?,
        (None, None) => MaskSequence::all_present(frames, markers),
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "--mask and --missing-rate are mutually exclusive".into(),
            ))
        }
    };

    let normalized = normalize(&centered, &model.normalizer)?;
    let corrupted = {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        mocap_recon::corruption::corrupt(
            &normalized,
            &mask,
            0.0,
            &vec![0.0; normalized.cols()],
            &mut rng,
        )?
    };
    let recon_norm = mocap_recon::model::reconstruct_sequence(&model.params, &corrupted, &mask)?;
    let recon = denormalize(&recon_norm, &model.normalizer)?;

    // Observed markers pass through from the raw input, bit-exact.
    let mut out = centered.clone();
    for f in 0..frames {
        for m in 0..markers {
            if !mask.is_present(f, m) {
                for k in 0..3 {
                    out.set(f, 3 * m + k, recon.get(f, 3 * m + k));
                }
            }
        }
    }

    std::fs::write(&args.output, files::pose_csv(&model.marker_names, &out))?;
    let meta = PoseMeta {
        unit_scale_to_cm: model.unit_scale_to_cm,
        frame_rate: model.frame_rate,
        space: "hip_centered".into(),
    };
    std::fs::write(
        files::sidecar_path(&args.output),
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )?;
    if let Some(mask_out) = &args.mask_out {
        std::fs::write(mask_out, files::mask_csv(&mask))?;
    }
    println!(
        "reconstructed {frames} frames ({} missing cells) -> {}",
        (0..frames)
            .map(|f| (0..markers).filter(|&m| !mask.is_present(f, m)).count())
            .sum::<usize>(),
        args.output.display()
    );
    Ok(())
}

fn cmd_experiment(config_path: &Path, overrides: &[String]) -> Result<(), CliError> {
    let raw = read_to_string(config_path)?;
    let effective = apply_overrides(&raw, overrides)?;
    let file = ExperimentFile::parse(&effective)?;
    init_threads(file.threads)?;

    let base = config_path.parent().unwrap_or(Path::new("."));
    let catalog_path = base.join(&file.catalog);
    let split_path = base.join(&file.split);
    let out_dir = base.join(&file.out_dir);
    std::fs::create_dir_all(&out_dir)?;

    let lstm_model: Option<ModelFile> = file
        .lstm_model
        .as_ref()
        .map(|p| load_model(&base.join(p)))
        .transpose()?;
    let window_model: Option<ModelFile> = file
        .window_model
        .as_ref()
        .map(|p| load_model(&base.join(p)))
        .transpose()?;
    if let Some(m) = &lstm_model {
        m.expect_lstm()?;
    }
    if let Some(m) = &window_model {
        m.expect_window()?;
    }

    let report: EvalReport;
    let mut curves_csv: Option<String> = None;

    if file.experiment == "generalization" {
        let train_params = file
            .train
            .as_ref()
            .ok_or_else(|| CliError::config("generalization requires a [train] table".into()))?;
        let train_cfg = train_params.to_train_config()?;
        let catalog = Catalog::load(&catalog_path)?;
        let split = SplitSpec::load(&split_path)?;
        let root = data_root(&catalog_path);
        let all = load_sequences(&catalog, &root)?;
        let eval_ids = if file.sequences.is_empty() {
            split.test.clone()
        } else {
            file.sequences.clone()
        };
        let spec = GeneralizationSpec {
            rate: file.rate.unwrap_or(0.2),
            gap_frames: file.gap_frames.unwrap_or(100),
            repeats: file.repeats.unwrap_or(3),
            seed: file.seed,
        };
        report = run_generalization(&all, &split, &train_cfg, &eval_ids, &spec)?;
    } else {
        let prepared = load_prepared(&catalog_path, &split_path)?;
        let ctx = EvalContext::of(&prepared);
        let methods = resolve_methods(&file.methods, &lstm_model, &window_model)?;
        let sequences = resolve_sequences(&prepared, &file.sequences)?;
        match file.experiment.as_str() {
            "rate_table" => {
                let spec = RateTableSpec {
                    rates: file.rates.clone().unwrap_or_else(|| vec![0.1, 0.2, 0.3]),
                    repeats: file.repeats.unwrap_or(3),
                    gap_mean: file.gap_mean.unwrap_or(10.0),
                    gap_std: file.gap_std.unwrap_or(5.0),
                    seed: file.seed,
                };
                report = run_rate_table(&ctx, &methods, &sequences, &spec)?;
            }
            "gap_sweep" => {
                let spec = GapSweepSpec {
                    gap_lengths: file
                        .gap_lengths
                        .clone()
                        .unwrap_or_else(|| vec![12, 60, 120, 240, 480]),
                    missing_markers: file.missing_markers.unwrap_or(5),
                    repeats: file.repeats.unwrap_or(3),
                    lead_in: file.lead_in.unwrap_or(120),
                    seed: file.seed,
                };
                let mut cells = Vec::new();
                for seq in &sequences {
                    cells.extend(run_gap_sweep(&ctx, &methods, seq, &spec)?.cells);
                }
                report = EvalReport {
                    experiment: "gap_sweep".into(),
                    cells,
                };
            }
            "long_gap" => {
                let spec = LongGapSpec {
                    marker_counts: file.marker_counts.clone().unwrap_or_else(|| vec![3, 30]),
                    repeats: file.repeats.unwrap_or(5),
                    start_s: file.start_s.unwrap_or(1.5),
                    present_s: file.present_s.unwrap_or(1.0),
                    gap_s: file.gap_s.unwrap_or(5.0),
                    seed: file.seed,
                };
                let mut cells = Vec::new();
                let mut all_curves = Vec::new();
                for seq in &sequences {
                    let (r, curves) = run_long_gap(&ctx, &methods, seq, &spec)?;
                    cells.extend(r.cells);
                    all_curves.extend(curves);
                }
                report = EvalReport {
                    experiment: "long_gap".into(),
                    cells,
                };
                curves_csv = Some(curves_to_csv(&all_curves));
            }
            other => {
                return Err(CliError::config(format!(
                    "unknown experiment `{other}`; valid names: {}",
                    config::EXPERIMENT_NAMES.join(", ")
                )))
            }
        }
    }

    std::fs::write(out_dir.join("report.csv"), report.to_csv())?;
    std::fs::write(out_dir.join("report.json"), report.to_json())?;
    if let Some(csv) = curves_csv {
        std::fs::write(out_dir.join("curves.csv"), csv)?;
    }
    println!(
        "{}: {} cells -> {}",
        report.experiment,
        report.cells.len(),
        out_dir.display()
    );
    for cell in &report.cells {
        println!(
            "  {} {} {}: {:.4} ± {:.4} cm",
            cell.method, cell.sequence, cell.setting, cell.mean_cm, cell.std_cm
        );
    }
    Ok(())
}

fn resolve_methods<'a>(
    names: &[String],
    lstm: &'a Option<ModelFile>,
    window: &'a Option<ModelFile>,
) -> Result<Vec<Method<'a>>, CliError> {
    if names.is_empty() {
        return Err(CliError::config("no methods listed".into()));
    }
    names
        .iter()
        .map(|n| match n.as_str() {
            "interpolation" => Ok(Method::Interpolation),
            "fill_mean" => Ok(Method::FillMean),
            "lstm" => model_method(lstm, "lstm"),
            "window" => model_method(window, "window"),
            other => Err(CliError::config(format!(
                "unknown method `{other}`; valid: interpolation, fill_mean, lstm, window"
            ))),
        })
        .collect()
}

fn model_method<'a>(model: &'a Option<ModelFile>, which: &str) -> Result<Method<'a>, CliError> {
    let m = model
        .as_ref()
        .ok_or_else(|| CliError::config(format!("method `{which}` needs a {which}_model path")))?;
    let _: &ModelParams = &m.params;
    Ok(Method::Model(&m.params))
}

fn resolve_sequences<'a>(
    prepared: &'a PreparedDataset,
    ids: &[String],
) -> Result<Vec<&'a mocap_recon::pipeline::PreparedSequence>, CliError> {
    if ids.is_empty() {
        return Ok(prepared.test.iter().collect());
    }
    ids.iter()
        .map(|id| {
            prepared
                .test
                .iter()
                .chain(&prepared.validation)
                .chain(&prepared.train)
                .find(|s| &s.id == id)
                .ok_or_else(|| CliError::config(format!("unknown sequence id `{id}`")))
        })
        .collect()
}
