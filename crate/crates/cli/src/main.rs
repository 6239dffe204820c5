//! `dcekit` — command-line front end of the toolkit.
//!
//! Subcommands map one-to-one onto library operations: `fit` runs the
//! whole pipeline, `detect-vif` / `fit-vif-curve` expose its middle
//! stages, `phantom` synthesizes and scores ground-truth studies, and
//! `metrics` compares masks and summarizes parameter maps.
//!
//! Exit codes: 0 on success, 2 when the inputs fail validation (bad
//! paths, malformed files, inconsistent dimensions — and clap's own
//! usage errors), 3 when a computation fails on valid inputs.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcekit_core::fitting::{fit_tissue_map, fit_vif, FitConfig};
use dcekit_core::metrics::{
    confusion, dice, histogram_features, precision, sensitivity, specificity, MapField,
};
use dcekit_core::phantom::{
    evaluate_fit_errors, generate_phantom, save_error_report_csv, save_truth_csv, GaussianNoise,
    PhantomLayout, PhantomOptions,
};
use dcekit_core::pipeline::{run_pipeline, PipelineConfig, T10Source};
use dcekit_core::relaxometry::signal_to_concentration;
use dcekit_core::vif::{VifModelKind, VifParams};
use dcekit_core::vifregion::{detect_vif_region, extract_vif_curve, VifRegionConfig};
use dcekit_core::volume::AcquisitionParams;
use dcekit_core::{io, Error, Result};

#[derive(Parser)]
#[command(name = "dcekit", version, about = "DCE-MRI pharmacokinetic analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: T10, concentration, VIF, tissue fit, report.
    Fit(FitArgs),
    /// Detect the vascular input region of a study and save it as a mask.
    DetectVif(DetectVifArgs),
    /// Fit a plasma model to a concentration curve CSV.
    FitVifCurve(FitVifCurveArgs),
    /// Synthesize and score ground-truth phantom studies.
    #[command(subcommand)]
    Phantom(PhantomCommand),
    /// Mask comparison and parameter-map summaries.
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Subcommand)]
enum PhantomCommand {
    /// Write a synthetic study with known per-patch (Ktrans, ve).
    Generate(PhantomGenerateArgs),
    /// Re-fit a generated study and score it against its truth table.
    Evaluate(PhantomEvaluateArgs),
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Confusion counts, DICE, sensitivity/specificity/precision.
    CompareMasks(CompareMasksArgs),
    /// Histogram features of one parameter-map field inside a mask.
    Histogram(HistogramArgs),
}

/// Plasma model selector shared by every fitting subcommand.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Biexp,
    Linear,
    Cubic,
}

impl ModelArg {
    fn kind(self) -> VifModelKind {
        match self {
            ModelArg::Biexp => VifModelKind::BiExponential,
            ModelArg::Linear => VifModelKind::Linear,
            ModelArg::Cubic => VifModelKind::Cubic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum T10Arg {
    Auto,
    File,
    Vfa,
}

impl T10Arg {
    fn source(self) -> T10Source {
        match self {
            T10Arg::Auto => T10Source::Auto,
            T10Arg::File => T10Source::File,
            T10Arg::Vfa => T10Source::Vfa,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FieldArg {
    Ktrans,
    Ve,
    Kep,
}

impl FieldArg {
    fn field(self) -> MapField {
        match self {
            FieldArg::Ktrans => MapField::Ktrans,
            FieldArg::Ve => MapField::Ve,
            FieldArg::Kep => MapField::Kep,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Study directory (volumes + series.meta).
    #[arg(long)]
    series: Option<PathBuf>,
    /// Tumor mask file.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pipeline configuration JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Plasma model.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Pre-contrast frames used as signal baseline.
    #[arg(long)]
    baseline: Option<usize>,
    /// Where the T10 map comes from.
    #[arg(long, value_enum)]
    t10: Option<T10Arg>,
    /// Tissue-fit worker threads (falls back to DCEKIT_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Multistart seed for the fits.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DetectVifArgs {
    /// Study directory.
    #[arg(long)]
    series: PathBuf,
    /// Where to write the detected mask.
    #[arg(long)]
    out: PathBuf,
    /// Detector configuration JSON (defaults otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitVifCurveArgs {
    /// Curve CSV: `t_min,<value>` rows as written by the pipeline.
    #[arg(long)]
    curve: PathBuf,
    /// Plasma model.
    #[arg(long, value_enum, default_value = "cubic")]
    model: ModelArg,
    /// Fit configuration JSON (defaults otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Multistart seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Optional JSON output of the fit result.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhantomGenerateArgs {
    /// Output directory for the study.
    #[arg(long)]
    out: PathBuf,
    /// Plasma model generating the curves.
    #[arg(long, value_enum, default_value = "cubic")]
    model: ModelArg,
    /// Ktrans per patch column, min⁻¹.
    #[arg(long, value_delimiter = ',')]
    ktrans: Option<Vec<f64>>,
    /// ve per patch row.
    #[arg(long, value_delimiter = ',')]
    ve: Option<Vec<f64>>,
    /// Patch edge length in pixels.
    #[arg(long)]
    patch_size: Option<usize>,
    /// Vascular strip height in pixels.
    #[arg(long)]
    strip_height: Option<usize>,
    /// Vascular strip width in pixels.
    #[arg(long)]
    strip_width: Option<usize>,
    /// Number of dynamic frames.
    #[arg(long)]
    timestamps: Option<usize>,
    /// Frame spacing in seconds.
    #[arg(long, default_value_t = 3.0)]
    dt: f64,
    /// Plasma-model parameters.
    #[arg(long, default_value_t = 2.0)]
    vif_a: f64,
    #[arg(long, default_value_t = 0.8)]
    vif_b: f64,
    #[arg(long, default_value_t = 1.5)]
    vif_alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    vif_beta: f64,
    /// Acquisition: repetition time (s), flip angles (deg; last one is
    /// the dynamic angle), relaxivity (L/mmol/s), haematocrit.
    #[arg(long, default_value_t = 0.005)]
    tr: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 25.0])]
    flip_angles: Vec<f64>,
    #[arg(long, default_value_t = 4.5)]
    r1: f64,
    #[arg(long, default_value_t = 0.45)]
    htc: f64,
    /// Pre-contrast T1 of tissue and blood, seconds.
    #[arg(long, default_value_t = 1.0)]
    t10_tissue: f64,
    #[arg(long, default_value_t = 1.4)]
    t10_blood: f64,
    /// Additive Gaussian signal noise (omit for a noise-free study).
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Noise seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct PhantomEvaluateArgs {
    /// Directory written by `phantom generate`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Plasma model fitted to the data.
    #[arg(long, value_enum, default_value = "cubic")]
    model: ModelArg,
    /// Pre-contrast frames used as signal baseline.
    #[arg(long, default_value_t = 1)]
    baseline: usize,
    /// Tissue-fit worker threads (falls back to DCEKIT_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Multistart seed for the fits.
    #[arg(long)]
    seed: Option<u64>,
    /// Optional JSON copy of the error report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareMasksArgs {
    /// Predicted mask.
    predicted: PathBuf,
    /// Reference mask.
    reference: PathBuf,
    /// Optional JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HistogramArgs {
    /// Parameter-map file.
    #[arg(long)]
    map: PathBuf,
    /// Mask selecting the voxels to summarize.
    #[arg(long)]
    mask: PathBuf,
    /// Which map channel to summarize.
    #[arg(long, value_enum)]
    field: FieldArg,
    /// Optional JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::DetectVif(args) => cmd_detect_vif(args),
        Command::FitVifCurve(args) => cmd_fit_vif_curve(args),
        Command::Phantom(PhantomCommand::Generate(args)) => cmd_phantom_generate(args),
        Command::Phantom(PhantomCommand::Evaluate(args)) => cmd_phantom_evaluate(args),
        Command::Metrics(MetricsCommand::CompareMasks(args)) => cmd_compare_masks(args),
        Command::Metrics(MetricsCommand::Histogram(args)) => cmd_histogram(args),
    }
}

// --------------------------------------------------------- utilities

/// `--threads` wins; otherwise DCEKIT_THREADS; otherwise the library
/// picks (global pool / default parallelism).
fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("DCEKIT_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::InvalidParam(format!("DCEKIT_THREADS must be a positive integer, got {raw:?}"))
            })?;
            if n == 0 {
                return Err(Error::InvalidParam("DCEKIT_THREADS must be ≥ 1".into()));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, format!("invalid JSON: {e}")))
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path, format!("serialize: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn fit_config(config: Option<PathBuf>, seed: Option<u64>) -> Result<FitConfig> {
    let mut cfg = match config {
        Some(path) => load_json::<FitConfig>(&path)?,
        None => FitConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn opt_stat(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.6}"),
        None => "undefined".into(),
    }
}

/// Run fit_tissue_map on a dedicated pool when a thread count is given.
fn fit_map_with_threads(
    conc: &dcekit_core::relaxometry::ConcentrationSeries,
    mask: &dcekit_core::volume::VoxelMask,
    kind: VifModelKind,
    vif: &VifParams,
    cfg: &FitConfig,
    threads: Option<usize>,
) -> Result<dcekit_core::volume::ParameterMap> {
    match threads {
        Some(n) => rayon_pool(n)?.install(|| fit_tissue_map(conc, mask, kind, vif, cfg)),
        None => fit_tissue_map(conc, mask, kind, vif, cfg),
    }
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParam(format!("cannot build a {threads}-thread pool: {e}")))
}

// ------------------------------------------------------------ fit

fn cmd_fit(args: FitArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => load_json::<PipelineConfig>(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(series) = args.series {
        cfg.series_dir = series;
    }
    if let Some(mask) = args.mask {
        cfg.mask_path = mask;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(model) = args.model {
        cfg.model = model.kind();
    }
    if let Some(baseline) = args.baseline {
        cfg.baseline_count = baseline;
    }
    if let Some(t10) = args.t10 {
        cfg.t10 = t10.source();
    }
    if let Some(seed) = args.seed {
        cfg.fit.rng_seed = seed;
    }
    cfg.threads = resolve_threads(args.threads)?;

    let report = run_pipeline(&cfg)?;

    let total: f64 = report.stages.iter().map(|s| s.seconds).sum();
    println!("pipeline finished in {total:.2} s (dcekit {})", report.version);
    for stage in &report.stages {
        println!("  {:<20} {:>8.3} s", stage.stage, stage.seconds);
    }
    let vif = &report.vif_fit.params;
    println!(
        "vif region: {} voxels; fit ({}): a={:.4} b={:.4} alpha={:.4} beta={:.4} (mse {:.3e}, {})",
        report.vif_region_voxels,
        cfg.model.as_str(),
        vif.a,
        vif.b,
        vif.alpha,
        vif.beta,
        report.vif_fit.mse,
        if report.vif_fit.converged { "converged" } else { "not converged" },
    );
    let map = &report.map_summary;
    println!(
        "map: {}/{} voxels converged, median ktrans {:.4} min⁻¹, median ve {:.4}",
        map.converged_voxels, map.masked_voxels, map.median_ktrans, map.median_ve
    );
    println!("artifacts: {}", cfg.output_dir.display());
    Ok(())
}

// ----------------------------------------------------- detect-vif

fn cmd_detect_vif(args: DetectVifArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => load_json::<VifRegionConfig>(path)?,
        None => VifRegionConfig::default(),
    };
    let (series, _) = io::load_timeseries(&args.series)?;
    let mask = detect_vif_region(&series, &cfg)?;
    io::save_mask(&args.out, &mask)?;
    println!(
        "vascular region: {} voxels in a {:?} volume -> {}",
        mask.count(),
        mask.dims(),
        args.out.display()
    );
    Ok(())
}

// -------------------------------------------------- fit-vif-curve

fn cmd_fit_vif_curve(args: FitVifCurveArgs) -> Result<()> {
    let (t_min, values) = io::load_curve_csv(&args.curve)?;
    let cfg = fit_config(args.config, args.seed)?;
    let kind = args.model.kind();
    let fit = fit_vif(&values, &t_min, kind, &cfg)?;
    println!(
        "{} fit over {} samples: a={:.6} b={:.6} alpha={:.6} beta={:.6}",
        kind.as_str(),
        t_min.len(),
        fit.params.a,
        fit.params.b,
        fit.params.alpha,
        fit.params.beta,
    );
    println!(
        "mse {:.6e}, {} after {} iterations",
        fit.mse,
        if fit.converged { "converged" } else { "not converged" },
        fit.iterations
    );
    if let Some(out) = &args.out {
        write_json(out, &fit)?;
        println!("fit result: {}", out.display());
    }
    Ok(())
}

// ------------------------------------------------------- phantom

const SERIES_NAME: &str = "phantom";
const LAYOUT_FILE: &str = "layout.json";
const TRUTH_FILE: &str = "truth.csv";

fn cmd_phantom_generate(args: PhantomGenerateArgs) -> Result<()> {
    let defaults = PhantomLayout::default();
    let layout = PhantomLayout {
        ktrans_values: args.ktrans.unwrap_or(defaults.ktrans_values),
        ve_values: args.ve.unwrap_or(defaults.ve_values),
        patch_size: args.patch_size.unwrap_or(defaults.patch_size),
        strip_height: args.strip_height.unwrap_or(defaults.strip_height),
        strip_width: args.strip_width.unwrap_or(defaults.strip_width),
        timestamp_count: args.timestamps.unwrap_or(defaults.timestamp_count),
    };
    let vif = VifParams {
        a: args.vif_a,
        b: args.vif_b,
        alpha: args.vif_alpha,
        beta: args.vif_beta,
    };
    let acq = AcquisitionParams {
        tr_s: args.tr,
        flip_angles_deg: args.flip_angles,
        r1: args.r1,
        htc: args.htc,
    };
    let opts = PhantomOptions {
        noise: args.noise_sigma.map(|sigma| GaussianNoise { sigma, seed: args.seed }),
        ..Default::default()
    };
    let data = generate_phantom(
        &layout,
        &vif,
        args.model.kind(),
        &acq,
        args.t10_tissue,
        args.t10_blood,
        args.dt,
        &opts,
    )?;

    let dir = &args.out;
    io::save_timeseries(dir, SERIES_NAME, &data.series, &acq)?;
    if !data.vfa.is_empty() {
        io::save_vfa_set(dir, SERIES_NAME, &data.vfa)?;
    }
    io::save_t10_map(&data.t10, &dir.join("t10.t10"))?;
    io::save_mask(&dir.join("tumor.mask"), &data.tumor_mask)?;
    io::save_mask(&dir.join("vascular.mask"), &data.vascular_mask)?;
    save_truth_csv(&dir.join(TRUTH_FILE), &data.truth)?;
    write_json(&dir.join(LAYOUT_FILE), &layout)?;
    let t_min: Vec<f64> = data.series.timestamps_s().iter().map(|t| t / 60.0).collect();
    io::save_curve_csv(&dir.join("cp_true.csv"), "t_min,cp_mmol_per_l", &t_min, &data.cp)?;

    let dims = data.series.dims();
    println!(
        "phantom study: {}x{}x{} voxels, {} frames, {} patches -> {}",
        dims.0,
        dims.1,
        dims.2,
        layout.timestamp_count,
        data.truth.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_phantom_evaluate(args: PhantomEvaluateArgs) -> Result<()> {
    let dir = &args.input;
    let start = Instant::now();
    let (series, acq) = io::load_timeseries(dir)?;
    let layout: PhantomLayout = load_json(&dir.join(LAYOUT_FILE))?;
    let truth = dcekit_core::phantom::load_truth_csv(&dir.join(TRUTH_FILE))?;
    let t10 = io::load_t10_map(&dir.join("t10.t10"))?;
    let tumor = io::load_mask(&dir.join("tumor.mask"))?;
    let vascular = io::load_mask(&dir.join("vascular.mask"))?;

    let kind = args.model.kind();
    let fit_cfg = fit_config(None, args.seed)?;
    let threads = resolve_threads(args.threads)?;

    let conc = signal_to_concentration(&series, &t10, &acq, args.baseline)?;
    let (t_min, cp) = extract_vif_curve(&series, &vascular, &t10, &acq, args.baseline)?;
    let vif_fit = fit_vif(&cp, &t_min, kind, &fit_cfg)?;
    let map = fit_map_with_threads(&conc, &tumor, kind, &vif_fit.params, &fit_cfg, threads)?;
    let report = evaluate_fit_errors(&map, &truth, &layout)?;

    let errors_path = dir.join("errors.csv");
    save_error_report_csv(&errors_path, &report)?;
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }

    println!(
        "evaluated {} patches with the {} model in {:.2} s",
        report.patches.len(),
        kind.as_str(),
        start.elapsed().as_secs_f64()
    );
    println!("mean ktrans error: {:.3}%", report.mean_ktrans_err_pct);
    println!("mean ve error: {:.3}%", report.mean_ve_err_pct);
    if report.missing_patches > 0 {
        println!("patches without a converged voxel: {}", report.missing_patches);
    }
    println!("per-patch table: {}", errors_path.display());
    Ok(())
}

// ------------------------------------------------------- metrics

fn cmd_compare_masks(args: CompareMasksArgs) -> Result<()> {
    let predicted = io::load_mask(&args.predicted)?;
    let reference = io::load_mask(&args.reference)?;
    let counts = confusion(&predicted, &reference)?;
    let dice_score = dice(&predicted, &reference)?;

    println!(
        "voxels: {} (tp {}, fp {}, fn {}, tn {})",
        counts.total(),
        counts.true_positive,
        counts.false_positive,
        counts.false_negative,
        counts.true_negative
    );
    println!("dice: {}", opt_stat(dice_score));
    println!("sensitivity: {}", opt_stat(sensitivity(&counts)));
    println!("specificity: {}", opt_stat(specificity(&counts)));
    println!("precision: {}", opt_stat(precision(&counts)));

    if let Some(out) = &args.out {
        let json = serde_json::json!({
            "true_positive": counts.true_positive,
            "false_positive": counts.false_positive,
            "false_negative": counts.false_negative,
            "true_negative": counts.true_negative,
            "dice": dice_score,
            "sensitivity": sensitivity(&counts),
            "specificity": specificity(&counts),
            "precision": precision(&counts),
        });
        write_json(out, &json)?;
        println!("report: {}", out.display());
    }
    Ok(())
}

fn cmd_histogram(args: HistogramArgs) -> Result<()> {
    let map = io::load_parameter_map(&args.map)?;
    let mask = io::load_mask(&args.mask)?;
    let field = args.field.field();
    let features = histogram_features(&map, field, &mask)?;

    println!("{} over {} voxels:", field.as_str(), features.count);
    println!("  mean {:.6}", features.mean);
    println!("  std {:.6}", features.std);
    println!("  skewness {}", opt_stat(features.skewness));
    println!("  kurtosis {}", opt_stat(features.kurtosis));
    if let Some(out) = &args.out {
        write_json(out, &features)?;
        println!("report: {}", out.display());
    }
    Ok(())
}
