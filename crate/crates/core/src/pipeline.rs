//! End-to-end study orchestration: load a dynamic series and a tumor
//! mask, resolve T10, convert to concentration, detect the vascular
//! region, fit the VIF and the per-voxel tissue model, summarize, and
//! write artifacts.
//!
//! Every stage error is tagged with its stage name so failures point at
//! the pipeline step, and partially written artifacts are removed. For
//! a fixed configuration the numeric outputs are identical regardless
//! of thread count; only the recorded wall-clock timings vary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{fit_tissue_map, fit_vif, FitConfig, FitResult};
use crate::io;
use crate::metrics::{histogram_features, HistogramFeatures, MapField};
use crate::relaxometry::{estimate_t10_vfa, signal_to_concentration, T10Map};
use crate::vif::{VifModelKind, VifParams};
use crate::vifregion::{detect_vif_region, extract_vif_curve, VifRegionConfig};
use crate::volume::{voxel_coords, ParameterMap, TimeSeries, VoxelMask};

/// Which report files to write beside the binary artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportFormats {
    pub csv: bool,
    pub json: bool,
}

impl Default for ReportFormats {
    fn default() -> Self {
        Self { csv: true, json: true }
    }
}

/// Where the pre-contrast T10 map comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum T10Source {
    /// Use a `.t10` file when the series directory has one, otherwise
    /// estimate from the VFA calibration scans.
    Auto,
    /// Require a `.t10` file.
    File,
    /// Require VFA calibration scans.
    Vfa,
}

/// Full pipeline configuration; everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Directory holding `series.meta` and the volume files.
    pub series_dir: PathBuf,
    /// Tumor mask file (segmentation is an input, not a stage).
    pub mask_path: PathBuf,
    pub output_dir: PathBuf,
    pub model: VifModelKind,
    /// Pre-contrast frames used for signal calibration.
    pub baseline_count: usize,
    pub t10: T10Source,
    pub vif_region: VifRegionConfig,
    pub fit: FitConfig,
    /// Tissue-fit worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub report_formats: ReportFormats,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            series_dir: PathBuf::new(),
            mask_path: PathBuf::new(),
            output_dir: PathBuf::new(),
            model: VifModelKind::Cubic,
            baseline_count: 1,
            t10: T10Source::Auto,
            vif_region: VifRegionConfig::default(),
            fit: FitConfig::default(),
            threads: None,
            report_formats: ReportFormats::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, path) in [
            ("series_dir", &self.series_dir),
            ("mask_path", &self.mask_path),
            ("output_dir", &self.output_dir),
        ] {
            if path.as_os_str().is_empty() {
                return Err(Error::InvalidParam(format!("{name} is not set")));
            }
        }
        if self.baseline_count < 1 {
            return Err(Error::InvalidParam("baseline_count must be ≥ 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParam("threads must be ≥ 1".into()));
        }
        self.vif_region.validate()?;
        self.fit.validate()
    }
}

/// Wall-clock duration of one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Aggregate statistics of the fitted map inside the tumor mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub masked_voxels: usize,
    pub converged_voxels: usize,
    /// Medians over converged voxels (NaN when none converged).
    pub median_ktrans: f64,
    pub median_ve: f64,
    /// Mean residual mse over converged voxels (NaN when none).
    pub mean_mse: f64,
}

/// Everything a run produces besides the on-disk artifacts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    /// Stage timings in execution order.
    pub stages: Vec<StageTiming>,
    pub vif_region_voxels: usize,
    pub vif_fit: FitResult<VifParams>,
    pub map_summary: MapSummary,
    pub histogram_ktrans: HistogramFeatures,
    pub histogram_ve: HistogramFeatures,
    /// Config echo; re-running from it reproduces the numeric outputs.
    pub config: PipelineConfig,
}

/// Stage names in execution order, as they appear in `RunReport::stages`.
pub const STAGES: [&str; 10] = [
    "series-input",
    "segmentation-input",
    "t10-estimation",
    "signal-conversion",
    "vif-detection",
    "vif-extraction",
    "vif-fit",
    "tissue-fit",
    "histogram",
    "report-generation",
];

fn find_t10_file(dir: &Path) -> Result<Option<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().map(|e| e == "t10").unwrap_or(false) {
            found.push(path);
        }
    }
    found.sort();
    match found.len() {
        0 => Ok(None),
        1 => Ok(Some(found.pop().expect("one element"))),
        _ => Err(Error::parse(dir, format!("multiple .t10 maps: {found:?}"))),
    }
}

fn resolve_t10(cfg: &PipelineConfig, series: &TimeSeries) -> Result<T10Map> {
    let dir = &cfg.series_dir;
    let from_vfa = || -> Result<T10Map> {
        let (volumes, acq) = io::load_vfa_set(dir)?;
        estimate_t10_vfa(&volumes, &acq)
    };
    let t10 = match cfg.t10 {
        T10Source::File => {
            let path = find_t10_file(dir)?.ok_or_else(|| {
                Error::InsufficientData(format!("no .t10 map in {}", dir.display()))
            })?;
            io::load_t10_map(&path)?
        }
        T10Source::Vfa => from_vfa()?,
        T10Source::Auto => match find_t10_file(dir)? {
            Some(path) => io::load_t10_map(&path)?,
            None => from_vfa().map_err(|_| {
                Error::InsufficientData(
                    "no T10 source: provide a .t10 map or VFA calibration scans".into(),
                )
            })?,
        },
    };
    if t10.dims() != series.dims() {
        return Err(Error::DimMismatch {
            expected: series.dims(),
            got: t10.dims(),
        });
    }
    Ok(t10)
}

fn median_of(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn summarize_map(map: &ParameterMap, mask: &VoxelMask) -> MapSummary {
    let mut ktrans = Vec::new();
    let mut ve = Vec::new();
    let mut mse_sum = 0.0;
    let mut converged = 0usize;
    for i in mask.indices() {
        if map.converged()[i] {
            converged += 1;
            ktrans.push(map.ktrans()[i]);
            ve.push(map.ve()[i]);
            mse_sum += map.mse()[i];
        }
    }
    MapSummary {
        masked_voxels: mask.count(),
        converged_voxels: converged,
        median_ktrans: median_of(ktrans),
        median_ve: median_of(ve),
        mean_mse: if converged > 0 {
            mse_sum / converged as f64
        } else {
            f64::NAN
        },
    }
}

/// Tracks artifacts so a failed run leaves no partial output behind.
struct ArtifactWriter {
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    fn new() -> Self {
        Self { written: Vec::new() }
    }

    fn write(&mut self, path: PathBuf, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&path)?;
        self.written.push(path);
        Ok(())
    }

    fn cleanup(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

/// Per-voxel CSV of the fitted map over the mask.
fn save_map_csv(path: &Path, map: &ParameterMap, mask: &VoxelMask) -> Result<()> {
    let mut out = String::from("x,y,z,ktrans,ve,kep,mse,converged\n");
    for i in mask.indices() {
        let (x, y, z) = voxel_coords(map.dims(), i);
        let v = map.voxel(i);
        out.push_str(&format!(
            "{x},{y},{z},{},{},{},{},{}\n",
            v.ktrans,
            v.ve,
            v.kep,
            v.mse,
            u8::from(v.converged)
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Run the automated pipeline end to end and write artifacts into
/// `cfg.output_dir`: `fit.pmap`, `vif_region.mask`, `vif_curve.csv`,
/// `vif_fit.json`, plus `map.csv` / `report.json` per `report_formats`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut stages: Vec<StageTiming> = Vec::with_capacity(STAGES.len());
    let timed = |stages: &mut Vec<StageTiming>, stage: &'static str, t0: Instant| {
        stages.push(StageTiming {
            stage: stage.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
    };

    let t0 = Instant::now();
    let (series, acq) = io::load_timeseries(&cfg.series_dir).map_err(|e| e.in_stage(STAGES[0]))?;
    acq.validate().map_err(|e| e.in_stage(STAGES[0]))?;
    timed(&mut stages, STAGES[0], t0);

    let t0 = Instant::now();
    let tumor_mask = io::load_mask(&cfg.mask_path).map_err(|e| e.in_stage(STAGES[1]))?;
    if tumor_mask.dims() != series.dims() {
        return Err(Error::DimMismatch {
            expected: series.dims(),
            got: tumor_mask.dims(),
        }
        .in_stage(STAGES[1]));
    }
    if tumor_mask.is_empty() {
        return Err(Error::EmptyMask.in_stage(STAGES[1]));
    }
    timed(&mut stages, STAGES[1], t0);

    let t0 = Instant::now();
    let t10 = resolve_t10(cfg, &series).map_err(|e| e.in_stage(STAGES[2]))?;
    timed(&mut stages, STAGES[2], t0);

    let t0 = Instant::now();
    let conc = signal_to_concentration(&series, &t10, &acq, cfg.baseline_count)
        .map_err(|e| e.in_stage(STAGES[3]))?;
    timed(&mut stages, STAGES[3], t0);

    let t0 = Instant::now();
    let vif_mask = detect_vif_region(&series, &cfg.vif_region).map_err(|e| e.in_stage(STAGES[4]))?;
    timed(&mut stages, STAGES[4], t0);

    let t0 = Instant::now();
    let (t_min, cp) = extract_vif_curve(&series, &vif_mask, &t10, &acq, cfg.baseline_count)
        .map_err(|e| e.in_stage(STAGES[5]))?;
    timed(&mut stages, STAGES[5], t0);

    let t0 = Instant::now();
    let vif_fit = fit_vif(&cp, &t_min, cfg.model, &cfg.fit).map_err(|e| e.in_stage(STAGES[6]))?;
    timed(&mut stages, STAGES[6], t0);

    let t0 = Instant::now();
    let map = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")).in_stage(STAGES[7]))?
            .install(|| fit_tissue_map(&conc, &tumor_mask, cfg.model, &vif_fit.params, &cfg.fit)),
        None => fit_tissue_map(&conc, &tumor_mask, cfg.model, &vif_fit.params, &cfg.fit),
    }
    .map_err(|e| e.in_stage(STAGES[7]))?;
    timed(&mut stages, STAGES[7], t0);

    let t0 = Instant::now();
    let histogram_ktrans =
        histogram_features(&map, MapField::Ktrans, &tumor_mask).map_err(|e| e.in_stage(STAGES[8]))?;
    let histogram_ve =
        histogram_features(&map, MapField::Ve, &tumor_mask).map_err(|e| e.in_stage(STAGES[8]))?;
    timed(&mut stages, STAGES[8], t0);

    let t0 = Instant::now();
    let map_summary = summarize_map(&map, &tumor_mask);
    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        stages,
        vif_region_voxels: vif_mask.count(),
        vif_fit,
        map_summary,
        histogram_ktrans,
        histogram_ve,
        config: cfg.clone(),
    };

    let out = &cfg.output_dir;
    let mut writer = ArtifactWriter::new();
    let write_all = |writer: &mut ArtifactWriter, report: &RunReport| -> Result<()> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        writer.write(out.join("vif_region.mask"), |p| io::save_mask(p, &vif_mask))?;
        writer.write(out.join("vif_curve.csv"), |p| {
            io::save_curve_csv(p, "t_min,cp_mmol_per_l", &t_min, &cp)
        })?;
        writer.write(out.join("vif_fit.json"), |p| {
            let json = serde_json::to_string_pretty(&report.vif_fit)
                .map_err(|e| Error::parse(p, format!("serialize: {e}")))?;
            fs::write(p, json).map_err(|e| Error::io(p, e))
        })?;
        writer.write(out.join("fit.pmap"), |p| io::save_parameter_map(&map, p))?;
        if cfg.report_formats.csv {
            writer.write(out.join("map.csv"), |p| save_map_csv(p, &map, &tumor_mask))?;
        }
        if cfg.report_formats.json {
            writer.write(out.join("report.json"), |p| {
                let json = serde_json::to_string_pretty(report)
                    .map_err(|e| Error::parse(p, format!("serialize: {e}")))?;
                fs::write(p, json).map_err(|e| Error::io(p, e))
            })?;
        }
        Ok(())
    };
    if let Err(e) = write_all(&mut writer, &report) {
        writer.cleanup();
        return Err(e.in_stage(STAGES[9]));
    }
    timed(&mut report.stages, STAGES[9], t0);

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_phantom, PhantomLayout, PhantomOptions};
    use crate::vif::VifParams;
    use crate::volume::AcquisitionParams;

    fn write_study(dir: &Path) -> PipelineConfig {
        let layout = PhantomLayout {
            ktrans_values: vec![0.05, 0.20],
            ve_values: vec![0.10, 0.40],
            patch_size: 3,
            strip_height: 3,
            strip_width: 6,
            timestamp_count: 40,
        };
        let vif = VifParams {
            a: 2.0,
            b: 0.8,
            alpha: 1.5,
            beta: 0.05,
        };
        let acq = AcquisitionParams {
            tr_s: 0.005,
            flip_angles_deg: vec![5.0, 10.0, 25.0],
            r1: 4.5,
            htc: 0.45,
        };
        let data = generate_phantom(
            &layout,
            &vif,
            VifModelKind::Cubic,
            &acq,
            1.0,
            1.4,
            3.0,
            &PhantomOptions::default(),
        )
        .unwrap();
        io::save_timeseries(dir, "study", &data.series, &acq).unwrap();
        io::save_vfa_set(dir, "study", &data.vfa).unwrap();
        io::save_t10_map(&data.t10, &dir.join("t10.t10")).unwrap();
        io::save_mask(&dir.join("tumor.mask"), &data.tumor_mask).unwrap();
        PipelineConfig {
            series_dir: dir.to_path_buf(),
            mask_path: dir.join("tumor.mask"),
            output_dir: dir.join("out"),
            ..Default::default()
        }
    }

    #[test]
    fn pipeline_runs_and_reports_all_stages() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_study(dir.path());
        let report = run_pipeline(&cfg).unwrap();
        let stage_names: Vec<&str> = report.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(stage_names, STAGES.to_vec());
        assert!(report.stages.iter().all(|s| s.seconds >= 0.0));
        assert_eq!(report.vif_region_voxels, 18); // the 3×6 strip
        assert!(report.vif_fit.converged);
        assert_eq!(report.map_summary.masked_voxels, 36);
        assert!(report.map_summary.converged_voxels > 0);
        for artifact in ["fit.pmap", "vif_region.mask", "vif_curve.csv", "vif_fit.json", "map.csv", "report.json"] {
            assert!(cfg.output_dir.join(artifact).exists(), "{artifact} missing");
        }
    }

    #[test]
    fn pipeline_is_thread_count_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_study(dir.path());

        cfg.threads = Some(1);
        cfg.output_dir = dir.path().join("out1");
        let r1 = run_pipeline(&cfg).unwrap();
        cfg.threads = Some(4);
        cfg.output_dir = dir.path().join("out4");
        let r4 = run_pipeline(&cfg).unwrap();

        assert_eq!(r1.vif_fit.params, r4.vif_fit.params);
        let m1 = fs::read(dir.path().join("out1/fit.pmap")).unwrap();
        let m4 = fs::read(dir.path().join("out4/fit.pmap")).unwrap();
        assert_eq!(m1, m4, "parameter maps differ across thread counts");
    }

    #[test]
    fn missing_mask_is_a_segmentation_stage_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_study(dir.path());
        cfg.mask_path = dir.path().join("nonexistent.mask");
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage(), Some("segmentation-input"));
        assert!(err.is_validation());
    }

    #[test]
    fn empty_mask_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_study(dir.path());
        let dims = io::load_mask(&cfg.mask_path).unwrap().dims();
        let empty = VoxelMask::empty(dims).unwrap();
        let path = dir.path().join("empty.mask");
        io::save_mask(&path, &empty).unwrap();
        cfg.mask_path = path;
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage(), Some("segmentation-input"));
    }

    #[test]
    fn failed_artifact_write_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_study(dir.path());
        cfg.output_dir = dir.path().join("out");
        // A directory squatting on the fit.pmap path forces the fourth
        // artifact write to fail after three files went out.
        fs::create_dir_all(cfg.output_dir.join("fit.pmap")).unwrap();
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage(), Some("report-generation"));
        assert!(!cfg.output_dir.join("vif_region.mask").exists());
        assert!(!cfg.output_dir.join("vif_curve.csv").exists());
    }

    #[test]
    fn t10_source_modes() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_study(dir.path());

        cfg.t10 = T10Source::File;
        cfg.output_dir = dir.path().join("out_file");
        assert!(run_pipeline(&cfg).is_ok());

        // VFA estimation on noise-free scans recovers T10 and the same fits.
        cfg.t10 = T10Source::Vfa;
        cfg.output_dir = dir.path().join("out_vfa");
        let report = run_pipeline(&cfg).unwrap();
        assert!(report.map_summary.converged_voxels > 0);

        // Auto without any .t10 file falls back to VFA.
        fs::remove_file(dir.path().join("t10.t10")).unwrap();
        cfg.t10 = T10Source::Auto;
        cfg.output_dir = dir.path().join("out_auto");
        assert!(run_pipeline(&cfg).is_ok());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = PipelineConfig {
            series_dir: PathBuf::from("/tmp/series"),
            mask_path: PathBuf::from("/tmp/mask.mask"),
            output_dir: PathBuf::from("/tmp/out"),
            model: VifModelKind::Linear,
            threads: Some(2),
            ..Default::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        // Defaults fill missing fields.
        let sparse: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(sparse.model, VifModelKind::Cubic);
        assert_eq!(sparse.baseline_count, 1);
    }
}
