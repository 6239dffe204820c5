//! Synthetic validation phantom: a single-slice grid of tissue patches
//! with known (Ktrans, ve) plus a vascular strip along the image bottom,
//! rendered through the full SPGR forward model.
//!
//! The phantom closes the loop for end-to-end testing: generate signals
//! from known kinetics, push them through conversion and fitting, and
//! score the recovered parameters against the frozen truth table.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaxometry::{spgr_signal, T10Map};
use crate::vif::{eval_vif, tissue_response_analytic, TissueParams, VifModelKind, VifParams};
use crate::volume::{
    voxel_index, AcquisitionParams, Dims, ParameterMap, TimeSeries, Volume3D, VoxelMask,
};

/// Geometry and parameter grid of the synthetic phantom.
///
/// The image is `|ve_values|` rows × `|ktrans_values|` columns of square
/// tissue patches, with a vascular strip along the bottom edge. Row
/// index selects ve, column index selects Ktrans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomLayout {
    /// Ktrans per patch column, min⁻¹ (values ≥ 0).
    pub ktrans_values: Vec<f64>,
    /// ve per patch row, each in (0, 1].
    pub ve_values: Vec<f64>,
    /// Patch edge length in pixels.
    pub patch_size: usize,
    /// Vascular strip height in pixels (rows at the image bottom).
    pub strip_height: usize,
    /// Vascular strip width in pixels (columns from the left edge).
    pub strip_width: usize,
    /// Number of dynamic frames.
    pub timestamp_count: usize,
}

impl Default for PhantomLayout {
    fn default() -> Self {
        Self {
            ktrans_values: vec![0.01, 0.02, 0.05, 0.10, 0.20, 0.35],
            ve_values: vec![0.01, 0.05, 0.10, 0.20, 0.50],
            patch_size: 10,
            strip_height: 10,
            strip_width: 50,
            timestamp_count: 661,
        }
    }
}

impl PhantomLayout {
    pub fn validate(&self) -> Result<()> {
        if self.ktrans_values.is_empty() || self.ve_values.is_empty() {
            return Err(Error::InvalidParam("phantom needs ≥ 1 ktrans and ve value".into()));
        }
        for &k in &self.ktrans_values {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::InvalidParam(format!("ktrans value must be ≥ 0, got {k}")));
            }
        }
        for &v in &self.ve_values {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParam(format!("ve value must lie in (0, 1], got {v}")));
            }
        }
        if self.patch_size < 1 {
            return Err(Error::InvalidParam("patch_size must be ≥ 1".into()));
        }
        if self.strip_height < 1 || self.strip_width < 1 {
            return Err(Error::InvalidParam("vascular strip must be ≥ 1×1 pixels".into()));
        }
        if self.timestamp_count < 2 {
            return Err(Error::InvalidParam("phantom needs ≥ 2 timestamps".into()));
        }
        Ok(())
    }

    /// `(rows, cols)` of the patch grid.
    pub fn grid(&self) -> (usize, usize) {
        (self.ve_values.len(), self.ktrans_values.len())
    }

    /// Smallest volume dims holding the grid and the strip (single slice).
    pub fn dims(&self) -> Dims {
        let (rows, cols) = self.grid();
        let nx = (cols * self.patch_size).max(self.strip_width);
        let ny = rows * self.patch_size + self.strip_height;
        (nx, ny, 1)
    }
}

/// Ground truth for one patch of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchTruth {
    pub row: usize,
    pub col: usize,
    pub ktrans: f64,
    pub ve: f64,
}

/// Pixel set of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRegion {
    pub row: usize,
    pub col: usize,
    /// Flat voxel indices, scan order.
    pub indices: Vec<usize>,
}

/// Deterministic pixel assignment of a phantom image.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomRegions {
    /// Patches in row-major grid order.
    pub patches: Vec<PatchRegion>,
    /// Flat voxel indices of the vascular strip, scan order.
    pub strip: Vec<usize>,
}

/// Map a phantom image (any volume of sufficient size) back to its
/// patch and strip pixel sets. Patch (0, 0) starts at the top-left
/// corner; the strip hugs the bottom edge from the left. Patches are
/// per-slice identical across z.
pub fn parse_phantom_layout(dims: Dims, layout: &PhantomLayout) -> Result<PhantomRegions> {
    layout.validate()?;
    let (nx, ny, nz) = dims;
    let (rows, cols) = layout.grid();
    let need = layout.dims();
    if nx < need.0 || ny < need.1 || nz < 1 {
        return Err(Error::DimMismatch {
            expected: need,
            got: dims,
        });
    }
    let p = layout.patch_size;
    let mut patches = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let mut indices = Vec::with_capacity(p * p * nz);
            for z in 0..nz {
                for y in row * p..(row + 1) * p {
                    for x in col * p..(col + 1) * p {
                        indices.push(voxel_index(dims, x, y, z));
                    }
                }
            }
            indices.sort_unstable();
            patches.push(PatchRegion { row, col, indices });
        }
    }
    let mut strip = Vec::with_capacity(layout.strip_height * layout.strip_width * nz);
    for z in 0..nz {
        for y in ny - layout.strip_height..ny {
            for x in 0..layout.strip_width {
                strip.push(voxel_index(dims, x, y, z));
            }
        }
    }
    strip.sort_unstable();
    Ok(PhantomRegions { patches, strip })
}

/// Additive Gaussian signal noise (optional; phantoms are noise-free by
/// default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Generation knobs beyond the kinetic model.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomOptions {
    /// Equilibrium magnetization scale shared by all voxels.
    pub m0: f64,
    pub spacing_mm: (f64, f64, f64),
    pub noise: Option<GaussianNoise>,
}

impl Default for PhantomOptions {
    fn default() -> Self {
        Self {
            m0: 1000.0,
            spacing_mm: (1.0, 1.0, 1.0),
            noise: None,
        }
    }
}

/// Everything `generate_phantom` produces.
#[derive(Debug, Clone)]
pub struct PhantomDataset {
    pub series: TimeSeries,
    /// Calibration scans for the leading flip angles (empty when the
    /// acquisition lists only the dynamic angle).
    pub vfa: Vec<Volume3D>,
    /// True per-voxel (T10, M0).
    pub t10: T10Map,
    /// Union of all tissue patches.
    pub tumor_mask: VoxelMask,
    /// The vascular strip.
    pub vascular_mask: VoxelMask,
    pub truth: Vec<PatchTruth>,
    /// True plasma concentration at each frame (time grid = series
    /// timestamps / 60).
    pub cp: Vec<f64>,
}

/// Synthesize a phantom study.
///
/// Tissue patches follow the closed-form model response for their
/// (Ktrans, ve); the vascular strip carries blood concentration
/// `Cp·(1 − HTC)`; the background stays at pre-contrast baseline.
/// Concentrations map to T1 via `1/T1 = 1/T10 + r1·C` and then to SPGR
/// signals at the dynamic flip angle; calibration scans evaluate the
/// pre-contrast state at each leading flip angle.
#[allow(clippy::too_many_arguments)]
pub fn generate_phantom(
    layout: &PhantomLayout,
    vif: &VifParams,
    kind: VifModelKind,
    acq: &AcquisitionParams,
    t10_tissue_s: f64,
    t10_blood_s: f64,
    dt_s: f64,
    opts: &PhantomOptions,
) -> Result<PhantomDataset> {
    layout.validate()?;
    vif.validate()?;
    acq.validate()?;
    for (name, v) in [("t10_tissue_s", t10_tissue_s), ("t10_blood_s", t10_blood_s), ("dt_s", dt_s)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParam(format!("{name} must be > 0, got {v}")));
        }
    }
    if !(opts.m0.is_finite() && opts.m0 > 0.0) {
        return Err(Error::InvalidParam(format!("m0 must be > 0, got {}", opts.m0)));
    }
    if let Some(noise) = &opts.noise {
        if !(noise.sigma.is_finite() && noise.sigma >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "noise sigma must be ≥ 0, got {}",
                noise.sigma
            )));
        }
    }

    let dims = layout.dims();
    let regions = parse_phantom_layout(dims, layout)?;
    let n_t = layout.timestamp_count;
    let timestamps_s: Vec<f64> = (0..n_t).map(|k| k as f64 * dt_s).collect();
    let t_min: Vec<f64> = timestamps_s.iter().map(|t| t / 60.0).collect();
    let flip_dyn = acq.dynamic_flip_deg();

    let cp: Vec<f64> = t_min
        .iter()
        .map(|&t| eval_vif(kind, vif, t))
        .collect::<Result<_>>()?;

    let signal_at = |t10_s: f64, conc: f64, flip: f64| -> Result<f64> {
        let recip_t1 = 1.0 / t10_s + acq.r1 * conc;
        if !(recip_t1.is_finite() && recip_t1 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "concentration {conc} drives 1/T1 non-positive"
            )));
        }
        spgr_signal(opts.m0, 1.0 / recip_t1, acq.tr_s, flip)
    };

    // Per-frame signal curves, shared by every voxel of a region.
    let baseline_signal = signal_at(t10_tissue_s, 0.0, flip_dyn)?;
    let strip_curve: Vec<f64> = cp
        .iter()
        .map(|&c| signal_at(t10_blood_s, c * (1.0 - acq.htc), flip_dyn))
        .collect::<Result<_>>()?;
    let (rows, cols) = layout.grid();
    let mut truth = Vec::with_capacity(rows * cols);
    let mut patch_curves = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let (ktrans, ve) = (layout.ktrans_values[col], layout.ve_values[row]);
            let tissue = TissueParams::new(ktrans, ve)?;
            let curve: Vec<f64> = t_min
                .iter()
                .map(|&t| {
                    let ct = tissue_response_analytic(kind, vif, &tissue, t)?;
                    signal_at(t10_tissue_s, ct, flip_dyn)
                })
                .collect::<Result<_>>()?;
            truth.push(PatchTruth {
                row,
                col,
                ktrans,
                ve,
            });
            patch_curves.push(curve);
        }
    }

    let n = dims.0 * dims.1 * dims.2;
    let mut volumes = Vec::with_capacity(n_t);
    for k in 0..n_t {
        let mut data = vec![baseline_signal; n];
        for (patch, curve) in regions.patches.iter().zip(&patch_curves) {
            for &i in &patch.indices {
                data[i] = curve[k];
            }
        }
        for &i in &regions.strip {
            data[i] = strip_curve[k];
        }
        volumes.push(Volume3D::new(dims, opts.spacing_mm, data)?);
    }

    // Pre-contrast calibration scans, one per leading flip angle.
    let n_cal = acq.flip_angles_deg.len() - 1;
    let mut vfa = Vec::with_capacity(n_cal);
    for &angle in &acq.flip_angles_deg[..n_cal] {
        let tissue_s = signal_at(t10_tissue_s, 0.0, angle)?;
        let blood_s = signal_at(t10_blood_s, 0.0, angle)?;
        let mut data = vec![tissue_s; n];
        for &i in &regions.strip {
            data[i] = blood_s;
        }
        vfa.push(Volume3D::new(dims, opts.spacing_mm, data)?);
    }

    if let Some(noise) = &opts.noise {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.sigma)
            .map_err(|e| Error::InvalidParam(format!("noise distribution: {e}")))?;
        for volume in volumes.iter_mut().chain(vfa.iter_mut()) {
            for v in volume.data_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }

    let mut t10_s = vec![t10_tissue_s; n];
    for &i in &regions.strip {
        t10_s[i] = t10_blood_s;
    }
    let t10 = T10Map::new(dims, t10_s, vec![opts.m0; n])?;

    let mut tumor_mask = VoxelMask::empty(dims)?;
    for patch in &regions.patches {
        for &i in &patch.indices {
            tumor_mask.set(i, true);
        }
    }
    let mut vascular_mask = VoxelMask::empty(dims)?;
    for &i in &regions.strip {
        vascular_mask.set(i, true);
    }

    Ok(PhantomDataset {
        series: TimeSeries::new(volumes, timestamps_s)?,
        vfa,
        t10,
        tumor_mask,
        vascular_mask,
        truth,
        cp,
    })
}

/// Per-patch fit-vs-truth comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchError {
    pub row: usize,
    pub col: usize,
    pub ktrans_true: f64,
    pub ve_true: f64,
    /// Median fitted value over the patch's converged voxels (NaN when
    /// no voxel converged).
    pub ktrans_fit: f64,
    pub ve_fit: f64,
    /// `|fit − truth| / truth · 100` (NaN when the fit is missing).
    pub ktrans_err_pct: f64,
    pub ve_err_pct: f64,
    pub converged_voxels: usize,
}

/// Patch grid scores plus grand means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitErrorReport {
    pub patches: Vec<PatchError>,
    /// Means over patches with a defined error.
    pub mean_ktrans_err_pct: f64,
    pub mean_ve_err_pct: f64,
    /// Patches excluded from the means because no voxel converged.
    pub missing_patches: usize,
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn relative_error_pct(fit: f64, truth: f64) -> f64 {
    if truth == 0.0 || !fit.is_finite() {
        f64::NAN
    } else {
        (fit - truth).abs() / truth * 100.0
    }
}

/// Score a fitted map against the phantom truth table.
///
/// Per patch, the median fitted Ktrans and ve over *converged* voxels
/// is compared to truth as a relative percentage. Patches without a
/// single converged voxel are reported with NaN fits and excluded from
/// the means (counted in `missing_patches`).
pub fn evaluate_fit_errors(
    map: &ParameterMap,
    truth: &[PatchTruth],
    layout: &PhantomLayout,
) -> Result<FitErrorReport> {
    let regions = parse_phantom_layout(map.dims(), layout)?;
    let (rows, cols) = layout.grid();
    if truth.is_empty() {
        return Err(Error::InsufficientData("empty truth table".into()));
    }
    let mut patches = Vec::with_capacity(truth.len());
    let mut missing = 0usize;
    let (mut k_sum, mut k_n) = (0.0, 0usize);
    let (mut v_sum, mut v_n) = (0.0, 0usize);
    for t in truth {
        if t.row >= rows || t.col >= cols {
            return Err(Error::InvalidParam(format!(
                "truth patch ({}, {}) outside the {rows}×{cols} grid",
                t.row, t.col
            )));
        }
        let region = &regions.patches[t.row * cols + t.col];
        let mut ktrans_vals = Vec::new();
        let mut ve_vals = Vec::new();
        for &i in &region.indices {
            if map.converged()[i] && map.ktrans()[i].is_finite() && map.ve()[i].is_finite() {
                ktrans_vals.push(map.ktrans()[i]);
                ve_vals.push(map.ve()[i]);
            }
        }
        let converged_voxels = ktrans_vals.len();
        let (ktrans_fit, ve_fit) = if converged_voxels == 0 {
            missing += 1;
            (f64::NAN, f64::NAN)
        } else {
            (median(&mut ktrans_vals), median(&mut ve_vals))
        };
        let ktrans_err_pct = relative_error_pct(ktrans_fit, t.ktrans);
        let ve_err_pct = relative_error_pct(ve_fit, t.ve);
        if ktrans_err_pct.is_finite() {
            k_sum += ktrans_err_pct;
            k_n += 1;
        }
        if ve_err_pct.is_finite() {
            v_sum += ve_err_pct;
            v_n += 1;
        }
        patches.push(PatchError {
            row: t.row,
            col: t.col,
            ktrans_true: t.ktrans,
            ve_true: t.ve,
            ktrans_fit,
            ve_fit,
            ktrans_err_pct,
            ve_err_pct,
            converged_voxels,
        });
    }
    Ok(FitErrorReport {
        patches,
        mean_ktrans_err_pct: if k_n > 0 { k_sum / k_n as f64 } else { f64::NAN },
        mean_ve_err_pct: if v_n > 0 { v_sum / v_n as f64 } else { f64::NAN },
        missing_patches: missing,
    })
}

/// Column header shared by the truth table and the error report CSV.
pub const TRUTH_CSV_HEADER: &str =
    "row,col,ktrans_true,ve_true,ktrans_fit,ve_fit,ktrans_err_pct,ve_err_pct";

fn fmt_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Write a freshly generated truth table (fit/error columns empty).
pub fn save_truth_csv(path: &Path, truth: &[PatchTruth]) -> Result<()> {
    let mut out = String::from(TRUTH_CSV_HEADER);
    out.push('\n');
    for t in truth {
        out.push_str(&format!("{},{},{},{},,,,\n", t.row, t.col, t.ktrans, t.ve));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a truth table back (fit/error columns, if present, are ignored).
pub fn load_truth_csv(path: &Path) -> Result<Vec<PatchTruth>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == TRUTH_CSV_HEADER => {}
        other => {
            return Err(Error::parse(
                path,
                format!("expected header '{TRUTH_CSV_HEADER}', got {other:?}"),
            ))
        }
    }
    let mut truth = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(Error::parse(path, format!("line {}: too few columns", lineno + 2)));
        }
        let parse_usize = |s: &str, what: &str| {
            s.trim().parse::<usize>().map_err(|_| {
                Error::parse(path, format!("line {}: bad {what} '{s}'", lineno + 2))
            })
        };
        let parse_f64 = |s: &str, what: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::parse(path, format!("line {}: bad {what} '{s}'", lineno + 2))
            })
        };
        truth.push(PatchTruth {
            row: parse_usize(fields[0], "row")?,
            col: parse_usize(fields[1], "col")?,
            ktrans: parse_f64(fields[2], "ktrans_true")?,
            ve: parse_f64(fields[3], "ve_true")?,
        });
    }
    if truth.is_empty() {
        return Err(Error::parse(path, "truth table has no rows"));
    }
    Ok(truth)
}

/// Write a scored error report in the shared truth-table schema.
pub fn save_error_report_csv(path: &Path, report: &FitErrorReport) -> Result<()> {
    let mut out = String::from(TRUTH_CSV_HEADER);
    out.push('\n');
    for p in &report.patches {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.row,
            p.col,
            p.ktrans_true,
            p.ve_true,
            fmt_cell(p.ktrans_fit),
            fmt_cell(p.ve_fit),
            fmt_cell(p.ktrans_err_pct),
            fmt_cell(p.ve_err_pct),
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
