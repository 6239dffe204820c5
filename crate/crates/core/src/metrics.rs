//! Evaluation metrics: segmentation agreement, missed-slice rate,
//! histogram biomarkers over parameter maps, and curve comparison.
//!
//! Every metric with a vanishing denominator returns `None` (an explicit
//! "undefined" flag) rather than a silent 0, so degenerate edge cases
//! cannot corrupt aggregated statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{ParameterMap, VoxelMask};

/// Voxel-wise agreement counts between a predicted and a truth mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl ConfusionCounts {
    /// Total voxels compared (always the full grid).
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }
}

fn check_same_dims(pred: &VoxelMask, truth: &VoxelMask) -> Result<()> {
    if pred.dims() != truth.dims() {
        return Err(Error::DimMismatch {
            expected: truth.dims(),
            got: pred.dims(),
        });
    }
    Ok(())
}

/// Voxel-wise confusion counts; the four counts sum to the voxel count.
pub fn confusion(pred: &VoxelMask, truth: &VoxelMask) -> Result<ConfusionCounts> {
    check_same_dims(pred, truth)?;
    let mut c = ConfusionCounts {
        true_positive: 0,
        false_positive: 0,
        false_negative: 0,
        true_negative: 0,
    };
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => c.true_positive += 1,
            (true, false) => c.false_positive += 1,
            (false, true) => c.false_negative += 1,
            (false, false) => c.true_negative += 1,
        }
    }
    Ok(c)
}

/// DICE overlap `2|A∩B| / (|A| + |B|)`; `None` when both masks are empty.
pub fn dice(pred: &VoxelMask, truth: &VoxelMask) -> Result<Option<f64>> {
    let c = confusion(pred, truth)?;
    let denom = 2 * c.true_positive + c.false_positive + c.false_negative;
    if denom == 0 {
        return Ok(None);
    }
    Ok(Some(2.0 * c.true_positive as f64 / denom as f64))
}

fn ratio(num: usize, denom: usize) -> Option<f64> {
    if denom == 0 {
        None
    } else {
        Some(num as f64 / denom as f64)
    }
}

/// TP / (TP + FN); `None` when the truth mask is empty.
pub fn sensitivity(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.true_positive, c.true_positive + c.false_negative)
}

/// TN / (TN + FP); `None` when the truth-negative set is empty.
pub fn specificity(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.true_negative, c.true_negative + c.false_positive)
}

/// TP / (TP + FP); `None` when the prediction is empty.
pub fn precision(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.true_positive, c.true_positive + c.false_positive)
}

/// Fraction of axial slices containing truth voxels on which the
/// prediction found nothing — the "slice erroneously called healthy"
/// rate. `None` when the truth mask is entirely empty.
pub fn fn_frame_rate(pred: &VoxelMask, truth: &VoxelMask) -> Result<Option<f64>> {
    check_same_dims(pred, truth)?;
    let (nx, ny, nz) = truth.dims();
    let slice_len = nx * ny;
    let mut truth_slices = 0usize;
    let mut missed = 0usize;
    for z in 0..nz {
        let range = z * slice_len..(z + 1) * slice_len;
        let has_truth = truth.bits()[range.clone()].iter().any(|&b| b);
        if !has_truth {
            continue;
        }
        truth_slices += 1;
        if !pred.bits()[range].iter().any(|&b| b) {
            missed += 1;
        }
    }
    Ok(ratio(missed, truth_slices))
}

/// Which channel of a [`ParameterMap`] to summarize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapField {
    Ktrans,
    Ve,
    Kep,
}

impl MapField {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapField::Ktrans => "ktrans",
            MapField::Ve => "ve",
            MapField::Kep => "kep",
        }
    }
}

impl std::str::FromStr for MapField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ktrans" => Ok(MapField::Ktrans),
            "ve" => Ok(MapField::Ve),
            "kep" => Ok(MapField::Kep),
            other => Err(Error::InvalidParam(format!(
                "unknown map field '{other}' (expected ktrans, ve or kep)"
            ))),
        }
    }
}

/// Histogram summary of a value sample.
///
/// Moments are population moments `m_k = mean((x − mean)^k)`:
/// `std = sqrt(m2)`, `skewness = m3 / m2^1.5`, and kurtosis is *excess*
/// kurtosis `m4 / m2² − 3` (0 for a normal distribution). Skewness and
/// kurtosis are `None` on constant data, where they are undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramFeatures {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

/// Histogram features of a raw sample; non-finite entries are ignored.
/// Needs at least 3 finite values.
pub fn histogram_features_from_values(values: &[f64]) -> Result<HistogramFeatures> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    // Accumulate in sorted order so the features are bit-identical
    // under any reordering of the input voxels.
    finite.sort_by(f64::total_cmp);
    let n = finite.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "histogram features need ≥ 3 finite values, got {n}"
        )));
    }
    let count = n as f64;
    let mean = finite.iter().sum::<f64>() / count;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in &finite {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= count;
    m3 /= count;
    m4 /= count;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    } else {
        (None, None)
    };
    Ok(HistogramFeatures {
        count: n,
        mean,
        std: m2.sqrt(),
        skewness,
        kurtosis,
    })
}

/// Histogram features of one map channel over masked voxels. NaN voxels
/// (outside the fitted region) are excluded; needs ≥ 3 finite values.
pub fn histogram_features(
    map: &ParameterMap,
    field: MapField,
    mask: &VoxelMask,
) -> Result<HistogramFeatures> {
    if map.dims() != mask.dims() {
        return Err(Error::DimMismatch {
            expected: map.dims(),
            got: mask.dims(),
        });
    }
    let channel = match field {
        MapField::Ktrans => map.ktrans(),
        MapField::Ve => map.ve(),
        MapField::Kep => map.kep(),
    };
    let masked: Vec<f64> = mask.indices().map(|i| channel[i]).collect();
    histogram_features_from_values(&masked)
}

/// Root mean square difference between two equally sampled curves.
pub fn rms_curve_difference(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::InsufficientData("RMS of empty curves".into()));
    }
    if a.len() != b.len() {
        return Err(Error::InvalidParam(format!(
            "curve lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}
