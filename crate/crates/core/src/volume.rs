//! Spatial containers: single volumes, dynamic series, masks and fitted
//! parameter maps.
//!
//! Voxel storage is row-major with x fastest:
//! `index = x + nx * (y + ny * z)`. On axial slices y grows toward the
//! image bottom (the inferior edge on our acquisitions), which is what the
//! vascular-region "lower third" test relies on. Intensities are kept as
//! `f64` in memory; the on-disk format is raw little-endian `f32` (see
//! [`crate::io`]), so a loaded volume always round-trips bit-exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid dimensions `(nx, ny, nz)`.
pub type Dims = (usize, usize, usize);

/// Flat index of voxel `(x, y, z)` in a grid of dimensions `dims`.
#[inline]
pub fn voxel_index(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    debug_assert!(x < dims.0 && y < dims.1 && z < dims.2);
    x + dims.0 * (y + dims.1 * z)
}

/// Inverse of [`voxel_index`]: flat index back to `(x, y, z)`.
#[inline]
pub fn voxel_coords(dims: Dims, index: usize) -> (usize, usize, usize) {
    let x = index % dims.0;
    let y = (index / dims.0) % dims.1;
    let z = index / (dims.0 * dims.1);
    (x, y, z)
}

fn check_dims(dims: Dims) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::InvalidParam(format!(
            "volume dims must be >= 1 in every axis, got {dims:?}"
        )));
    }
    Ok(())
}

/// A single 3-D scalar volume with isotropic-or-not voxel spacing in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing_mm: (f64, f64, f64),
    data: Vec<f64>,
}

impl Volume3D {
    /// Build a volume from raw data in x-fastest order. All intensities
    /// must be finite and `data.len()` must equal `nx * ny * nz`.
    pub fn new(dims: Dims, spacing_mm: (f64, f64, f64), data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        for (axis, s) in [spacing_mm.0, spacing_mm.1, spacing_mm.2].iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "voxel spacing must be positive and finite, got {s} on axis {axis}"
                )));
            }
        }
        let expected = dims.0 * dims.1 * dims.2;
        if data.len() != expected {
            return Err(Error::InvalidParam(format!(
                "volume data length {} does not match dims {:?} ({} voxels)",
                data.len(),
                dims,
                expected
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("volume intensity at index {pos}")));
        }
        Ok(Self {
            dims,
            spacing_mm,
            data,
        })
    }

    /// Zero-filled volume.
    pub fn zeros(dims: Dims, spacing_mm: (f64, f64, f64)) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        Self::new(dims, spacing_mm, vec![0.0; n])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing_mm(&self) -> (f64, f64, f64) {
        self.spacing_mm
    }

    /// Number of voxels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[voxel_index(self.dims, x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f64) {
        self.data[voxel_index(self.dims, x, y, z)] = value;
    }

    /// Maximum intensity over the whole volume.
    pub fn max_intensity(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A dynamic acquisition: one volume per timestamp.
///
/// Invariants enforced at construction: at least one volume, identical
/// dims and spacing across frames, strictly increasing timestamps with
/// `timestamps_s[0] == 0` (seconds since the first acquisition).
#[derive(Debug, Clone)]
pub struct TimeSeries {
    volumes: Vec<Volume3D>,
    timestamps_s: Vec<f64>,
}

impl TimeSeries {
    pub fn new(volumes: Vec<Volume3D>, timestamps_s: Vec<f64>) -> Result<Self> {
        if volumes.is_empty() {
            return Err(Error::InvalidParam("time series needs at least one volume".into()));
        }
        if volumes.len() != timestamps_s.len() {
            return Err(Error::InvalidParam(format!(
                "{} volumes but {} timestamps",
                volumes.len(),
                timestamps_s.len()
            )));
        }
        let dims = volumes[0].dims();
        let spacing = volumes[0].spacing_mm();
        for v in &volumes[1..] {
            if v.dims() != dims {
                return Err(Error::DimMismatch {
                    expected: dims,
                    got: v.dims(),
                });
            }
            if v.spacing_mm() != spacing {
                return Err(Error::InvalidParam("inconsistent voxel spacing across frames".into()));
            }
        }
        validate_timestamps(&timestamps_s)?;
        Ok(Self {
            volumes,
            timestamps_s,
        })
    }

    pub fn dims(&self) -> Dims {
        self.volumes[0].dims()
    }

    pub fn spacing_mm(&self) -> (f64, f64, f64) {
        self.volumes[0].spacing_mm()
    }

    /// Number of timestamps (frames).
    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn volumes(&self) -> &[Volume3D] {
        &self.volumes
    }

    pub fn volume(&self, k: usize) -> &Volume3D {
        &self.volumes[k]
    }

    pub fn timestamps_s(&self) -> &[f64] {
        &self.timestamps_s
    }

    /// Signal at one voxel across all frames.
    pub fn voxel_curve(&self, index: usize) -> Vec<f64> {
        self.volumes.iter().map(|v| v.data()[index]).collect()
    }
}

pub(crate) fn validate_timestamps(timestamps_s: &[f64]) -> Result<()> {
    if timestamps_s.is_empty() {
        return Err(Error::InvalidTimestamps("empty timestamp list".into()));
    }
    if !timestamps_s.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidTimestamps("non-finite timestamp".into()));
    }
    if timestamps_s[0] != 0.0 {
        return Err(Error::InvalidTimestamps(format!(
            "timestamps are seconds since the first acquisition and must start at 0, got {}",
            timestamps_s[0]
        )));
    }
    for (i, pair) in timestamps_s.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidTimestamps(format!(
                "not strictly increasing at index {}: {} -> {}",
                i + 1,
                pair[0],
                pair[1]
            )));
        }
    }
    Ok(())
}

/// Acquisition constants shared across a study.
///
/// `flip_angles_deg` lists every flip angle used, in acquisition order:
/// the leading entries are the variable-flip-angle T10 calibration scans
/// and the *last* entry is the flip angle of the dynamic series itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionParams {
    /// Repetition time, seconds.
    pub tr_s: f64,
    /// Flip angles in degrees; each in (0, 90].
    pub flip_angles_deg: Vec<f64>,
    /// Contrast-agent longitudinal relaxivity, L mmol⁻¹ s⁻¹.
    pub r1: f64,
    /// Haematocrit fraction in (0, 1) used for blood→plasma conversion.
    pub htc: f64,
}

impl AcquisitionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tr_s.is_finite() && self.tr_s > 0.0) {
            return Err(Error::InvalidParam(format!("tr_s must be > 0, got {}", self.tr_s)));
        }
        if self.flip_angles_deg.is_empty() {
            return Err(Error::InvalidParam("flip_angles_deg must not be empty".into()));
        }
        for &a in &self.flip_angles_deg {
            if !(a.is_finite() && a > 0.0 && a <= 90.0) {
                return Err(Error::InvalidParam(format!(
                    "flip angles must lie in (0, 90] degrees, got {a}"
                )));
            }
        }
        if !(self.r1.is_finite() && self.r1 > 0.0) {
            return Err(Error::InvalidParam(format!("r1 must be > 0, got {}", self.r1)));
        }
        if !(self.htc.is_finite() && self.htc > 0.0 && self.htc < 1.0) {
            return Err(Error::InvalidParam(format!(
                "htc must lie strictly inside (0, 1), got {}",
                self.htc
            )));
        }
        Ok(())
    }

    /// Flip angle of the dynamic series (the last acquired angle), degrees.
    pub fn dynamic_flip_deg(&self) -> f64 {
        *self
            .flip_angles_deg
            .last()
            .expect("validated params have at least one flip angle")
    }
}

/// Binary voxel mask over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl VoxelMask {
    pub fn new(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        check_dims(dims)?;
        if bits.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::InvalidParam(format!(
                "mask length {} does not match dims {:?}",
                bits.len(),
                dims
            )));
        }
        Ok(Self { dims, bits })
    }

    pub fn empty(dims: Dims) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        Self::new(dims, vec![false; n])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    /// Number of set voxels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Flat indices of all set voxels, in scan order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| if b { Some(i) } else { None })
    }
}

/// Per-voxel result of a tissue fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelFit {
    pub ktrans: f64,
    pub ve: f64,
    pub kep: f64,
    /// Mean squared residual of the accepted fit.
    pub mse: f64,
    pub converged: bool,
}

/// Fitted Tofts parameters over a grid.
///
/// Voxels outside the fitted mask hold NaN in every float channel and
/// `converged == false`; fitted voxels always hold finite parameters with
/// `kep * ve == ktrans` (up to rounding).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMap {
    dims: Dims,
    ktrans: Vec<f64>,
    ve: Vec<f64>,
    kep: Vec<f64>,
    mse: Vec<f64>,
    converged: Vec<bool>,
}

impl ParameterMap {
    /// All-NaN map (no voxel fitted yet).
    pub fn new(dims: Dims) -> Result<Self> {
        check_dims(dims)?;
        let n = dims.0 * dims.1 * dims.2;
        Ok(Self {
            dims,
            ktrans: vec![f64::NAN; n],
            ve: vec![f64::NAN; n],
            kep: vec![f64::NAN; n],
            mse: vec![f64::NAN; n],
            converged: vec![false; n],
        })
    }

    pub(crate) fn from_channels(
        dims: Dims,
        ktrans: Vec<f64>,
        ve: Vec<f64>,
        kep: Vec<f64>,
        mse: Vec<f64>,
        converged: Vec<bool>,
    ) -> Result<Self> {
        check_dims(dims)?;
        let n = dims.0 * dims.1 * dims.2;
        if [ktrans.len(), ve.len(), kep.len(), mse.len(), converged.len()] != [n; 5] {
            return Err(Error::InvalidParam("parameter map channel length mismatch".into()));
        }
        Ok(Self {
            dims,
            ktrans,
            ve,
            kep,
            mse,
            converged,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.ktrans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ktrans.is_empty()
    }

    pub fn ktrans(&self) -> &[f64] {
        &self.ktrans
    }

    pub fn ve(&self) -> &[f64] {
        &self.ve
    }

    pub fn kep(&self) -> &[f64] {
        &self.kep
    }

    pub fn mse(&self) -> &[f64] {
        &self.mse
    }

    pub fn converged(&self) -> &[bool] {
        &self.converged
    }

    pub fn voxel(&self, index: usize) -> VoxelFit {
        VoxelFit {
            ktrans: self.ktrans[index],
            ve: self.ve[index],
            kep: self.kep[index],
            mse: self.mse[index],
            converged: self.converged[index],
        }
    }

    pub fn set_voxel(&mut self, index: usize, fit: VoxelFit) {
        self.ktrans[index] = fit.ktrans;
        self.ve[index] = fit.ve;
        self.kep[index] = fit.kep;
        self.mse[index] = fit.mse;
        self.converged[index] = fit.converged;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout_is_x_fastest() {
        let dims = (3, 4, 5);
        assert_eq!(voxel_index(dims, 0, 0, 0), 0);
        assert_eq!(voxel_index(dims, 1, 0, 0), 1);
        assert_eq!(voxel_index(dims, 0, 1, 0), 3);
        assert_eq!(voxel_index(dims, 0, 0, 1), 12);
        assert_eq!(voxel_index(dims, 2, 3, 4), 2 + 3 * 3 + 12 * 4);
    }

    #[test]
    fn index_roundtrip() {
        let dims = (3, 4, 5);
        for i in 0..60 {
            let (x, y, z) = voxel_coords(dims, i);
            assert_eq!(voxel_index(dims, x, y, z), i);
        }
    }

    #[test]
    fn volume_rejects_non_finite() {
        let err = Volume3D::new((2, 1, 1), (1.0, 1.0, 1.0), vec![0.0, f64::NAN]);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn volume_rejects_wrong_length() {
        let err = Volume3D::new((2, 2, 1), (1.0, 1.0, 1.0), vec![0.0; 3]);
        assert!(matches!(err, Err(Error::InvalidParam(_))));
    }

    #[test]
    fn series_requires_matching_dims() {
        let a = Volume3D::zeros((4, 4, 2), (1.0, 1.0, 1.0)).unwrap();
        let b = Volume3D::zeros((4, 4, 3), (1.0, 1.0, 1.0)).unwrap();
        let err = TimeSeries::new(vec![a, b], vec![0.0, 1.0]);
        match err {
            Err(Error::DimMismatch { expected, got }) => {
                assert_eq!(expected, (4, 4, 2));
                assert_eq!(got, (4, 4, 3));
            }
            other => panic!("expected dim mismatch, got {other:?}"),
        }
    }

    #[test]
    fn series_requires_increasing_timestamps_from_zero() {
        let v = || Volume3D::zeros((2, 2, 1), (1.0, 1.0, 1.0)).unwrap();
        assert!(TimeSeries::new(vec![v(), v()], vec![0.0, 0.0]).is_err());
        assert!(TimeSeries::new(vec![v(), v()], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![v(), v()], vec![0.0, 2.5]).is_ok());
    }

    #[test]
    fn acquisition_params_validation() {
        let good = AcquisitionParams {
            tr_s: 0.005,
            flip_angles_deg: vec![5.0, 25.0],
            r1: 4.5,
            htc: 0.45,
        };
        assert!(good.validate().is_ok());
        assert_eq!(good.dynamic_flip_deg(), 25.0);

        let mut bad = good.clone();
        bad.flip_angles_deg = vec![5.0, 95.0];
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.htc = 1.0;
        assert!(bad.validate().is_err());

        let mut bad = good;
        bad.tr_s = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mask_count() {
        let mut m = VoxelMask::empty((2, 2, 2)).unwrap();
        assert!(m.is_empty());
        m.set(3, true);
        m.set(7, true);
        assert_eq!(m.count(), 2);
        assert_eq!(m.indices().collect::<Vec<_>>(), vec![3, 7]);
    }

    #[test]
    fn parameter_map_starts_nan() {
        let m = ParameterMap::new((2, 1, 1)).unwrap();
        assert!(m.ktrans().iter().all(|v| v.is_nan()));
        assert!(m.converged().iter().all(|&c| !c));
    }
}
