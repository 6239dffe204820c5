//! SPGR signal model, variable-flip-angle T10 estimation, and the
//! signal ↔ concentration mapping.
//!
//! The forward model is the spoiled-gradient-echo steady state
//! `S = M0·sin θ·(1 − E1)/(1 − cos θ·E1)` with `E1 = exp(−TR/T1)`.
//! Concentration follows from the longitudinal relaxation rate:
//! `C(t) = (1/T1(t) − 1/T10) / r1` in mmol/L with times in seconds and
//! `r1` in L·mmol⁻¹·s⁻¹. Timestamps leave this module in minutes, which
//! is the unit every downstream model expects.

use crate::error::{Error, Result};
use crate::volume::{AcquisitionParams, Dims, TimeSeries, Volume3D};

/// Per-voxel pre-contrast T10 (seconds) and equilibrium-magnetization
/// scale M0. Unestimated voxels hold NaN in both channels; estimated
/// voxels always hold finite positive T10.
#[derive(Debug, Clone, PartialEq)]
pub struct T10Map {
    dims: Dims,
    t10_s: Vec<f64>,
    m0: Vec<f64>,
}

impl T10Map {
    pub fn new(dims: Dims, t10_s: Vec<f64>, m0: Vec<f64>) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        if n == 0 {
            return Err(Error::InvalidParam("t10 map dims must be non-empty".into()));
        }
        if t10_s.len() != n || m0.len() != n {
            return Err(Error::InvalidParam(format!(
                "t10 map channel lengths {}/{} do not match dims {:?}",
                t10_s.len(),
                m0.len(),
                dims
            )));
        }
        for (i, &t) in t10_s.iter().enumerate() {
            if t.is_nan() {
                continue;
            }
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "estimated T10 must be finite and > 0, got {t} at voxel {i}"
                )));
            }
            if !m0[i].is_finite() {
                return Err(Error::NonFinite(format!("M0 at estimated voxel {i}")));
            }
        }
        Ok(Self { dims, t10_s, m0 })
    }

    /// Uniform map: every voxel shares one (T10, M0) pair.
    pub fn constant(dims: Dims, t10_s: f64, m0: f64) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        Self::new(dims, vec![t10_s; n], vec![m0; n])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn t10_s(&self) -> &[f64] {
        &self.t10_s
    }

    pub fn m0(&self) -> &[f64] {
        &self.m0
    }

    /// `(T10, M0)` at a voxel, or `None` if unestimated there.
    pub fn get(&self, index: usize) -> Option<(f64, f64)> {
        let t = self.t10_s[index];
        if t.is_nan() {
            None
        } else {
            Some((t, self.m0[index]))
        }
    }

    /// Number of voxels with an estimate.
    pub fn estimated_count(&self) -> usize {
        self.t10_s.iter().filter(|t| !t.is_nan()).count()
    }
}

/// Why a converted concentration sample holds the value it does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ConcFlag {
    /// Inversion succeeded, value is the raw concentration.
    Ok = 0,
    /// Inversion gave a negative concentration (signal below baseline);
    /// the value was clamped to 0.
    ClampedNegative = 1,
    /// Signal outside the SPGR range for any T1 > 0; value is NaN.
    NotInvertible = 2,
    /// No T10 estimate at this voxel; value is NaN.
    NoT10 = 3,
}

/// Per-voxel concentration curves in mmol/L on a common time grid in
/// minutes. Curves are stored voxel-major: voxel `v`'s samples occupy
/// `values[v*T .. (v+1)*T]`.
#[derive(Debug, Clone)]
pub struct ConcentrationSeries {
    dims: Dims,
    t_min: Vec<f64>,
    values: Vec<f64>,
    flags: Vec<ConcFlag>,
}

impl ConcentrationSeries {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Time grid in minutes.
    pub fn t_min(&self) -> &[f64] {
        &self.t_min
    }

    pub fn n_timestamps(&self) -> usize {
        self.t_min.len()
    }

    pub fn voxel_curve(&self, index: usize) -> &[f64] {
        let t = self.t_min.len();
        &self.values[index * t..(index + 1) * t]
    }

    pub fn voxel_flags(&self, index: usize) -> &[ConcFlag] {
        let t = self.t_min.len();
        &self.flags[index * t..(index + 1) * t]
    }
}

fn check_flip(flip_deg: f64) -> Result<()> {
    if !(flip_deg.is_finite() && flip_deg > 0.0 && flip_deg <= 90.0) {
        return Err(Error::InvalidParam(format!(
            "flip angle must lie in (0, 90] degrees, got {flip_deg}"
        )));
    }
    Ok(())
}

/// SPGR steady-state signal for one voxel.
pub fn spgr_signal(m0: f64, t1_s: f64, tr_s: f64, flip_deg: f64) -> Result<f64> {
    if !(t1_s.is_finite() && t1_s > 0.0) {
        return Err(Error::InvalidParam(format!("t1 must be > 0 s, got {t1_s}")));
    }
    if !(tr_s.is_finite() && tr_s > 0.0) {
        return Err(Error::InvalidParam(format!("tr must be > 0 s, got {tr_s}")));
    }
    check_flip(flip_deg)?;
    let rad = flip_deg.to_radians();
    let e1 = (-tr_s / t1_s).exp();
    Ok(m0 * rad.sin() * (1.0 - e1) / (1.0 - rad.cos() * e1))
}

/// Estimate per-voxel (T10, M0) from variable-flip-angle scans.
///
/// `signals[k]` is the steady-state volume acquired at
/// `params.flip_angles_deg[k]`; only the leading `signals.len()` angles
/// are used, so the dynamic-series angle (last list entry) may stay in
/// the params unused. Uses the standard linearization
/// `S/sin α = E1·(S/tan α) + M0·(1 − E1)` solved per voxel by least
/// squares; voxels with a non-physical slope (`E1 ∉ (0,1)`) or
/// non-physical intercept are left unestimated (NaN).
pub fn estimate_t10_vfa(signals: &[Volume3D], params: &AcquisitionParams) -> Result<T10Map> {
    params.validate()?;
    if signals.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "VFA estimation needs at least two flip angles, got {}",
            signals.len()
        )));
    }
    if signals.len() > params.flip_angles_deg.len() {
        return Err(Error::InvalidParam(format!(
            "{} VFA volumes but only {} flip angles",
            signals.len(),
            params.flip_angles_deg.len()
        )));
    }
    let angles = &params.flip_angles_deg[..signals.len()];
    for (i, &a) in angles.iter().enumerate() {
        for &b in &angles[..i] {
            if a == b {
                return Err(Error::InvalidParam(format!("duplicate flip angle {a} degrees")));
            }
        }
    }
    let dims = signals[0].dims();
    for v in &signals[1..] {
        if v.dims() != dims {
            return Err(Error::DimMismatch {
                expected: dims,
                got: v.dims(),
            });
        }
    }

    let trig: Vec<(f64, f64)> = angles
        .iter()
        .map(|a| {
            let r = a.to_radians();
            (r.sin(), r.tan())
        })
        .collect();

    let n = dims.0 * dims.1 * dims.2;
    let mut t10 = vec![f64::NAN; n];
    let mut m0 = vec![f64::NAN; n];
    let count = signals.len() as f64;
    for v in 0..n {
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (vol, &(sin, tan)) in signals.iter().zip(&trig) {
            let s = vol.data()[v];
            let x = s / tan;
            let y = s / sin;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let denom = count * sxx - sx * sx;
        if denom == 0.0 {
            continue;
        }
        let e1 = (count * sxy - sx * sy) / denom;
        if !(e1 > 0.0 && e1 < 1.0) {
            continue;
        }
        let intercept = (sy - e1 * sx) / count;
        let scale = intercept / (1.0 - e1);
        let t1 = -params.tr_s / e1.ln();
        if t1.is_finite() && t1 > 0.0 && scale.is_finite() && scale > 0.0 {
            t10[v] = t1;
            m0[v] = scale;
        }
    }
    T10Map::new(dims, t10, m0)
}

/// Invert one signal curve to concentration given the voxel's T10.
///
/// M0 is calibrated so the mean of the first `baseline_count` samples
/// matches the SPGR forward model at T10; every sample is then inverted
/// to `1/T1` and mapped to concentration. Negative concentrations clamp
/// to 0 ([`ConcFlag::ClampedNegative`]); signals outside the invertible
/// SPGR range `(0, M0·sin θ)` become NaN ([`ConcFlag::NotInvertible`]).
pub(crate) fn convert_signal_curve(
    signals: &[f64],
    baseline_count: usize,
    t10_s: f64,
    tr_s: f64,
    flip_deg: f64,
    r1: f64,
    out_values: &mut Vec<f64>,
    out_flags: &mut Vec<ConcFlag>,
) {
    let rad = flip_deg.to_radians();
    let (sin, cos) = (rad.sin(), rad.cos());
    let e10 = (-tr_s / t10_s).exp();
    let shape = sin * (1.0 - e10) / (1.0 - cos * e10);
    let baseline = signals[..baseline_count].iter().sum::<f64>() / baseline_count as f64;
    let m0_sin = baseline / shape * sin;
    let recip_t10 = 1.0 / t10_s;
    for &s in signals {
        let e1 = (m0_sin - s) / (m0_sin - s * cos);
        if e1 > 0.0 && e1 < 1.0 {
            let recip_t1 = -e1.ln() / tr_s;
            let c = (recip_t1 - recip_t10) / r1;
            if c < 0.0 {
                out_values.push(0.0);
                out_flags.push(ConcFlag::ClampedNegative);
            } else {
                out_values.push(c);
                out_flags.push(ConcFlag::Ok);
            }
        } else {
            out_values.push(f64::NAN);
            out_flags.push(ConcFlag::NotInvertible);
        }
    }
}

/// Convert a dynamic series to per-voxel concentration curves.
///
/// Voxels without a T10 estimate convert to all-NaN curves flagged
/// [`ConcFlag::NoT10`]. Timestamps come out in minutes.
pub fn signal_to_concentration(
    series: &TimeSeries,
    t10: &T10Map,
    params: &AcquisitionParams,
    baseline_count: usize,
) -> Result<ConcentrationSeries> {
    params.validate()?;
    if t10.dims() != series.dims() {
        return Err(Error::DimMismatch {
            expected: series.dims(),
            got: t10.dims(),
        });
    }
    let n_t = series.len();
    if baseline_count < 1 || baseline_count >= n_t {
        return Err(Error::InvalidParam(format!(
            "baseline_count must lie in [1, {}), got {baseline_count}",
            n_t
        )));
    }
    let dims = series.dims();
    let n = dims.0 * dims.1 * dims.2;
    let flip = params.dynamic_flip_deg();
    let t_min: Vec<f64> = series.timestamps_s().iter().map(|t| t / 60.0).collect();

    let mut values = Vec::with_capacity(n * n_t);
    let mut flags = Vec::with_capacity(n * n_t);
    let mut curve = vec![0.0; n_t];
    for v in 0..n {
        match t10.get(v) {
            None => {
                values.extend(std::iter::repeat(f64::NAN).take(n_t));
                flags.extend(std::iter::repeat(ConcFlag::NoT10).take(n_t));
            }
            Some((t10_v, _)) => {
                for (k, vol) in series.volumes().iter().enumerate() {
                    curve[k] = vol.data()[v];
                }
                convert_signal_curve(
                    &curve,
                    baseline_count,
                    t10_v,
                    params.tr_s,
                    flip,
                    params.r1,
                    &mut values,
                    &mut flags,
                );
            }
        }
    }
    Ok(ConcentrationSeries {
        dims,
        t_min,
        values,
        flags,
    })
}

/// Blood → plasma concentration: `Cp = Cb / (1 − haematocrit)`.
pub fn blood_to_plasma(cb: &[f64], haematocrit: f64) -> Result<Vec<f64>> {
    if !(haematocrit.is_finite() && haematocrit > 0.0 && haematocrit < 1.0) {
        return Err(Error::InvalidParam(format!(
            "haematocrit must lie strictly inside (0, 1), got {haematocrit}"
        )));
    }
    Ok(cb.iter().map(|c| c / (1.0 - haematocrit)).collect())
}
