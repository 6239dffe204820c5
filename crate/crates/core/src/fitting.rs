//! Nonlinear least squares: a small bounded Levenberg–Marquardt core,
//! the four-parameter VIF fit with deterministic multistart, and the
//! per-voxel two-parameter tissue fit.
//!
//! Everything here is deterministic for fixed inputs and seed: starts
//! come from a Halton sequence (no RNG state), voxels are merged by
//! index, and no reduction depends on thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaxometry::ConcentrationSeries;
use crate::vif::{cp_model, ct_model, TissueParams, VifModelKind, VifParams};
use crate::volume::{ParameterMap, VoxelFit, VoxelMask};

/// Optimizer settings and parameter bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Convergence when the largest projected-gradient entry falls below this.
    pub gradient_tolerance: f64,
    /// Convergence when an accepted step is this small relative to the params.
    pub step_tolerance: f64,
    /// Convergence when the mean squared residual falls below this.
    pub residual_tolerance: f64,
    /// Number of quasi-random VIF starts (plus one heuristic start).
    pub multistart_count: usize,
    pub ktrans_bounds: (f64, f64),
    pub ve_bounds: (f64, f64),
    /// Shared bounds for both VIF rates α and β, min⁻¹.
    pub rate_bounds: (f64, f64),
    /// Shared bounds for both VIF amplitudes a and b.
    pub amplitude_bounds: (f64, f64),
    /// Seed offsetting the Halton multistart sequence.
    pub rng_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            residual_tolerance: 1e-12,
            multistart_count: 8,
            ktrans_bounds: (0.0, 5.0),
            ve_bounds: (1e-4, 1.0),
            rate_bounds: (1e-4, 50.0),
            amplitude_bounds: (0.0, 100.0),
            rng_seed: 42,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParam("max_iterations must be ≥ 1".into()));
        }
        if self.multistart_count == 0 {
            return Err(Error::InvalidParam("multistart_count must be ≥ 1".into()));
        }
        for (name, v) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("step_tolerance", self.step_tolerance),
            ("residual_tolerance", self.residual_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, (lo, hi), min_lo) in [
            ("ktrans_bounds", self.ktrans_bounds, 0.0),
            ("ve_bounds", self.ve_bounds, f64::MIN_POSITIVE),
            ("rate_bounds", self.rate_bounds, f64::MIN_POSITIVE),
            ("amplitude_bounds", self.amplitude_bounds, 0.0),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= min_lo) {
                return Err(Error::InvalidParam(format!("{name} ({lo}, {hi}) not ordered/positive")));
            }
        }
        Ok(())
    }
}

/// Outcome of one least-squares problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<P> {
    pub params: P,
    /// Mean squared residual at `params`.
    pub mse: f64,
    /// Levenberg–Marquardt iterations spent (best start only).
    pub iterations: usize,
    pub converged: bool,
}

impl<P> FitResult<P> {
    fn map_params<Q>(self, f: impl FnOnce(P) -> Q) -> FitResult<Q> {
        FitResult {
            params: f(self.params),
            mse: self.mse,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// Central-difference Jacobian with step `1e−6·max(1, |p_j|)`, exactly
/// as used inside [`least_squares`]. Returns `J[i][j] = ∂r_i/∂p_j`, or
/// an error if any probe produced a non-finite residual.
pub fn finite_difference_jacobian<F>(residual: &F, p: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let flat = fd_jacobian(residual, p)
        .ok_or_else(|| Error::NonFinite("residual during Jacobian probe".into()))?;
    let n = p.len();
    Ok(flat.chunks(n).map(|row| row.to_vec()).collect())
}

/// Flat row-major Jacobian (m·n entries); `None` on non-finite probes.
fn fd_jacobian<F>(residual: &F, p: &[f64]) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p.len();
    let mut probe = p.to_vec();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let h = 1e-6 * p[j].abs().max(1.0);
        probe[j] = p[j] + h;
        let plus = residual(&probe);
        probe[j] = p[j] - h;
        let minus = residual(&probe);
        probe[j] = p[j];
        if plus.len() != minus.len() {
            return None;
        }
        let col: Vec<f64> = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        if !col.iter().all(|v| v.is_finite()) {
            return None;
        }
        columns.push(col);
    }
    let m = columns[0].len();
    let mut flat = vec![0.0; m * n];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            flat[i * n + j] = v;
        }
    }
    Some(flat)
}

/// Solve `(A + λ·diag(D))·x = −g` by Gaussian elimination with partial
/// pivoting (systems here are at most 4×4).
fn solve_damped(a: &[f64], damp: &[f64], g: &[f64], lambda: f64, n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    for i in 0..n {
        m[i * n + i] += lambda * damp[i];
    }
    let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = m[row * n + col] / m[col * n + col];
            if factor != 0.0 {
                for k in col..n {
                    m[row * n + k] -= factor * m[col * n + k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn clamp_to_bounds(p: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bounded Levenberg–Marquardt from a single start.
///
/// Convergence: projected gradient below `gradient_tolerance`, accepted
/// step below `step_tolerance`, or mean squared residual below
/// `residual_tolerance`. A non-finite residual mid-iteration aborts the
/// start and reports it non-converged with the best point found.
pub fn least_squares<F>(
    residual: F,
    init: &[f64],
    bounds: &[(f64, f64)],
    cfg: &FitConfig,
) -> Result<FitResult<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    let n = init.len();
    if n == 0 {
        return Err(Error::InvalidParam("empty parameter vector".into()));
    }
    if bounds.len() != n {
        return Err(Error::InvalidParam(format!(
            "{} bounds for {} parameters",
            bounds.len(),
            n
        )));
    }
    for (j, (&p, &(lo, hi))) in init.iter().zip(bounds).enumerate() {
        if !(lo <= hi) {
            return Err(Error::InvalidParam(format!("bounds for parameter {j} are unordered")));
        }
        if !(p >= lo && p <= hi) {
            return Err(Error::InvalidParam(format!(
                "initial parameter {j} = {p} outside bounds [{lo}, {hi}]"
            )));
        }
    }

    let mut p = init.to_vec();
    let mut r = residual(&p);
    let m = r.len();
    if m == 0 {
        return Err(Error::InsufficientData("residual vector is empty".into()));
    }
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("residual at the initial point".into()));
    }
    let mut cost = dot(&r, &r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = cost / m as f64 <= cfg.residual_tolerance;

    'outer: while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let jac = match fd_jacobian(&residual, &p) {
            Some(j) => j,
            None => break, // aborted start: report non-converged
        };
        // g = Jᵀr and A = JᵀJ
        let mut g = vec![0.0; n];
        let mut a = vec![0.0; n * n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for j in 0..n {
                g[j] += row[j] * r[i];
                for k in j..n {
                    a[j * n + k] += row[j] * row[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                a[j * n + k] = a[k * n + j];
            }
        }

        // Projected gradient: at an active bound only the feasible
        // descent direction counts.
        let mut pg_max = 0.0f64;
        for j in 0..n {
            let (lo, hi) = bounds[j];
            let pg = if p[j] <= lo {
                g[j].min(0.0)
            } else if p[j] >= hi {
                g[j].max(0.0)
            } else {
                g[j]
            };
            pg_max = pg_max.max(pg.abs());
        }
        if pg_max < cfg.gradient_tolerance {
            converged = true;
            break;
        }

        let max_diag = (0..n).map(|j| a[j * n + j]).fold(0.0f64, f64::max);
        let damp: Vec<f64> = (0..n)
            .map(|j| a[j * n + j].max(1e-12 * max_diag).max(1e-300))
            .collect();

        loop {
            let step = solve_damped(&a, &damp, &g, lambda, n);
            let mut p_new = p.clone();
            let accepted = match step {
                None => false,
                Some(delta) => {
                    for j in 0..n {
                        p_new[j] += delta[j];
                    }
                    clamp_to_bounds(&mut p_new, bounds);
                    let r_new = residual(&p_new);
                    if r_new.len() != m || !r_new.iter().all(|v| v.is_finite()) {
                        break 'outer; // aborted start
                    }
                    let cost_new = dot(&r_new, &r_new);
                    if cost_new < cost {
                        let step_norm = p_new
                            .iter()
                            .zip(&p)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                        p = p_new;
                        r = r_new;
                        cost = cost_new;
                        lambda = (lambda / 10.0).max(1e-12);
                        if cost / m as f64 <= cfg.residual_tolerance
                            || step_norm <= cfg.step_tolerance * (p_norm + cfg.step_tolerance)
                        {
                            converged = true;
                        }
                        true
                    } else {
                        false
                    }
                }
            };
            if accepted {
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break 'outer; // stalled: damping exhausted
            }
        }
    }

    Ok(FitResult {
        params: p,
        mse: cost / m as f64,
        iterations,
        converged,
    })
}

/// Radical-inverse Halton point (deterministic quasi-random sequence).
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn log_uniform(u: f64, lo: f64, hi: f64) -> f64 {
    lo * (hi / lo).powf(u)
}

/// Basis functions multiplying a and b for a given model kind.
fn vif_bases(kind: VifModelKind, alpha: f64, beta: f64, t: f64) -> (f64, f64) {
    let ea = (-alpha * t).exp();
    let eb = (-beta * t).exp();
    match kind {
        VifModelKind::BiExponential => (ea, eb),
        VifModelKind::Linear => (t * ea, eb - ea),
        VifModelKind::Cubic => (t * t * t * ea, eb - ea),
    }
}

/// Best (a, b) ≥ bounds for fixed rates by linear least squares; falls
/// back to a crude amplitude guess when the 2×2 system is degenerate.
fn amplitudes_for_rates(
    ts: &[f64],
    ys: &[f64],
    kind: VifModelKind,
    alpha: f64,
    beta: f64,
    cfg: &FitConfig,
) -> (f64, f64) {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in ts.iter().zip(ys) {
        let (b1, b2) = vif_bases(kind, alpha, beta, t);
        s11 += b1 * b1;
        s12 += b1 * b2;
        s22 += b2 * b2;
        r1 += b1 * y;
        r2 += b2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    let (lo, hi) = cfg.amplitude_bounds;
    let y_max = ys.iter().copied().fold(0.0f64, f64::max);
    if det.abs() > 1e-12 * s11.max(1e-300) * s22.max(1e-300) {
        let a = (r1 * s22 - r2 * s12) / det;
        let b = (r2 * s11 - r1 * s12) / det;
        (a.clamp(lo, hi), b.clamp(lo, hi))
    } else {
        (y_max.clamp(lo, hi), (0.1 * y_max).clamp(lo, hi))
    }
}

/// Heuristic VIF start: α from the tail log-slope, peak-matched a,
/// β = α/10 and a small b.
pub(crate) fn vif_heuristic_start(
    ts: &[f64],
    ys: &[f64],
    kind: VifModelKind,
    cfg: &FitConfig,
) -> [f64; 4] {
    let (rate_lo, rate_hi) = cfg.rate_bounds;
    let (amp_lo, amp_hi) = cfg.amplitude_bounds;
    let y_max = ys.iter().copied().fold(0.0f64, f64::max);

    // Tail log-slope over the final third (at least 4 samples), using
    // only clearly positive values.
    let tail_len = (ts.len() / 3).max(4).min(ts.len());
    let start = ts.len() - tail_len;
    let floor = (1e-6 * y_max).max(1e-12);
    let (mut sx, mut sy, mut sxx, mut sxy, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in ts[start..].iter().zip(&ys[start..]) {
        if y > floor {
            let ly = y.ln();
            sx += t;
            sy += ly;
            sxx += t * t;
            sxy += t * ly;
            count += 1.0;
        }
    }
    let denom = count * sxx - sx * sx;
    let alpha = if count >= 2.0 && denom.abs() > 0.0 {
        let slope = (count * sxy - sx * sy) / denom;
        (-slope).clamp(rate_lo, rate_hi)
    } else {
        1.0f64.clamp(rate_lo, rate_hi)
    };
    let beta = (alpha / 10.0).clamp(rate_lo, rate_hi);

    // Peak-matched a: unit-amplitude peak of the a-term is 1 (bi-exp,
    // at t = 0), 1/(α·e) (linear, at t = 1/α) or 27·e⁻³/α³ (cubic, at
    // t = 3/α).
    let e = std::f64::consts::E;
    let a = match kind {
        VifModelKind::BiExponential => y_max,
        VifModelKind::Linear => y_max * alpha * e,
        VifModelKind::Cubic => y_max * alpha.powi(3) * e.powi(3) / 27.0,
    }
    .clamp(amp_lo, amp_hi);
    let b = (0.1 * y_max).clamp(amp_lo, amp_hi);
    [a, b, alpha, beta]
}

fn filter_finite_pairs(t: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut ts = Vec::with_capacity(t.len());
    let mut ys = Vec::with_capacity(y.len());
    for (&ti, &yi) in t.iter().zip(y) {
        if ti.is_finite() && yi.is_finite() {
            ts.push(ti);
            ys.push(yi);
        }
    }
    (ts, ys)
}

fn check_time_grid(t: &[f64]) -> Result<()> {
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam("time grid must be strictly increasing".into()));
    }
    Ok(())
}

const MIN_FIT_SAMPLES: usize = 8;

/// Fit VIF parameters to a measured plasma curve (times in minutes).
///
/// Runs the heuristic start first, then `multistart_count` seeded
/// Halton starts (log-uniform rates, amplitudes from a linear
/// least-squares solve). Keeps the best mean squared error; stops early
/// once a start converges below `residual_tolerance`. Never errors just
/// because no start converged — that is reported via `converged`.
pub fn fit_vif(
    curve: &[f64],
    t: &[f64],
    kind: VifModelKind,
    cfg: &FitConfig,
) -> Result<FitResult<VifParams>> {
    cfg.validate()?;
    if curve.len() != t.len() {
        return Err(Error::InvalidParam(format!(
            "curve has {} samples on a {}-point grid",
            curve.len(),
            t.len()
        )));
    }
    check_time_grid(t)?;
    let (ts, ys) = filter_finite_pairs(t, curve);
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "VIF fit needs ≥ {MIN_FIT_SAMPLES} finite samples, got {}",
            ts.len()
        )));
    }

    let residual = |p: &[f64]| -> Vec<f64> {
        ts.iter()
            .zip(&ys)
            .map(|(&ti, &yi)| cp_model(kind, p[0], p[1], p[2], p[3], ti) - yi)
            .collect()
    };
    let (amp, rate) = (cfg.amplitude_bounds, cfg.rate_bounds);
    let bounds = [amp, amp, rate, rate];

    let mut starts: Vec<[f64; 4]> = vec![vif_heuristic_start(&ts, &ys, kind, cfg)];
    let offset = 1 + cfg.rng_seed % 8191;
    for k in 0..cfg.multistart_count as u64 {
        let idx = offset + k;
        let (u1, u2) = (halton(idx, 2), halton(idx, 3));
        let r1 = log_uniform(u1, rate.0, rate.1);
        let r2 = log_uniform(u2, rate.0, rate.1);
        // Orient as fast bolus decay (α) + slow washout (β).
        let (alpha, beta) = (r1.max(r2), r1.min(r2));
        let (a, b) = amplitudes_for_rates(&ts, &ys, kind, alpha, beta, cfg);
        starts.push([a, b, alpha, beta]);
    }

    let mut best: Option<FitResult<Vec<f64>>> = None;
    for start in &starts {
        let mut init = *start;
        clamp_to_bounds(&mut init, &bounds);
        let result = least_squares(&residual, &init, &bounds, cfg)?;
        let better = best
            .as_ref()
            .map(|b| result.mse < b.mse)
            .unwrap_or(true);
        if better {
            best = Some(result);
        }
        let b = best.as_ref().expect("set above");
        if b.converged && b.mse <= cfg.residual_tolerance {
            break;
        }
    }
    Ok(best.expect("at least one start").map_params(|p| VifParams {
        a: p[0],
        b: p[1],
        alpha: p[2],
        beta: p[3],
    }))
}

/// Fixed log-spaced multistart grid for the tissue fit.
fn geomspace4(lo: f64, hi: f64) -> [f64; 4] {
    let ratio = (hi / lo).powf(1.0 / 3.0);
    [lo, lo * ratio, lo * ratio * ratio, hi]
}

/// Fit (ktrans, ve) for one voxel against a frozen VIF (times in
/// minutes). Starts on a fixed 4×4 log-grid, ordered by initial cost so
/// the most promising basins run first.
pub fn fit_tissue_voxel(
    ct: &[f64],
    t: &[f64],
    kind: VifModelKind,
    vif: &VifParams,
    cfg: &FitConfig,
) -> Result<FitResult<TissueParams>> {
    cfg.validate()?;
    vif.validate()?;
    if ct.len() != t.len() {
        return Err(Error::InvalidParam(format!(
            "curve has {} samples on a {}-point grid",
            ct.len(),
            t.len()
        )));
    }
    check_time_grid(t)?;
    let (ts, ys) = filter_finite_pairs(t, ct);
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "tissue fit needs ≥ {MIN_FIT_SAMPLES} finite samples, got {}",
            ts.len()
        )));
    }

    let (a, b, alpha, beta) = (vif.a, vif.b, vif.alpha, vif.beta);
    let residual = |p: &[f64]| -> Vec<f64> {
        let (ktrans, ve) = (p[0], p[1]);
        let kep = if ktrans == 0.0 { 0.0 } else { ktrans / ve };
        ts.iter()
            .zip(&ys)
            .map(|(&ti, &yi)| ct_model(kind, a, b, alpha, beta, ktrans, kep, ti) - yi)
            .collect()
    };
    let bounds = [cfg.ktrans_bounds, cfg.ve_bounds];

    let (klo, khi) = cfg.ktrans_bounds;
    let (vlo, vhi) = cfg.ve_bounds;
    let ktrans_starts = geomspace4(0.005f64.clamp(klo.max(1e-6), khi), 2.0f64.clamp(klo.max(1e-6), khi));
    let ve_starts = geomspace4(0.005f64.clamp(vlo, vhi), 0.8f64.clamp(vlo, vhi));
    let mut starts: Vec<(f64, [f64; 2])> = Vec::with_capacity(16);
    for &k0 in &ktrans_starts {
        for &v0 in &ve_starts {
            let r = residual(&[k0, v0]);
            starts.push((dot(&r, &r), [k0, v0]));
        }
    }
    // Deterministic order: ascending initial cost, grid order on ties.
    let order: Vec<usize> = {
        let mut idx: Vec<usize> = (0..starts.len()).collect();
        idx.sort_by(|&i, &j| starts[i].0.partial_cmp(&starts[j].0).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
        idx
    };

    let mut best: Option<FitResult<Vec<f64>>> = None;
    for &i in &order {
        let result = least_squares(&residual, &starts[i].1, &bounds, cfg)?;
        let better = best.as_ref().map(|b| result.mse < b.mse).unwrap_or(true);
        if better {
            best = Some(result);
        }
        let b = best.as_ref().expect("set above");
        if b.converged && b.mse <= cfg.residual_tolerance {
            break;
        }
    }
    let best = best.expect("at least one start");
    // Bounds keep ktrans ≥ 0 and ve ∈ (0, 1], so the construction is valid.
    let params = TissueParams::new(best.params[0], best.params[1])?;
    Ok(FitResult {
        params,
        mse: best.mse,
        iterations: best.iterations,
        converged: best.converged,
    })
}

/// Fit every masked voxel of a concentration series. Voxels outside the
/// mask stay NaN; in-mask voxels whose fit *errors* (e.g. all-NaN
/// curves) are parked at zero transfer with `converged = false` and an
/// infinite mse so downstream consumers can spot them.
pub fn fit_tissue_map(
    conc: &ConcentrationSeries,
    mask: &VoxelMask,
    kind: VifModelKind,
    vif: &VifParams,
    cfg: &FitConfig,
) -> Result<ParameterMap> {
    cfg.validate()?;
    vif.validate()?;
    if mask.dims() != conc.dims() {
        return Err(Error::DimMismatch {
            expected: conc.dims(),
            got: mask.dims(),
        });
    }
    let t = conc.t_min();
    let indices: Vec<usize> = mask.indices().collect();
    let fits: Vec<(usize, VoxelFit)> = indices
        .par_iter()
        .map(|&i| {
            let fit = fit_tissue_voxel(conc.voxel_curve(i), t, kind, vif, cfg);
            let voxel = match fit {
                Ok(r) => VoxelFit {
                    ktrans: r.params.ktrans,
                    ve: r.params.ve,
                    kep: r.params.kep,
                    mse: r.mse,
                    converged: r.converged,
                },
                Err(_) => VoxelFit {
                    ktrans: 0.0,
                    ve: cfg.ve_bounds.0,
                    kep: 0.0,
                    mse: f64::INFINITY,
                    converged: false,
                },
            };
            (i, voxel)
        })
        .collect();
    let mut map = ParameterMap::new(conc.dims())?;
    for (i, voxel) in fits {
        map.set_voxel(i, voxel);
    }
    Ok(map)
}
