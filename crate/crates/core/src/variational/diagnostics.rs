//! Euler–Lagrange residuals, the `I/R/E` functions and the ε-sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::variational::energy::{minimize, MinimizeConfig, MinimizeStatus};
use crate::variational::field::{Frame, SpaceTimeField, SpatialEnergy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToV,
    ToU,
}

/// `v(τ, x) = u(ετ, x)` and back. The samples are kept; only the time step
/// is rescaled by `ε`.
pub fn time_rescale(u: &SpaceTimeField, eps: f64, direction: Direction) -> Result<SpaceTimeField> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    match (direction, u.frame()) {
        (Direction::ToV, Frame::U) => Ok(u.relabel(u.dt() / eps, Frame::V)),
        (Direction::ToU, Frame::V) => Ok(u.relabel(u.dt() * eps, Frame::U)),
        (d, f) => Err(invalid(format!("cannot rescale {f:?}-frame field in direction {d:?}"))),
    }
}

fn tangential_sq(r: &[f64], u: &Field) -> f64 {
    let n = u.dim();
    r.chunks(n)
        .zip(u.values().chunks(n))
        .map(|(rj, uj)| {
            let dot: f64 = rj.iter().zip(uj).map(|(a, b)| a * b).sum();
            rj.iter().zip(uj).map(|(a, b)| (a - dot * b).powi(2)).sum::<f64>()
        })
        .sum()
}

/// Space-time `L²` norm over the interior slices of the tangential part of
/// `−ε ∂ₜ²u + ∂ₜu + div_{1/2} d_{1/2} u`, with centered differences in time.
pub fn el_residual(u: &SpaceTimeField, eps: f64) -> Result<f64> {
    if u.frame() != Frame::U {
        return Err(invalid("el_residual expects a u-frame field"));
    }
    let grid = u.grid();
    let h = grid.spacing();
    let energy = SpatialEnergy::new(grid, 0.5, 2.0)?;
    let dt = u.dt();
    let slices = u.slices();
    let sum: f64 = (1..u.steps())
        .into_par_iter()
        .map(|m| {
            let div = energy.gradient(&slices[m]);
            let (a, b, c) = (slices[m - 1].values(), slices[m].values(), slices[m + 1].values());
            let r: Vec<f64> = (0..b.len())
                .map(|j| {
                    -eps * (c[j] - 2.0 * b[j] + a[j]) / (dt * dt)
                        + (c[j] - a[j]) / (2.0 * dt)
                        + div.values()[j] / (2.0 * h)
                })
                .collect();
            tangential_sq(&r, &slices[m])
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok((sum * dt * h).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IreDiagnostics {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub e: Vec<f64>,
}

/// `∫_0^Δ e^{−x} f(x) dx` for `f` linear from `fa` to `fb`.
fn exp_segment(fa: f64, fb: f64, delta: f64) -> f64 {
    let decay = (-delta).exp();
    fa * (1.0 - decay) + (fb - fa) / delta * (1.0 - decay * (1.0 + delta))
}

/// `I(τ) = ‖∂_τ v‖²` (centered differences, one-sided at the ends),
/// `R(τ) = ε ‖d_{1/2} v‖²`, and `E(τ) = e^τ ∫_τ^∞ e^{−σ}(I + R) dσ` by
/// backward accumulation of exact exponential integrals of the piecewise
/// linear interpolant; past the horizon the path is taken static, which
/// contributes `e^{−(T−τ)} R(T)`.
pub fn diagnostics_ire(v: &SpaceTimeField, eps: f64) -> Result<IreDiagnostics> {
    if v.frame() != Frame::V {
        return Err(invalid("diagnostics_ire expects a v-frame field"));
    }
    let grid = v.grid();
    let h = grid.spacing();
    let energy = SpatialEnergy::new(grid, 0.5, 2.0)?;
    let dt = v.dt();
    let slices = v.slices();
    let last = v.steps();
    let i: Vec<f64> = (0..=last)
        .map(|m| {
            let (lo, hi) = (m.saturating_sub(1), (m + 1).min(last));
            let span = (hi - lo) as f64 * dt;
            h * slices[hi]
                .values()
                .iter()
                .zip(slices[lo].values())
                .map(|(a, b)| ((a - b) / span).powi(2))
                .sum::<f64>()
        })
        .collect();
    let r: Vec<f64> = energy.values(slices).into_iter().map(|s| eps * s).collect();
    let f: Vec<f64> = i.iter().zip(&r).map(|(a, b)| a + b).collect();
    let mut e = vec![0.0; last + 1];
    e[last] = r[last];
    for m in (0..last).rev() {
        e[m] = exp_segment(f[m], f[m + 1], dt) + (-dt).exp() * e[m + 1];
    }
    Ok(IreDiagnostics { times: v.times(), i, r, e })
}

/// `max_m |E′(τ_m) + 2 I(τ_m)| / (max I + 10⁻¹²)` over interior nodes, with
/// a centered difference for `E′`.
pub fn monotonicity_check(v: &SpaceTimeField, eps: f64) -> Result<f64> {
    let d = diagnostics_ire(v, eps)?;
    let dt = v.dt();
    let scale = d.i.iter().cloned().fold(0.0, f64::max) + 1e-12;
    Ok((1..v.steps())
        .map(|m| ((d.e[m + 1] - d.e[m - 1]) / (2.0 * dt) + 2.0 * d.i[m]).abs())
        .fold(0.0, f64::max)
        / scale)
}

/// `w(t) = u(t / factor)` on the same time grid, by linear interpolation in
/// time and pointwise renormalization. With `factor ≠ 1` this slows down (or
/// speeds up) a minimizer into a comparison path that is not one.
pub fn time_dilate(u: &SpaceTimeField, factor: f64) -> Result<SpaceTimeField> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(invalid(format!("dilation factor must be positive, got {factor}")));
    }
    let last = u.steps();
    let slices = (0..=last)
        .map(|m| {
            let pos = (m as f64 / factor).min(last as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(last);
            let w = pos - lo as f64;
            if w == 0.0 {
                Ok(u.slice(lo).clone())
            } else {
                Ok(u.slice(lo).lin_comb(1.0 - w, u.slice(hi), w)?.normalized_unchecked())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(u.with_slices(slices))
}

/// Smallest accepted `max ε / min ε` in a sweep.
pub const MIN_SWEEP_SPAN: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    /// `∫_0^T ‖∂_τ v‖² dτ`.
    pub dtv_sq: f64,
    /// `sup_t ∫_t^{t+1} ‖d_{1/2} u‖² dt` with the static continuation.
    pub window_max: f64,
    pub energy: f64,
    pub iterations: usize,
    pub status: MinimizeStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln dtv_sq` against `ln ε`; `None` when fewer
    /// than two rows have positive `dtv_sq`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// `max/min` of `window_max` across rows, when all are positive.
    pub window_ratio: Option<f64>,
}

fn window_max(u: &SpaceTimeField, energy: &SpatialEnergy) -> f64 {
    let s = energy.values(u.slices());
    let dt = u.dt();
    let last = u.steps();
    let mut cum = vec![0.0; last + 1];
    for m in 0..last {
        cum[m + 1] = cum[m] + 0.5 * dt * (s[m] + s[m + 1]);
    }
    let horizon = u.horizon();
    let primitive = |t: f64| {
        if t >= horizon {
            return cum[last] + s[last] * (t - horizon);
        }
        let m = ((t / dt).floor() as usize).min(last - 1);
        let x = t - m as f64 * dt;
        let slope = (s[m + 1] - s[m]) / dt;
        cum[m] + s[m] * x + 0.5 * slope * x * x
    };
    (0..=last)
        .map(|m| {
            let t = m as f64 * dt;
            primitive(t + 1.0) - primitive(t)
        })
        .fold(0.0, f64::max)
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Minimizes for each `ε` (other settings from `base`) and tabulates the
/// kinetic integral and the windowed spatial energy. The list needs at
/// least four values with `max/min ≥ 8`.
pub fn epsilon_sweep(u0: &Field, eps_list: &[f64], base: &MinimizeConfig) -> Result<SweepTable> {
    if eps_list.len() < 4 {
        return Err(invalid("epsilon sweep needs at least four values"));
    }
    let lo = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps_list.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0 && hi / lo >= MIN_SWEEP_SPAN * (1.0 - 1e-12)) {
        return Err(invalid(format!("epsilon sweep must span a factor of at least {MIN_SWEEP_SPAN}")));
    }
    let grid = crate::spectral::require_circle(u0)?;
    let energy = SpatialEnergy::new(grid, 0.5, 2.0)?;
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let cfg = MinimizeConfig { eps, ..base.clone() };
            let min = minimize(u0, &cfg)?;
            let v = time_rescale(&min.field, eps, Direction::ToV)?;
            let h = grid.spacing();
            let dtv_sq: f64 = v
                .slices()
                .windows(2)
                .map(|w| {
                    h * w[1].values().iter().zip(w[0].values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                        / v.dt()
                })
                .sum();
            Ok::<_, Error>(SweepRow {
                eps,
                dtv_sq,
                window_max: window_max(&min.field, &energy),
                energy: min.energy.total,
                iterations: min.iterations,
                status: min.status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<&SweepRow> = rows.iter().filter(|r| r.dtv_sq > 0.0).collect();
    let (slope, intercept) = if positive.len() >= 2 {
        let xs: Vec<f64> = positive.iter().map(|r| r.eps.ln()).collect();
        let ys: Vec<f64> = positive.iter().map(|r| r.dtv_sq.ln()).collect();
        let (s, i) = fit_line(&xs, &ys);
        (Some(s), Some(i))
    } else {
        (None, None)
    };
    let wmin = rows.iter().map(|r| r.window_max).fold(f64::INFINITY, f64::min);
    let wmax = rows.iter().map(|r| r.window_max).fold(0.0, f64::max);
    let window_ratio = (wmin > 0.0).then(|| wmax / wmin);
    Ok(SweepTable { rows, slope, intercept, window_ratio })
}
