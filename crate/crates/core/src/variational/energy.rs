//! The ε-weighted space-time energy and its projected minimization.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::spectral::fourier::{fft_forward, fft_inverse};
use crate::variational::field::{Frame, SpaceTimeField, SpatialEnergy};

/// Horizon in units of ε below which the truncated energy is rejected.
pub const MIN_HORIZON: f64 = 10.0;

/// Pieces of `𝓔_ε(U)`. `total` includes the static tail beyond the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsEnergy {
    pub total: f64,
    pub kinetic: f64,
    pub spatial: f64,
    pub tail: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Weights {
    /// Kinetic weight per interval, multiplying `Σ_j |u_{m+1,j} − u_{m,j}|²`.
    pub kinetic: Vec<f64>,
    /// Spatial weight per node, multiplying `S(u_m)`; the last one carries
    /// the tail.
    pub spatial: Vec<f64>,
    pub tail: f64,
}

impl Weights {
    /// `ε` multiplies the kinetic term and `1` the spatial term in the
    /// `u`-frame; in the `v`-frame the roles are `1` and `ε` with unit decay.
    pub fn new(st: &SpaceTimeField, eps: f64, p: f64) -> Self {
        let dt = st.dt();
        let h = st.grid().spacing();
        let (decay, kin, pot) = match st.frame() {
            Frame::U => (eps, eps, 1.0),
            Frame::V => (1.0, 1.0, eps),
        };
        let steps = st.steps();
        let kinetic = (0..steps)
            .map(|m| kin * h * (-(m as f64 + 0.5) * dt / decay).exp() / dt)
            .collect();
        let mut spatial: Vec<f64> = (0..=steps)
            .map(|m| {
                let tau = if m == 0 || m == steps { 0.5 * dt } else { dt };
                tau * (-(m as f64) * dt / decay).exp() * pot * 2.0 / p
            })
            .collect();
        let tail = decay * (-st.horizon() / decay).exp() * pot * 2.0 / p;
        spatial[steps] += tail;
        Self { kinetic, spatial, tail }
    }
}

fn kinetic_sum(st: &SpaceTimeField, w: &Weights) -> f64 {
    st.slices()
        .windows(2)
        .zip(&w.kinetic)
        .map(|(pair, a)| {
            let d: f64 = pair[0]
                .values()
                .iter()
                .zip(pair[1].values())
                .map(|(x, y)| (y - x) * (y - x))
                .sum();
            a * d
        })
        .sum()
}

fn evaluate(st: &SpaceTimeField, eps: f64, energy: &SpatialEnergy, p: f64) -> EpsEnergy {
    let w = Weights::new(st, eps, p);
    let kinetic = kinetic_sum(st, &w);
    let s = energy.values(st.slices());
    let tail = w.tail * s[st.steps()];
    let spatial: f64 = s.iter().zip(&w.spatial).map(|(a, b)| a * b).sum::<f64>() - tail;
    EpsEnergy { total: kinetic + spatial + tail, kinetic, spatial, tail }
}

fn check_horizon(st: &SpaceTimeField, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let scale = match st.frame() {
        Frame::U => eps,
        Frame::V => 1.0,
    };
    if st.horizon() < MIN_HORIZON * scale * (1.0 - 1e-12) {
        return Err(invalid(format!(
            "horizon {} shorter than {MIN_HORIZON} decay lengths",
            st.horizon()
        )));
    }
    Ok(())
}

/// `𝓔_ε(U) = ∫ e^{−t/ε} (ε ‖∂ₜu‖² + (2/p) S_{s,p}(u)) dt`, or for a
/// `v`-frame field `𝓙_ε(V) = ∫ e^{−τ} (‖∂_τ v‖² + ε (2/p) S_{s,p}(v)) dτ`.
///
/// Forward differences in time, trapezoid weights for the spatial part, and
/// the static continuation past the horizon as `tail`.
pub fn energy_eps(u: &SpaceTimeField, eps: f64, s: f64, p: f64) -> Result<EpsEnergy> {
    let energy = SpatialEnergy::new(u.grid(), s, p)?;
    check_horizon(u, eps)?;
    Ok(evaluate(u, eps, &energy, p))
}

/// `E_{s,p}(u) = (1/p) S_{s,p}(u)`; the static path has `𝓔_ε = 2ε E_{s,p}(u₀)`.
pub fn static_energy(u0: &Field, s: f64, p: f64) -> Result<f64> {
    let grid = crate::spectral::require_circle(u0)?;
    Ok(SpatialEnergy::new(grid, s, p)?.value(u0) / p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub eps: f64,
    pub s: f64,
    pub p: f64,
    pub max_iters: usize,
    /// Relative energy decrease below which the descent stops.
    pub tol: f64,
    /// Horizon in units of ε.
    pub horizon: f64,
    /// Time steps per unit ε.
    pub steps_per_eps: usize,
    pub max_halvings: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            s: 0.5,
            p: 2.0,
            max_iters: 400,
            tol: 1e-8,
            horizon: MIN_HORIZON,
            steps_per_eps: 20,
            max_halvings: 40,
        }
    }
}

impl MinimizeConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.horizon >= MIN_HORIZON) {
            return Err(invalid(format!("horizon must be at least {MIN_HORIZON} eps")));
        }
        if self.steps_per_eps < 2 {
            return Err(invalid("steps_per_eps must be at least 2"));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("tol must be nonnegative"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon * self.steps_per_eps as f64).round() as usize
    }

    pub fn dt(&self) -> f64 {
        self.eps / self.steps_per_eps as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    /// Halving the step never decreased the energy.
    BacktrackingExhausted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Minimizer {
    pub field: SpaceTimeField,
    pub energy: EpsEnergy,
    /// Objective after each accepted step, starting from the static path.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub status: MinimizeStatus,
}

fn tangent_project(g: &mut Field, u: &Field) {
    let n = u.dim();
    for (gj, uj) in g.values_mut().chunks_mut(n).zip(u.values().chunks(n)) {
        let dot: f64 = gj.iter().zip(uj).map(|(a, b)| a * b).sum();
        gj.iter_mut().zip(uj).for_each(|(a, b)| *a -= dot * b);
    }
}

/// Solves the tridiagonal systems of the quadratic model, one per Fourier
/// mode and component, over the free slices `1..=M_t`.
fn precondition(grad: &[Field], w: &Weights, s: f64) -> Vec<Field> {
    let free = grad.len();
    let grid = grad[0].circle_grid().expect("circle grid");
    let m = grid.len();
    let n = grad[0].dim();
    let h = grid.spacing();
    let mut spec: Vec<Vec<Complex64>> = grad
        .par_iter()
        .map(|g| {
            let mut out = vec![Complex64::new(0.0, 0.0); m * n];
            for c in 0..n {
                let mut buf: Vec<Complex64> =
                    (0..m).map(|j| Complex64::new(g.values()[j * n + c], 0.0)).collect();
                fft_forward(&mut buf);
                for (j, b) in buf.into_iter().enumerate() {
                    out[c * m + j] = b;
                }
            }
            out
        })
        .collect();
    let mut diag = vec![0.0; free];
    let mut cp = vec![0.0; free];
    let mut dp = vec![Complex64::new(0.0, 0.0); free];
    for idx in 0..m {
        let alpha = 2.0 * PI * h * (grid.wavenumber(idx).unsigned_abs() as f64).powf(2.0 * s);
        for (l, d) in diag.iter_mut().enumerate() {
            let slice = l + 1;
            let mut v = 2.0 * w.kinetic[slice - 1] + 2.0 * w.spatial[slice] * alpha;
            if slice < free {
                v += 2.0 * w.kinetic[slice];
            }
            *d = v;
        }
        for c in 0..n {
            // Thomas algorithm; off-diagonals are −2 a_{slice}.
            for l in 0..free {
                let rhs = spec[l][c * m + idx];
                let lower = if l > 0 { -2.0 * w.kinetic[l] } else { 0.0 };
                let upper = if l + 1 < free { -2.0 * w.kinetic[l + 1] } else { 0.0 };
                let denom = diag[l] - lower * if l > 0 { cp[l - 1] } else { 0.0 };
                cp[l] = upper / denom;
                dp[l] = (rhs - lower * if l > 0 { dp[l - 1] } else { Complex64::new(0.0, 0.0) }) / denom;
            }
            for l in (0..free).rev() {
                let next = if l + 1 < free { spec[l + 1][c * m + idx] } else { Complex64::new(0.0, 0.0) };
                spec[l][c * m + idx] = dp[l] - cp[l] * next;
            }
        }
    }
    spec.into_par_iter()
        .map(|coeffs| {
            let mut values = vec![0.0; m * n];
            for c in 0..n {
                let mut buf = coeffs[c * m..(c + 1) * m].to_vec();
                fft_inverse(&mut buf);
                for (j, b) in buf.into_iter().enumerate() {
                    values[j * n + c] = b.re / m as f64;
                }
            }
            Field::from_parts_unchecked(grid.into(), n, values)
        })
        .collect()
}

/// Gradient of the objective with respect to the free slices `1..=M_t`.
fn gradient(st: &SpaceTimeField, w: &Weights, energy: &SpatialEnergy) -> Vec<Field> {
    let slices = st.slices();
    let steps = st.steps();
    (1..=steps)
        .into_par_iter()
        .map(|m| {
            let mut g = energy.gradient(&slices[m]).scale(w.spatial[m]);
            let vals = g.values_mut();
            let (prev, cur) = (slices[m - 1].values(), slices[m].values());
            for (j, v) in vals.iter_mut().enumerate() {
                *v += 2.0 * w.kinetic[m - 1] * (cur[j] - prev[j]);
            }
            if m < steps {
                let next = slices[m + 1].values();
                for (j, v) in vals.iter_mut().enumerate() {
                    *v -= 2.0 * w.kinetic[m] * (next[j] - cur[j]);
                }
            }
            let mut g = g;
            tangent_project(&mut g, &slices[m]);
            g
        })
        .collect()
}

/// Projected, preconditioned descent on all slices but the pinned `u(0)`.
///
/// Each step moves along the tangent direction given by the inverse of the
/// quadratic model (per Fourier mode a tridiagonal system in time), then
/// renormalizes pointwise; the step is halved until the energy decreases.
pub fn minimize(u0: &Field, cfg: &MinimizeConfig) -> Result<Minimizer> {
    cfg.validate()?;
    u0.certify_on_sphere(crate::field::SPHERE_TOL)?;
    let grid = crate::spectral::require_circle(u0)?;
    let energy = SpatialEnergy::new(grid, cfg.s, cfg.p)?;
    let mut st = SpaceTimeField::constant_in_time(u0, cfg.dt(), cfg.steps())?;
    let w = Weights::new(&st, cfg.eps, cfg.p);
    let mut current = evaluate(&st, cfg.eps, &energy, cfg.p);
    let mut history = vec![current.total];
    let mut status = MinimizeStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        if current.total <= f64::MIN_POSITIVE.sqrt() {
            status = MinimizeStatus::Converged;
            break;
        }
        let grad = gradient(&st, &w, &energy);
        let mut dir = precondition(&grad, &w, cfg.s);
        dir.par_iter_mut()
            .zip(&st.slices()[1..])
            .for_each(|(d, u)| tangent_project(d, u));
        // Decrease predicted by the quadratic model at unit step.
        let predicted: f64 = grad
            .iter()
            .zip(&dir)
            .map(|(g, d)| g.values().iter().zip(d.values()).map(|(a, b)| a * b).sum::<f64>())
            .sum::<f64>()
            / 2.0;
        if predicted <= cfg.tol * current.total {
            status = MinimizeStatus::Converged;
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let mut slices = Vec::with_capacity(st.steps() + 1);
            slices.push(st.slices()[0].clone());
            slices.extend(
                st.slices()[1..]
                    .par_iter()
                    .zip(&dir)
                    .map(|(u, d)| u.lin_comb(1.0, d, -step).map(|f| f.normalized_unchecked()))
                    .collect::<Result<Vec<_>>>()?,
            );
            let trial = st.with_slices(slices);
            let e = evaluate(&trial, cfg.eps, &energy, cfg.p);
            if e.total < current.total {
                accepted = Some((trial, e));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, e)) = accepted else {
            status = MinimizeStatus::BacktrackingExhausted;
            break;
        };
        let decrease = (current.total - e.total) / current.total;
        st = trial;
        current = e;
        history.push(e.total);
        iterations += 1;
        if decrease < cfg.tol {
            status = MinimizeStatus::Converged;
            break;
        }
    }
    Ok(Minimizer { field: st, energy: current, history, iterations, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CircleGrid;
    use crate::harness::{make_initial, InitialDataSpec};

    fn perturbed(m: usize) -> Field {
        make_initial(&InitialDataSpec::perturbed_constant(0.1, 3, 3), CircleGrid::new(m).unwrap()).unwrap()
    }

    #[test]
    fn constant_path_has_zero_energy() {
        let g = CircleGrid::new(16).unwrap();
        let u0 = make_initial(&InitialDataSpec::constant(3), g).unwrap();
        let st = SpaceTimeField::constant_in_time(&u0, 0.01, 100).unwrap();
        assert!(energy_eps(&st, 0.1, 0.5, 2.0).unwrap().total < 1e-24);
        let min = minimize(&u0, &MinimizeConfig::with_eps(0.1)).unwrap();
        assert!(min.energy.total < 1e-24);
        assert!(min.field.slices().iter().all(|s| s == &u0));
        assert_eq!(min.status, MinimizeStatus::Converged);
    }

    #[test]
    fn static_path_matches_closed_form() {
        let u0 = perturbed(32);
        let eps = 0.1;
        let st = SpaceTimeField::constant_in_time(&u0, eps / 20.0, 200).unwrap();
        let e = energy_eps(&st, eps, 0.5, 2.0).unwrap();
        assert_eq!(e.kinetic, 0.0);
        let bound = 2.0 * eps * static_energy(&u0, 0.5, 2.0).unwrap();
        assert!((e.total - bound).abs() <= 1e-3 * bound, "{} vs {bound}", e.total);
        assert!(e.tail > 0.0 && e.tail < 1e-4 * bound);
    }

    #[test]
    fn rejects_short_horizon_and_small_p() {
        let u0 = perturbed(16);
        let st = SpaceTimeField::constant_in_time(&u0, 0.01, 10).unwrap();
        assert!(energy_eps(&st, 0.1, 0.5, 2.0).is_err());
        let st = SpaceTimeField::constant_in_time(&u0, 0.01, 100).unwrap();
        assert!(energy_eps(&st, 0.1, 0.5, 1.5).is_err());
    }

    #[test]
    fn minimizer_beats_static_competitor() {
        let u0 = perturbed(32);
        let cfg = MinimizeConfig::with_eps(0.1);
        let min = minimize(&u0, &cfg).unwrap();
        let bound = 2.0 * cfg.eps * static_energy(&u0, 0.5, 2.0).unwrap();
        assert!(min.energy.total <= bound * (1.0 + 1e-3));
        assert!(min.energy.total < 0.9 * bound);
        assert!(min.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(min.field.initial(), &u0);
        assert!(min.field.max_sphere_drift() < 1e-12);
        assert_eq!(min.status, MinimizeStatus::Converged, "{} iterations", min.iterations);
    }
}
