//! Fixed-point iteration for the flow on a short time slab.
//!
//! Each iterate solves the linear problem
//! `∂ₜv + (-Δ)^{1/2} v = κ vᵐ |d_{1/2} vᵐ|²`, `v(0) = u₀`,
//! with the exponential integrator on the slab's time grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::flow::dynamics::{Dynamics, ExpEuler};
use crate::flow::FlowConfig;
use crate::spectral::sobolev_norm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardStatus {
    Converged,
    /// No contraction within `picard_max_iters`: the slab is too long.
    NotContracting,
}

#[derive(Clone, Debug)]
pub struct PicardSlab {
    /// `v(t_l)` on the slab time grid, `t_0 = 0`.
    pub trajectory: Vec<Field>,
    pub times: Vec<f64>,
    pub status: PicardStatus,
    pub iterations: usize,
    /// `sup_t ‖v^{m+1} − v^m‖_{H¹}` per iteration.
    pub differences: Vec<f64>,
    /// Successive ratios of [`PicardSlab::differences`].
    pub ratios: Vec<f64>,
    /// Residual of the discrete fixed-point equation for the returned iterate.
    pub residual: f64,
}

impl PicardSlab {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn last(&self) -> &Field {
        self.trajectory.last().expect("slab trajectories are nonempty")
    }
}

fn sweep(dynamics: &Dynamics, stepper: &ExpEuler, u0: &Field, source: &[Field]) -> Vec<Field> {
    let mut out = Vec::with_capacity(source.len());
    out.push(u0.clone());
    for l in 0..source.len() - 1 {
        let n = dynamics.rhs(&source[l]);
        let next = stepper.advance(&out[l], &n);
        out.push(next);
    }
    out
}

fn sup_distance(a: &[Field], b: &[Field]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        worst = worst.max(sobolev_norm(&x.sub(y)?, 1.0, false)?);
    }
    Ok(worst)
}

/// Runs the fixed-point iteration on `[0, t_slab]` with step `cfg.dt`.
pub fn picard_slab(
    dynamics: &Dynamics,
    u0: &Field,
    t_slab: f64,
    cfg: &FlowConfig,
) -> Result<PicardSlab> {
    if !(t_slab > 0.0) {
        return Err(invalid(format!("slab length must be positive, got {t_slab}")));
    }
    let steps = ((t_slab / cfg.dt).round() as usize).max(1);
    let dt = t_slab / steps as f64;
    let stepper = ExpEuler::new(dynamics.grid(), dt)?;
    let times: Vec<f64> = (0..=steps).map(|l| l as f64 * dt).collect();
    let mut current = vec![u0.clone(); steps + 1];
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    let mut status = PicardStatus::NotContracting;
    let mut iterations = 0;
    for _ in 0..cfg.picard_max_iters {
        let next = sweep(dynamics, &stepper, u0, &current);
        let d = sup_distance(&next, &current)?;
        if let Some(&prev) = differences.last() {
            if prev > 0.0 {
                ratios.push(d / prev);
            }
        }
        differences.push(d);
        current = next;
        iterations += 1;
        if !d.is_finite() {
            break;
        }
        if d <= cfg.picard_tol {
            status = PicardStatus::Converged;
            break;
        }
    }
    let check = sweep(dynamics, &stepper, u0, &current);
    let residual = sup_distance(&check, &current)?;
    Ok(PicardSlab { trajectory: current, times, status, iterations, differences, ratios, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::calibrate;
    use crate::grid::CircleGrid;
    use crate::harness::{make_initial, InitialDataSpec};

    fn setup() -> (Dynamics, FlowConfig) {
        let g = CircleGrid::new(32).unwrap();
        let cal = calibrate(g).unwrap();
        let cfg = FlowConfig { dt: 1e-2, picard_max_iters: 20, ..FlowConfig::default() };
        (Dynamics::new(g, Some(&cal)).unwrap(), cfg)
    }

    #[test]
    fn constant_converges_at_once() {
        let (d, cfg) = setup();
        let u0 = Field::from_fn(d.grid(), 3, |_| vec![0.0, 0.0, 1.0]).unwrap();
        let slab = picard_slab(&d, &u0, 0.1, &cfg).unwrap();
        assert_eq!(slab.status, PicardStatus::Converged);
        assert_eq!(slab.iterations, 1);
        assert!(slab.last().sub(&u0).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn small_data_contracts() {
        let (d, cfg) = setup();
        let u0 = make_initial(&InitialDataSpec::perturbed_constant(0.05, 3, 3), d.grid()).unwrap();
        assert!(crate::spectral::half_energy(&u0).unwrap() <= 1e-2);
        let slab = picard_slab(&d, &u0, 0.1, &cfg).unwrap();
        assert_eq!(slab.status, PicardStatus::Converged);
        assert!(slab.iterations <= 20);
        assert!(slab.ratios.iter().all(|r| *r < 1.0), "{:?}", slab.ratios);
        assert!(slab.residual <= 10.0 * cfg.picard_tol);
    }
}
