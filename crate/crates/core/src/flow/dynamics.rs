//! Right-hand side, exponential Euler stepping and sphere reprojection.

use crate::error::{invalid, Error, Result};
use crate::field::{Field, SPHERE_TOL};
use crate::frac::{sq_grad_density_with, Calibration};
use crate::grid::CircleGrid;
use crate::spectral::{pv_weights, require_circle, Stencil};

/// Smallest pointwise norm accepted by [`reproject`].
pub const REPROJECT_FLOOR: f64 = 1e-6;

/// The operators of `∂ₜu + (-Δ)^{1/2} u = κ u |d_{1/2} u|²` on one grid.
///
/// Everything is assembled from physical-space circulant stencils so that a
/// step commutes bit-exactly with cyclic relabelling of the nodes.
#[derive(Clone, Debug)]
pub struct Dynamics {
    grid: CircleGrid,
    kappa: f64,
    nonlinear: bool,
    shift: Stencil,
    weights: Vec<f64>,
}

impl Dynamics {
    /// Fails with [`Error::MissingCalibration`] when no record is supplied.
    pub fn new(grid: CircleGrid, cal: Option<&Calibration>) -> Result<Self> {
        let cal = cal.ok_or(Error::MissingCalibration)?;
        Ok(Self {
            grid,
            kappa: cal.nonlinearity_scale,
            nonlinear: true,
            shift: Stencil::half_shift(grid),
            weights: pv_weights(grid),
        })
    }

    /// Drops the nonlinearity, leaving the linear half-heat flow.
    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear
    }

    /// `κ u(x) |d_{1/2} u|²(x)`; zero when the nonlinearity is disabled.
    pub fn rhs(&self, u: &Field) -> Field {
        if !self.nonlinear {
            return Field::zeros(self.grid, u.dim());
        }
        let off = self.shift.apply(u);
        let dens = sq_grad_density_with(u, &off, &self.weights);
        let mut out = u.mul_scalar_field(&dens).expect("density lives on the field grid");
        out.values_mut().iter_mut().for_each(|v| *v *= self.kappa);
        out
    }
}

/// `rhs` for a single evaluation; see [`Dynamics::rhs`].
pub fn rhs(u: &Field, cal: Option<&Calibration>) -> Result<Field> {
    let grid = require_circle(u)?;
    u.certify_on_sphere(SPHERE_TOL)?;
    Ok(Dynamics::new(grid, cal)?.rhs(u))
}

/// `φ₁(z) = (e^z − 1)/z`, `φ₁(0) = 1`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + z / 2.0
    } else {
        z.exp_m1() / z
    }
}

/// Exponential Euler for a fixed step:
/// `û⁺ = e^{−dt|k|} û + dt φ₁(−dt|k|) N̂(u)`.
#[derive(Clone, Debug)]
pub struct ExpEuler {
    dt: f64,
    decay: Stencil,
    forcing: Stencil,
}

impl ExpEuler {
    pub fn new(grid: CircleGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            decay: Stencil::from_real_multiplier(grid, |k| (-dt * k.abs() as f64).exp()),
            forcing: Stencil::from_real_multiplier(grid, |k| dt * phi1(-dt * k.abs() as f64)),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step with the source `n` held fixed over the step.
    pub fn advance(&self, u: &Field, n: &Field) -> Field {
        let a = self.decay.apply(u);
        let b = self.forcing.apply(n);
        a.add(&b).expect("stencil images share the grid")
    }

    /// One step of the full equation (no reprojection).
    pub fn step(&self, dyn_: &Dynamics, u: &Field) -> Field {
        self.advance(u, &dyn_.rhs(u))
    }
}

/// One exponential Euler step of length `dt`, followed by reprojection if
/// `reproject` is set.
pub fn exp_euler_step(u: &Field, dt: f64, cal: Option<&Calibration>, reproject_after: bool) -> Result<Field> {
    let grid = require_circle(u)?;
    let dynamics = Dynamics::new(grid, cal)?;
    let out = ExpEuler::new(grid, dt)?.step(&dynamics, u);
    if reproject_after {
        reproject(&out)
    } else {
        Ok(out)
    }
}

/// Pointwise projection `u / |u|` onto the unit sphere.
pub fn reproject(u: &Field) -> Result<Field> {
    if let Some((node, norm)) = u
        .norms()
        .into_iter()
        .enumerate()
        .find(|(_, r)| !(*r > REPROJECT_FLOOR))
    {
        return Err(Error::Degenerate { node, norm });
    }
    Ok(u.normalized_unchecked())
}
