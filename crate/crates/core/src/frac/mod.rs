//! Off-diagonal calculus: fractional gradients `d_s`, the weighted pair
//! space `L²_od`, the fractional divergence and its calibration against
//! `(-Δ)^{1/2}`, conservation-law currents and compensation checks.
//!
//! All pair integrals use the half-offset rule: for the node `x_i` the
//! partner points are `y = x_i + (m + 1/2) h`, `m = 0..M`, with values
//! obtained by trigonometric interpolation. On band-limited data below the
//! Nyquist mode the rule is exact, which pins the calibration constants to
//! `C_half = 1/(2π)` and `C_pv = 1/π`.

mod calibrate;
mod conservation;
mod kernel;

use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate, Calibration, CalibrationResiduals, CALIBRATION_LIMIT};
pub use conservation::{
    divergence_defect, divfree_correction, gagliardo_local, remainder_t, remainder_t_diag,
    shatah_current, solve_half_poisson, wente_check, Arc, DivFreeCorrection, ShatahCurrent,
    DIVFREE_TOL, DIV_GRAD_FACTOR,
};
pub use kernel::{
    d_s, divergence, frac_div_pair, frac_div_pair_components, l2od_norm, pairing,
    sq_grad_density, OffDiagKernel, MAX_KERNEL_NODES,
};
pub(crate) use kernel::sq_grad_density_with;

use crate::error::{invalid, Result};

/// Thresholds that the analysis only proves to exist.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Concentration level `ε₁`.
    pub eps1: f64,
    /// Minimum bubble energy `ε₀`.
    pub eps0: f64,
    pub sphere_tol: f64,
    pub picard_tol: f64,
    pub quad_tol: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            eps1: 0.05,
            eps0: 0.5,
            sphere_tol: crate::field::SPHERE_TOL,
            picard_tol: 1e-8,
            quad_tol: 1e-6,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps0", self.eps0),
            ("sphere_tol", self.sphere_tol),
            ("picard_tol", self.picard_tol),
            ("quad_tol", self.quad_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
