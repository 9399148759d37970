//! ε-weighted space-time minimization: `𝓔_ε`, its projected minimizers and
//! the diagnostics of the rescaled path `v(τ, x) = u(ετ, x)`.

mod diagnostics;
mod energy;
mod field;

pub use diagnostics::{
    diagnostics_ire, el_residual, epsilon_sweep, monotonicity_check, time_dilate, time_rescale,
    Direction, IreDiagnostics, SweepRow, SweepTable, MIN_SWEEP_SPAN,
};
pub use energy::{
    energy_eps, minimize, static_energy, EpsEnergy, MinimizeConfig, MinimizeStatus, Minimizer,
    MIN_HORIZON,
};
pub use field::{Frame, SpaceTimeField};
