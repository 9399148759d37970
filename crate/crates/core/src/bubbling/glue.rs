//! Continuation of the flow past concentration times.

use crate::error::{Error, Result};
use crate::flow::{reproject, run_flow, FlowConfig, FlowStatus, FlowTrace};
use crate::frac::Calibration;

/// Largest number of restarts allowed by the energy budget: every
/// singular time costs at least `ε₀`, so at most `⌊E(u₀)/ε₀⌋` can occur.
pub fn restart_bound(initial_energy: f64, eps0: f64) -> usize {
    if !(initial_energy > 0.0) {
        return 0;
    }
    (initial_energy / eps0).floor() as usize
}

/// Restarts a trace that ended in concentration from its last snapshot
/// (projected to the sphere) and concatenates until `cfg.t_end` or a
/// different terminal status. Every junction must not gain energy.
pub fn glue_continue(trace: &FlowTrace, cfg: &FlowConfig, cal: Option<&Calibration>) -> Result<FlowTrace> {
    if trace.status != FlowStatus::ConcentrationDetected {
        return Ok(trace.clone());
    }
    let bound = restart_bound(trace.initial().energy, cfg.thresholds.eps0);
    let mut out = trace.clone();
    let mut restarts = 0;
    while out.status == FlowStatus::ConcentrationDetected {
        let remaining = cfg.t_end - out.last().t;
        if remaining < 0.5 * cfg.dt {
            out.status = FlowStatus::Completed;
            break;
        }
        if restarts >= bound {
            return Err(Error::RestartLimit { restarts: restarts + 1, bound });
        }
        restarts += 1;
        let u = reproject(&out.last().u)?;
        let sub = FlowConfig { t_end: remaining, ..cfg.clone() };
        let next = run_flow(&u, &sub, cal)?;
        out = out.concatenate(&next)?;
        let j = out.junctions.last().expect("concatenate records a junction");
        if j.drop < -cfg.thresholds.quad_tol {
            return Err(Error::Stalled(format!(
                "energy increased across the junction at t = {} by {:.3e}",
                j.t, -j.drop
            )));
        }
    }
    Ok(out)
}
