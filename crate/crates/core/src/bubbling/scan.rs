//! Concentration scans over traces and the integrated inequality reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubbling::energy::LocalEnergy;
use crate::error::{invalid, Result};
use crate::field::Field;
use crate::flow::FlowTrace;
use crate::frac::{gagliardo_local, Arc};
use crate::spectral::{derivative, frac_laplacian, require_circle};

/// Largest `E_R` over the nodes of one snapshot at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub node: usize,
    pub x: f64,
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPoint {
    pub t: f64,
    pub x: f64,
    pub radius: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub radii: Vec<f64>,
    pub eps1: f64,
    pub times: Vec<f64>,
    /// `ε(R) = sup_{t, x} E_R(u; x, t)` per radius.
    pub eps_of_r: Vec<f64>,
    /// `peaks[snapshot][radius]`.
    pub peaks: Vec<Vec<Peak>>,
    /// Peak locations with `E_R ≥ eps1`, one per snapshot and radius.
    pub flagged_points: Vec<FlaggedPoint>,
    /// Number of `(t, x, R)` samples with `E_R ≥ eps1`.
    pub flagged_samples: usize,
    pub struwe_ratio: Option<f64>,
    pub h1_ratio: Option<f64>,
    /// `table[snapshot][radius][node] = E_R`.
    #[serde(skip)]
    pub table: Vec<Vec<Vec<f64>>>,
}

impl ConcentrationReport {
    /// Radii at which some snapshot is flagged.
    pub fn flagged_radii(&self) -> Vec<f64> {
        self.radii
            .iter()
            .copied()
            .filter(|r| self.flagged_points.iter().any(|p| p.radius == *r))
            .collect()
    }
}

/// Tabulates `E_R` over all snapshots, nodes and radii.
pub fn concentration_scan(trace: &FlowTrace, radii: &[f64], eps1: f64) -> Result<ConcentrationReport> {
    if radii.is_empty() {
        return Err(invalid("concentration scan needs at least one radius"));
    }
    let grid = require_circle(&trace.initial().u)?;
    let le = LocalEnergy::new(grid);
    let table: Vec<Vec<Vec<f64>>> = trace
        .states
        .par_iter()
        .map(|s| {
            let q = le.quarter_density(&s.u);
            radii.iter().map(|&r| le.profile_from_density(&q, r)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut eps_of_r = vec![0.0f64; radii.len()];
    let mut peaks = Vec::with_capacity(table.len());
    let mut flagged_points = Vec::new();
    let mut flagged_samples = 0;
    for (s, rows) in trace.states.iter().zip(&table) {
        let mut row_peaks = Vec::with_capacity(radii.len());
        for (ri, row) in rows.iter().enumerate() {
            let (node, energy) = row
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, e)| if e > best.1 { (j, e) } else { best });
            eps_of_r[ri] = eps_of_r[ri].max(energy);
            flagged_samples += row.iter().filter(|e| **e >= eps1).count();
            let peak = Peak { node, x: grid.node(node), energy };
            if energy >= eps1 {
                flagged_points.push(FlaggedPoint { t: s.t, x: peak.x, radius: radii[ri], energy });
            }
            row_peaks.push(peak);
        }
        peaks.push(row_peaks);
    }
    let (mut struwe_ratio, mut h1_ratio) = (None, None);
    if trace.states.len() >= 2 {
        if let Some(r) = radii.iter().copied().filter(|r| *r < 0.5).reduce(f64::max) {
            struwe_ratio = Some(struwe_l4_report(trace, r)?);
            h1_ratio = Some(h1_bound_report(trace, r)?);
        }
    }
    Ok(ConcentrationReport {
        radii: radii.to_vec(),
        eps1,
        times: trace.times(),
        eps_of_r,
        peaks,
        flagged_points,
        flagged_samples,
        struwe_ratio,
        h1_ratio,
        table,
    })
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn check_report_input(trace: &FlowTrace, radius: f64) -> Result<()> {
    if trace.states.len() < 2 {
        return Err(invalid("inequality reports need at least two snapshots"));
    }
    if !(radius > 0.0 && radius < 0.5) {
        return Err(invalid(format!("report radius must lie in (0, 1/2), got {radius}")));
    }
    Ok(())
}

/// `∫∫ |(-Δ)^{1/4} u|⁴ / (sup E_R · (∫∫ |(-Δ)^{1/2} u|² + R⁻² ∫∫ |(-Δ)^{1/4} u|²))`.
///
/// `0/0` is reported as `0`, `x/0` with `x > 0` as `+∞`.
pub fn struwe_l4_report(trace: &FlowTrace, radius: f64) -> Result<f64> {
    check_report_input(trace, radius)?;
    let grid = require_circle(&trace.initial().u)?;
    let h = grid.spacing();
    let le = LocalEnergy::new(grid);
    let rows: Vec<(f64, f64, f64, f64)> = trace
        .states
        .par_iter()
        .map(|s| {
            let q = le.quarter_density(&s.u);
            let l4 = h * q.values().iter().map(|v| v * v).sum::<f64>();
            let l2 = h * q.values().iter().sum::<f64>();
            let lap = frac_laplacian(&s.u, 0.5)?;
            let lap2 = h * lap.values().iter().map(|v| v * v).sum::<f64>();
            let sup = le.profile_from_density(&q, radius)?.into_iter().fold(0.0, f64::max);
            Ok((l4, l2, lap2, sup))
        })
        .collect::<Result<_>>()?;
    let times = trace.times();
    let col = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let lhs = trapezoid(&times, &col(|r| r.0));
    let quarter = trapezoid(&times, &col(|r| r.1));
    let lap = trapezoid(&times, &col(|r| r.2));
    let sup = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let rhs = sup * (lap + quarter / (radius * radius));
    Ok(ratio(lhs, rhs))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `∫∫ |∂ₓu|² / (E(u₀)(1 + T/R²))`; `0` when `E(u₀) = 0`.
pub fn h1_bound_report(trace: &FlowTrace, radius: f64) -> Result<f64> {
    check_report_input(trace, radius)?;
    let e0 = trace.initial().energy;
    if e0 == 0.0 {
        return Ok(0.0);
    }
    let grads: Vec<f64> = trace
        .states
        .par_iter()
        .map(|s| Ok(derivative(&s.u)?.l2_norm().powi(2)))
        .collect::<Result<_>>()?;
    let lhs = trapezoid(&trace.times(), &grads);
    Ok(lhs / (e0 * (1.0 + trace.duration() / (radius * radius))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Sample {
    pub local_energy: f64,
    pub gagliardo: f64,
}

/// `(E_R(u; x0), ∫_{B} ∫_{B} |u(x) − u(y)|²/|x − y|²)` with `B = B_{2^N R}(x0)`.
pub fn prop1_check(u: &Field, x0: f64, radius: f64, n: u32) -> Result<Prop1Sample> {
    let big = radius * 2f64.powi(n as i32);
    if !(big < std::f64::consts::PI) {
        return Err(invalid(format!("2^N R = {big} must stay below π")));
    }
    let local_energy = crate::bubbling::local_energy(u, x0, radius)?;
    let ball = Arc::new(x0, big);
    Ok(Prop1Sample { local_energy, gagliardo: gagliardo_local(u, ball, ball)? })
}
