//! The acceptance suite: fifteen numerical criteria with measured values,
//! tolerances and a pass/fail/skipped outcome each.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bubbling::{
    concentration_scan, glue_continue, h1_bound_report, prop1_check, restart_bound,
    struwe_l4_report, bubble_residual,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::flow::{
    energy_identity_residual, picard_slab, rhs, run_flow, Dynamics, FlowConfig, FlowState,
    FlowStatus, FlowTrace, PicardStatus,
};
use crate::frac::{
    calibrate, divergence_defect, divfree_correction, frac_div_pair, l2od_norm, shatah_current,
    sq_grad_density, Calibration,
};
use crate::grid::{chordal_distance, CircleGrid, LineGrid};
use crate::harness::experiment::wente_ensemble;
use crate::harness::initial::{make_initial, InitialDataSpec};
use crate::spectral::{frac_laplacian, half_energy, pv_half_laplacian, sobolev_norm};
use crate::variational::{
    epsilon_sweep, minimize, monotonicity_check, static_energy, time_rescale, Direction,
    MinimizeConfig,
};

/// Grid sizes below this select reduced mode.
pub const REDUCED_BELOW: usize = 128;

/// Criteria that need their stated resolutions (refinement pairs or
/// fine-scale bubbles); skipped in reduced mode.
pub const RESOLUTION_SENSITIVE: [u32; 4] = [10, 11, 12, 13];

pub const TITLES: [&str; 15] = [
    "operator cross-validation",
    "multiplier exactness",
    "chordal identity",
    "calibration stationarity",
    "energy monotonicity",
    "energy identity",
    "fixed-point contraction",
    "conservation laws",
    "divergence-free correction",
    "compensation bound",
    "bubble residual",
    "concentration pipeline",
    "inequality reports",
    "variational bounds",
    "gluing bookkeeping",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceptOptions {
    /// Reference grid size; below [`REDUCED_BELOW`] the suite runs reduced.
    pub resolution: usize,
    /// Multiplies the calibrated `C_half` (and the dependent nonlinearity
    /// scale); `1` is the honest run.
    pub c_half_factor: f64,
    /// Subset of criteria to run; `None` runs all.
    pub criteria: Option<Vec<u32>>,
    pub seed: u64,
}

impl Default for AcceptOptions {
    fn default() -> Self {
        Self { resolution: 512, c_half_factor: 1.0, criteria: None, seed: 0 }
    }
}

impl AcceptOptions {
    pub fn reduced(&self) -> bool {
        self.resolution < REDUCED_BELOW
    }

    fn m(&self, stated: usize) -> usize {
        if self.reduced() {
            stated.min(self.resolution)
        } else {
            stated
        }
    }

    fn calibration(&self, grid: CircleGrid) -> Result<Calibration> {
        Ok(calibrate(grid)?.perturbed(self.c_half_factor))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub outcome: Outcome,
    pub measurements: Vec<Measurement>,
    pub note: Option<String>,
    pub seconds: f64,
}

impl CriterionResult {
    /// One line: outcome, number, title and the measured values.
    pub fn line(&self) -> String {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIP",
        };
        let mut s = format!("[{tag}] {:>2}. {}", self.id, self.title);
        let parts: Vec<String> = self
            .measurements
            .iter()
            .map(|m| format!("{} = {:.4e} ({})", m.name, m.value, m.tolerance))
            .collect();
        if !parts.is_empty() {
            write!(s, ": {}", parts.join("; ")).unwrap();
        }
        if let Some(n) = &self.note {
            write!(s, " [{n}]").unwrap();
        }
        write!(s, " ({:.1} s)", self.seconds).unwrap();
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub options: AcceptOptions,
    pub results: Vec<CriterionResult>,
}

impl AcceptanceReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            writeln!(s, "{}", r.line()).unwrap();
        }
        s
    }

    pub fn failed(&self) -> Vec<u32> {
        self.results.iter().filter(|r| r.outcome == Outcome::Fail).map(|r| r.id).collect()
    }

    pub fn get(&self, id: u32) -> Option<&CriterionResult> {
        self.results.iter().find(|r| r.id == id)
    }
}

/// Accumulates measurements of one criterion.
#[derive(Default)]
struct Checks {
    items: Vec<Measurement>,
    note: Option<String>,
}

impl Checks {
    fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.push(name, value, format!("<= {tol:e}"), value <= tol);
    }

    fn at_least(&mut self, name: &str, value: f64, tol: f64) {
        self.push(name, value, format!(">= {tol:e}"), value >= tol);
    }

    fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.push(name, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi);
    }

    fn holds(&mut self, name: &str, value: f64, what: &str, ok: bool) {
        self.push(name, value, what.to_string(), ok);
    }

    fn push(&mut self, name: &str, value: f64, tolerance: String, pass: bool) {
        self.items.push(Measurement { name: name.into(), value, tolerance, pass: pass && !value.is_nan() });
    }
}

/// Runs the selected criteria in order.
pub fn acceptance_suite(opts: &AcceptOptions) -> Result<AcceptanceReport> {
    let ids: Vec<u32> = match &opts.criteria {
        Some(ids) => {
            if let Some(bad) = ids.iter().find(|i| !(1..=15).contains(*i)) {
                return Err(Error::Config(format!("no acceptance criterion {bad}")));
            }
            ids.clone()
        }
        None => (1..=15).collect(),
    };
    let results = ids.into_iter().map(|id| run_criterion(id, opts)).collect();
    Ok(AcceptanceReport { options: opts.clone(), results })
}

/// Runs one criterion; numerical errors count as failures.
pub fn run_criterion(id: u32, opts: &AcceptOptions) -> CriterionResult {
    let title = TITLES[(id - 1) as usize].to_string();
    let start = Instant::now();
    if opts.reduced() && RESOLUTION_SENSITIVE.contains(&id) {
        return CriterionResult {
            id,
            title,
            outcome: Outcome::Skipped,
            measurements: Vec::new(),
            note: Some(format!("skipped (under-resolved): M = {} < {REDUCED_BELOW}", opts.resolution)),
            seconds: 0.0,
        };
    }
    let mut c = Checks::default();
    let run = match id {
        1 => operator_cross_validation(opts, &mut c),
        2 => multiplier_exactness(opts, &mut c),
        3 => chordal_identity(opts, &mut c),
        4 => stationarity(opts, &mut c),
        5 => energy_monotonicity(opts, &mut c),
        6 => energy_identity(opts, &mut c),
        7 => contraction(opts, &mut c),
        8 => conservation(opts, &mut c),
        9 => divfree(opts, &mut c),
        10 => compensation(opts, &mut c),
        11 => bubble(opts, &mut c),
        12 => concentration(opts, &mut c),
        13 => inequalities(opts, &mut c),
        14 => variational(opts, &mut c),
        _ => gluing(opts, &mut c),
    };
    let outcome = match &run {
        Err(e) => {
            c.note = Some(format!("error {}: {e}", e.code()));
            Outcome::Fail
        }
        Ok(()) if !c.items.is_empty() && c.items.iter().all(|m| m.pass) => Outcome::Pass,
        Ok(()) => Outcome::Fail,
    };
    CriterionResult {
        id,
        title,
        outcome,
        measurements: c.items,
        note: c.note,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn grid(m: usize) -> Result<CircleGrid> {
    CircleGrid::new(m)
}

fn rel_l2(a: &Field, b: &Field) -> Result<f64> {
    Ok(a.sub(b)?.l2_norm() / b.l2_norm())
}

fn operator_cross_validation(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(256))?;
    let cal = o.calibration(g)?;
    let u = Field::scalar(g, |x| (3.0 * x).cos());
    let exact = frac_laplacian(&u, 0.5)?;
    c.at_most("relative L2 gap", rel_l2(&pv_half_laplacian(&u, cal.c_pv)?, &exact)?, 1e-2);
    Ok(())
}

fn multiplier_exactness(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(256))?;
    let mut worst = 0.0f64;
    for s in [0.25, 0.5] {
        for k in 1..=g.len() / 4 {
            let kf = k as f64;
            let u = Field::from_fn(g, 2, |x| vec![(kf * x).cos(), (kf * x).sin()])?;
            let got = frac_laplacian(&u, s)?;
            let scale = kf.powf(2.0 * s);
            let err = got.values().iter().zip(u.values()).map(|(a, b)| (a - scale * b).abs()).fold(0.0, f64::max);
            worst = worst.max(err / scale);
        }
    }
    c.at_most("max relative error", worst, 1e-12);
    Ok(())
}

fn chordal_identity(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(256))?;
    let u = make_initial(&InitialDataSpec::great_circle(1, 3), g)?;
    let d = sq_grad_density(&u)?;
    c.at_most("max |density - 2 pi|", d.values().iter().map(|v| (v - 2.0 * PI).abs()).fold(0.0, f64::max), 1e-10);
    Ok(())
}

fn stationarity(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(512))?;
    let cal = o.calibration(g)?;
    let u = make_initial(&InitialDataSpec::great_circle(1, 3), g)?;
    let target = frac_laplacian(&u, 0.5)?;
    c.at_most("relative rhs residual", rel_l2(&rhs(&u, Some(&cal))?, &target)?, 1e-2);
    let cfg = FlowConfig { dt: 1e-3, t_end: 1.0, snapshot_stride: 100, ..FlowConfig::default() };
    let tr = run_flow(&u, &cfg, Some(&cal))?;
    let drift = tr.states.iter().map(|s| s.u.sub(&u).map(|d| d.l2_norm())).collect::<Result<Vec<_>>>()?;
    c.holds("final time", tr.last().t, "= 1", (tr.last().t - 1.0).abs() < 1e-9);
    c.at_most("max L2 drift", drift.into_iter().fold(0.0, f64::max), 1e-2);
    Ok(())
}

fn perturbed(amplitude: f64, seed: u64, m: usize) -> Result<Field> {
    make_initial(&InitialDataSpec::perturbed_constant(amplitude, seed, 3), grid(m)?)
}

fn energy_monotonicity(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(64))?;
    let cal = o.calibration(g)?;
    let cfg = FlowConfig { dt: 1e-3, t_end: 20.0, snapshot_stride: 200, ..FlowConfig::default() };
    let runs = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let u = perturbed(0.2, o.seed.wrapping_add(i), g.len())?;
            let tr = run_flow(&u, &cfg, Some(&cal))?;
            Ok((tr.initial().energy, tr.max_energy_increase, tr.last().energy, tr.last().t, tr.status))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_e0 = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    let increase = runs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let decay = runs.iter().map(|r| r.2 / r.0).fold(0.0, f64::max);
    let completed = runs.iter().all(|r| r.4 == FlowStatus::Completed && (r.3 - 20.0).abs() < 1e-9);
    c.at_most("max initial energy", max_e0, 0.1);
    c.at_most("max per-step energy increase", increase, 1e-8);
    c.at_most("max final/initial energy", decay, 1e-3);
    c.holds("runs reaching t = 20", runs.len() as f64, "all completed", completed);
    Ok(())
}

fn energy_identity(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(64))?;
    let cal = o.calibration(g)?;
    let u = perturbed(0.3, o.seed, g.len())?;
    let residual = |dt: f64| -> Result<(f64, f64)> {
        let cfg = FlowConfig { dt, t_end: 1.0, snapshot_stride: 1, ..FlowConfig::default() };
        let tr = run_flow(&u, &cfg, Some(&cal))?;
        Ok((energy_identity_residual(&tr)?, tr.initial().energy))
    };
    let (coarse, e0) = residual(1e-3)?;
    let (fine, _) = residual(5e-4)?;
    c.at_most("residual / E(u0) at dt = 1e-3", coarse / e0, 1e-2);
    c.at_least("halving ratio", coarse / fine, 1.8);
    Ok(())
}

fn contraction(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(64))?;
    let cal = o.calibration(g)?;
    let u = perturbed(0.3, o.seed, g.len())?;
    let dynamics = Dynamics::new(g, Some(&cal))?;
    let cfg = FlowConfig { dt: 1e-2, picard_max_iters: 20, picard_tol: 1e-8, ..FlowConfig::default() };
    let slabs = [0.1, 0.4, 1.6]
        .iter()
        .map(|&t| picard_slab(&dynamics, &u, t, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let first = &slabs[0];
    c.holds(
        "iterations at T = 0.1",
        first.iterations as f64,
        "converged within 20",
        first.status == PicardStatus::Converged && first.iterations <= 20,
    );
    c.at_most("max ratio at T = 0.1", first.max_ratio(), 1.0 - 1e-12);
    let ratios: Vec<f64> = slabs.iter().map(|s| s.max_ratio()).collect();
    c.holds("max ratio at T = 0.4", ratios[1], "> ratio at T = 0.1", ratios[1] > ratios[0]);
    c.holds("max ratio at T = 1.6", ratios[2], "> ratio at T = 0.4", ratios[2] > ratios[1]);
    Ok(())
}

fn conservation(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(256))?;
    let u = make_initial(&InitialDataSpec::great_circle(1, 3), g)?;
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in i + 1..3 {
            let omega = shatah_current(&u, i, j)?.kernel;
            for k in 1..=16 {
                let kf = k as f64;
                for phi in [Field::scalar(g, |x| (kf * x).cos()), Field::scalar(g, |x| (kf * x).sin())] {
                    let pair = frac_div_pair(&omega, &phi)?.abs();
                    worst = worst.max(pair / sobolev_norm(&phi, 0.5, false)?);
                }
            }
        }
    }
    c.at_most("max |pairing| / |phi|_H1/2", worst, 1e-3);
    Ok(())
}

fn divfree(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(o.m(256))?;
    let u = perturbed(0.3, o.seed, g.len())?;
    let omega = shatah_current(&u, 0, 1)?.kernel;
    let mut defects = 0.0f64;
    let mut dists = Vec::new();
    for delta in [0.5, 0.25, 0.1] {
        let corr = divfree_correction(&omega, delta)?;
        defects = defects.max(divergence_defect(&corr.corrected, g.len() / 8)?);
        dists.push(l2od_norm(&corr.corrected.sub(&omega)?));
    }
    c.at_most("max divergence defect", defects, 1e-6);
    c.holds("distance at delta = 0.25", dists[1], "< distance at 0.5", dists[1] < dists[0]);
    c.holds("distance at delta = 0.1", dists[2], "< distance at 0.25", dists[2] < dists[1]);
    Ok(())
}

fn compensation(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let coarse = wente_ensemble(grid(256)?, 100, 4, 0.1, o.seed)?;
    let fine = wente_ensemble(grid(512)?, 100, 4, 0.1, o.seed)?;
    c.holds("max ratio at M = 256", coarse.max_ratio, "finite", coarse.max_ratio.is_finite());
    c.at_most(
        "relative change 256 -> 512",
        (fine.max_ratio - coarse.max_ratio).abs() / coarse.max_ratio,
        0.2,
    );
    Ok(())
}

/// Inverse stereographic projection of the line: the degree-one bubble.
pub fn line_bubble(line: LineGrid) -> Result<Field> {
    Field::from_fn(line, 2, |x| {
        let d = 1.0 + x * x;
        vec![2.0 * x / d, (x * x - 1.0) / d]
    })
}

/// `(L, M)` refinement triple of the bubble residual check.
pub const BUBBLE_TRIPLE: [(f64, usize); 3] = [(12.5, 512), (25.0, 1024), (50.0, 2048)];

fn bubble(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let cal = o.calibration(grid(256)?)?;
    let residuals = BUBBLE_TRIPLE
        .iter()
        .map(|&(l, m)| bubble_residual(&line_bubble(LineGrid::new(l, m)?)?, &cal))
        .collect::<Result<Vec<_>>>()?;
    c.at_most("residual at L = 50, M = 2048", residuals[2], 5e-2);
    c.holds("residual at L = 25, M = 1024", residuals[1], "< coarser", residuals[1] < residuals[0]);
    c.holds("residual at L = 50, M = 2048", residuals[2], "< coarser", residuals[2] < residuals[1]);
    Ok(())
}

fn concentration(_: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(1024)?;
    let x0 = 1.0;
    let states = [0.5, 0.1, 0.02]
        .iter()
        .enumerate()
        .map(|(i, &l)| FlowState::new(i as f64, make_initial(&InitialDataSpec::bubble_pullback(l, x0, 3), g)?))
        .collect::<Result<Vec<_>>>()?;
    let trace = FlowTrace::from_states(states, FlowStatus::Completed)?;
    let radii = [0.01, 0.02, 0.04];
    let rep = concentration_scan(&trace, &radii, 0.05)?;
    let last = &trace.last().u;
    for r in radii {
        let best = rep
            .flagged_points
            .iter()
            .filter(|p| p.radius == r)
            .map(|p| (chordal_distance(p.x, x0), p.x))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        c.at_most(&format!("flag distance at R = {r}"), best.0, g.spacing());
        let gag = if best.0.is_finite() { prop1_check(last, best.1, r, 1)?.gagliardo } else { 0.0 };
        c.holds(&format!("Gagliardo mass at R = {r}"), gag, "> 0", gag > 0.0);
    }
    Ok(())
}

fn inequalities(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let radius = 0.25;
    let ensemble = |m: usize| -> Result<(f64, f64)> {
        let g = grid(m)?;
        let cal = o.calibration(g)?;
        let cfg = FlowConfig { dt: 1e-3, t_end: 1.0, snapshot_stride: 10, ..FlowConfig::default() };
        let out = (0..5u64)
            .into_par_iter()
            .map(|i| {
                let tr = run_flow(&perturbed(0.3, o.seed.wrapping_add(i), m)?, &cfg, Some(&cal))?;
                Ok((struwe_l4_report(&tr, radius)?, h1_bound_report(&tr, radius)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(out.iter().fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1))))
    };
    let (s64, h64) = ensemble(64)?;
    let (s128, h128) = ensemble(128)?;
    c.holds("max L4 ratio", s128, "finite", s128.is_finite());
    c.holds("max H1 ratio", h128, "finite", h128.is_finite());
    c.at_most("L4 ratio change 64 -> 128", (s128 - s64).abs() / s64, 0.3);
    c.at_most("H1 ratio change 64 -> 128", (h128 - h64).abs() / h64, 0.3);
    Ok(())
}

fn variational(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let u0 = perturbed(0.1, o.seed, o.m(32))?;
    let cfg = MinimizeConfig::with_eps(0.1);
    let min = minimize(&u0, &cfg)?;
    let bound = 2.0 * cfg.eps * static_energy(&u0, 0.5, 2.0)?;
    c.at_most("minimizer energy / static bound", min.energy.total / bound, 1.0 + 1e-3);
    let v = time_rescale(&min.field, cfg.eps, Direction::ToV)?;
    c.at_most("monotonicity residual", monotonicity_check(&v, cfg.eps)?, 0.1);
    let sweep = epsilon_sweep(&u0, &[0.2, 0.1, 0.05, 0.025], &cfg)?;
    c.within("sweep slope", sweep.slope.unwrap_or(f64::NAN), 0.7, 1.3);
    Ok(())
}

fn gluing(o: &AcceptOptions, c: &mut Checks) -> Result<()> {
    let g = grid(256)?;
    let cal = o.calibration(g)?;
    let u = make_initial(&InitialDataSpec::bubble_pullback(0.05, 1.0, 3), g)?;
    let e0 = half_energy(&u)?;
    let base = FlowConfig { dt: 1e-3, snapshot_stride: 10, ..FlowConfig::default() };
    let ceil_bound = (e0 / base.thresholds.eps0).ceil();
    c.at_most("restart bound", restart_bound(e0, base.thresholds.eps0) as f64, ceil_bound);

    // short horizon: a few restarts, then completion
    let short = FlowConfig { t_end: 0.05, ..base.clone() };
    let first = run_flow(&u, &short, Some(&cal))?;
    c.holds("first run status", 0.0, "concentration detected", first.status == FlowStatus::ConcentrationDetected);
    let glued = glue_continue(&first, &short, Some(&cal))?;
    c.at_most("restarts (short horizon)", glued.junctions.len() as f64, ceil_bound);
    let min_drop = glued.junctions.iter().map(|j| j.drop).fold(f64::INFINITY, f64::min);
    c.at_least("min junction energy drop", min_drop, -base.thresholds.quad_tol);

    // long horizon: the budget is exhausted and enforced
    let long = FlowConfig { t_end: 1.0, ..base };
    let first = run_flow(&u, &long, Some(&cal))?;
    match glue_continue(&first, &long, Some(&cal)) {
        Err(Error::RestartLimit { restarts, bound }) => {
            c.at_most("restarts performed (long horizon)", (restarts - 1) as f64, ceil_bound);
            c.holds("enforced bound", bound as f64, "limit error raised", true);
        }
        Ok(tr) => c.at_most("restarts (long horizon)", tr.junctions.len() as f64, ceil_bound),
        Err(e) => return Err(e),
    }
    Ok(())
}
