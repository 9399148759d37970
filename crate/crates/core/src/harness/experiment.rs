//! Experiment orchestration: one output directory per run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::bubbling::{
    concentration_scan, glue_continue, h1_bound_report, restart_bound, rescale_extract,
    struwe_l4_report,
};
use crate::error::{Error, Result};

use crate::flow::{energy_identity_residual, run_flow, FlowConfig, FlowStatus, Integrator};
use crate::frac::{
    calibrate, divergence_defect, divfree_correction, wente_check, Calibration,
    OffDiagKernel, ThresholdConfig,
};
use crate::grid::{chordal_distance, CircleGrid, LineGrid};
use crate::harness::acceptance::{acceptance_suite, AcceptOptions};
use crate::harness::config::{Command, ExperimentConfig};
use crate::harness::initial::{eval_trig, make_initial, random_trig, trig_coeffs, InitialDataSpec};
use crate::harness::io::{field_csv_named, fmt_f64, read_json, read_trace, write_json, write_trace, Csv};
use crate::variational::{
    diagnostics_ire, el_residual, epsilon_sweep, minimize, monotonicity_check, static_energy,
    time_dilate, time_rescale, Direction, MinimizeConfig, SpaceTimeField,
};

/// Files written by a run, relative to its output directory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub command: Command,
    pub out: PathBuf,
    pub artifacts: Vec<String>,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    artifacts: Vec<String>,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.cfg.out.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        write_json(&p, value)
    }

    fn csv(&mut self, name: &str, csv: &Csv) -> Result<()> {
        let p = self.path(name);
        csv.write(&p)
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        Ok(fs::write(p, text)?)
    }
}

/// Runs `cfg.command`, writing into `cfg.out` the artifacts, the resolved
/// configuration (`config.resolved`) and the calibration record used
/// (`calibration.json`, absent only for `accept`, which calibrates per
/// criterion).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    fs::create_dir_all(&cfg.out)?;
    let mut run = Run { cfg, artifacts: Vec::new() };
    run.text("config.resolved", &cfg.resolved())?;
    match cfg.command {
        Command::Calibrate => {
            let cal = calibrate(circle_grid(cfg)?)?;
            run.json("calibration.json", &cal)?;
        }
        Command::Flow => flow(&mut run)?,
        Command::Scan => scan(&mut run)?,
        Command::Bubble => bubble(&mut run)?,
        Command::Variational => variational(&mut run)?,
        Command::Wente => wente(&mut run)?,
        Command::Accept => accept(&mut run)?,
    }
    Ok(RunSummary { command: cfg.command, out: cfg.out.clone(), artifacts: run.artifacts })
}

fn circle_grid(cfg: &ExperimentConfig) -> Result<CircleGrid> {
    CircleGrid::new(cfg.get("M")?)
}

/// Initial data from the `initial*` keys; noise kinds use the run seed.
pub fn initial_spec(cfg: &ExperimentConfig) -> Result<InitialDataSpec> {
    let n: usize = cfg.get("n")?;
    let amplitude: f64 = cfg.get("initial_amplitude")?;
    Ok(match cfg.raw("initial")? {
        "constant" => InitialDataSpec::constant(n),
        "great_circle" => InitialDataSpec::great_circle(cfg.get("initial_k")?, n),
        "bubble_pullback" => {
            InitialDataSpec::bubble_pullback(cfg.get("initial_lambda")?, cfg.get("initial_x0")?, n)
        }
        "bandlimited_noise" => {
            InitialDataSpec::bandlimited_noise(amplitude, cfg.get("initial_max_mode")?, cfg.seed, n)
        }
        "perturbed_constant" => InitialDataSpec::perturbed_constant(amplitude, cfg.seed, n),
        other => return Err(Error::Config(format!("unknown initial data kind `{other}`"))),
    })
}

pub fn flow_config(cfg: &ExperimentConfig) -> Result<FlowConfig> {
    let integrator = match cfg.raw("integrator")? {
        "exp_euler" => Integrator::ExpEuler,
        "picard" => Integrator::Picard,
        other => return Err(Error::Config(format!("unknown integrator `{other}`"))),
    };
    let picard_tol = cfg.get("picard_tol")?;
    let fc = FlowConfig {
        dt: cfg.get("dt")?,
        t_end: cfg.get("t_end")?,
        picard_max_iters: cfg.get("picard_max_iters")?,
        picard_tol,
        reproject: cfg.get("reproject")?,
        integrator,
        slab_length: cfg.get("slab_length")?,
        thresholds: ThresholdConfig {
            eps1: cfg.get("eps1")?,
            eps0: cfg.get("eps0")?,
            sphere_tol: cfg.get("sphere_tol")?,
            picard_tol,
            quad_tol: cfg.get("quad_tol")?,
        },
        scan_radii: cfg.list("scan_radii")?,
        snapshot_stride: cfg.get("snapshot_stride")?,
        nonlinear: cfg.get("nonlinear")?,
    };
    fc.validate()?;
    Ok(fc)
}

fn plot_script(lines: &[&str]) -> String {
    let mut s = String::from("# gnuplot-style commands over the emitted CSV files\nset datafile separator ','\nset key autotitle columnhead\n");
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s
}

fn flow(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let grid = circle_grid(cfg)?;
    let cal = calibrate(grid)?;
    run.json("calibration.json", &cal)?;
    let fc = flow_config(cfg)?;
    let u0 = make_initial(&initial_spec(cfg)?, grid)?;
    let mut trace = run_flow(&u0, &fc, Some(&cal))?;
    if cfg.get::<bool>("glue")? && trace.status == FlowStatus::ConcentrationDetected {
        trace = glue_continue(&trace, &fc, Some(&cal))?;
    }
    for (i, _) in trace.states.iter().enumerate() {
        run.artifacts.push(crate::harness::io::snapshot_name(i));
    }
    run.artifacts.push("trace.csv".into());
    write_trace(&cfg.out, &trace)?;
    let residual = if trace.states.len() >= 2 { Some(energy_identity_residual(&trace)?) } else { None };
    run.json(
        "report.json",
        &json!({
            "status": trace.status,
            "message": trace.message,
            "steps": trace.steps,
            "snapshots": trace.states.len(),
            "t_final": trace.last().t,
            "initial_energy": trace.initial().energy,
            "final_energy": trace.last().energy,
            "max_energy_increase": trace.max_energy_increase,
            "energy_identity_residual": residual,
            "restart_bound": restart_bound(trace.initial().energy, fc.thresholds.eps0),
            "junctions": trace.junctions,
        }),
    )?;
    let rep = concentration_scan(&trace, &fc.scan_radii, fc.thresholds.eps1)?;
    run.json("concentration.json", &rep)?;
    let last = crate::harness::io::snapshot_name(trace.states.len() - 1);
    run.text(
        "plot.gp",
        &plot_script(&[
            "set multiplot layout 2,1",
            "plot 'trace.csv' using 1:2 with lines title 'energy', '' using 1:3 with lines title 'dtu_l2'",
            &format!("plot '{last}' using 1:2 with lines, '' using 1:3 with lines"),
            "unset multiplot",
        ]),
    )?;
    Ok(())
}

fn trace_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let t = cfg.raw("trace")?;
    if t.is_empty() {
        return Err(Error::Config("no trace directory given (`trace` key or --trace)".into()));
    }
    Ok(PathBuf::from(t))
}

/// The calibration stored next to a trace, or a fresh one at its grid.
fn trace_calibration(dir: &Path, grid: CircleGrid) -> Result<Calibration> {
    match read_json(&dir.join("calibration.json")) {
        Ok(v) => {
            let cal: Calibration = serde_json::from_value(v)?;
            if cal.m != grid.len() {
                return Err(Error::Mismatch(format!("calibration for M = {} but trace has M = {}", cal.m, grid.len())));
            }
            Ok(cal)
        }
        Err(_) => calibrate(grid),
    }
}

fn scan(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let dir = trace_dir(cfg)?;
    let trace = read_trace(&dir)?;
    let grid = trace.initial().u.circle_grid()?;
    let cal = trace_calibration(&dir, grid)?;
    run.json("calibration.json", &cal)?;
    let rep = concentration_scan(&trace, &cfg.list("radii")?, cfg.get("eps1")?)?;
    run.json("concentration.json", &rep)?;
    let r: f64 = cfg.get("report_radius")?;
    let (struwe, h1) = if trace.states.len() >= 2 {
        (Some(struwe_l4_report(&trace, r)?), Some(h1_bound_report(&trace, r)?))
    } else {
        (None, None)
    };
    run.json("inequalities.json", &json!({ "radius": r, "struwe_l4": struwe, "h1_bound": h1 }))?;
    let mut csv = Csv::new(&["t", "radius", "eps_r"]);
    for (s, peaks) in rep.times.iter().zip(&rep.peaks) {
        for (r, p) in rep.radii.iter().zip(peaks) {
            csv.row(&[*s, *r, p.energy]);
        }
    }
    run.csv("scan.csv", &csv)?;
    run.text("plot.gp", &plot_script(&["plot 'scan.csv' using 1:3:2 with points palette title 'sup E_R'"]))?;
    Ok(())
}

fn bubble(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let dir = trace_dir(cfg)?;
    let trace = read_trace(&dir)?;
    let grid = trace.initial().u.circle_grid()?;
    let cal = trace_calibration(&dir, grid)?;
    run.json("calibration.json", &cal)?;
    let at = cfg.list("at")?;
    let [t, x, r] = at[..] else {
        return Err(Error::Config(format!("`at` must be t,x,R, got {} values", at.len())));
    };
    let line = LineGrid::new(cfg.get("L")?, cfg.get("line_M")?)?;
    let ex = rescale_extract(&trace, t, x, r, cfg.get("gamma")?, line, cfg.get("N")?, &cal)?;
    run.csv("bubble.csv", &field_csv_named(&ex.line_field, "v"))?;
    run.json(
        "bubble_report.json",
        &json!({
            "center": ex.center,
            "scale": ex.scale,
            "time": ex.time,
            "gamma": ex.gamma,
            "phi": ex.phi,
            "interpolation_drift": ex.interpolation_drift,
            "residual_l2": ex.residual_l2,
            "bubble_energy": ex.bubble_energy,
            "line": { "L": line.half_width(), "M": line.len() },
        }),
    )?;
    run.text("plot.gp", &plot_script(&["plot 'bubble.csv' using 1:2 with lines, '' using 1:3 with lines"]))?;
    Ok(())
}

fn minimize_config(cfg: &ExperimentConfig) -> Result<MinimizeConfig> {
    let mc = MinimizeConfig {
        eps: cfg.get("eps")?,
        s: cfg.get("s")?,
        p: cfg.get("p")?,
        max_iters: cfg.get("max_iters")?,
        tol: cfg.get("tol")?,
        horizon: cfg.get("horizon")?,
        steps_per_eps: cfg.get("steps_per_eps")?,
        ..MinimizeConfig::default()
    };
    mc.validate()?;
    Ok(mc)
}

fn variational(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let grid = circle_grid(cfg)?;
    let cal = calibrate(grid)?;
    run.json("calibration.json", &cal)?;
    let mc = minimize_config(cfg)?;
    let u0 = make_initial(&initial_spec(cfg)?, grid)?;
    let min = minimize(&u0, &mc)?;
    let field = &min.field;
    let n = u0.dim();

    let mut header = vec!["t".to_string(), "x".to_string()];
    header.extend((1..=n).map(|c| format!("u_{c}")));
    let mut csv = Csv::new(&header);
    let nodes = grid.nodes();
    for (t, u) in field.times().iter().zip(field.slices()) {
        for (j, x) in nodes.iter().enumerate() {
            let mut row = vec![*t, *x];
            row.extend_from_slice(u.row(j));
            csv.row(&row);
        }
    }
    run.csv("minimizer.csv", &csv)?;

    let bound = 2.0 * mc.eps * static_energy(&u0, mc.s, mc.p)?;
    let standard = mc.s == 0.5 && mc.p == 2.0;
    let mut diagnostics = json!(null);
    if standard {
        let v = time_rescale(field, mc.eps, Direction::ToV)?;
        let ire = diagnostics_ire(&v, mc.eps)?;
        let mut csv = Csv::new(&["t", "I", "R", "E"]);
        for m in 0..ire.times.len() {
            csv.row(&[ire.times[m], ire.i[m], ire.r[m], ire.e[m]]);
        }
        run.csv("ire.csv", &csv)?;
        let start = SpaceTimeField::constant_in_time(&u0, mc.dt(), mc.steps())?;
        diagnostics = json!({
            "el_residual": el_residual(field, mc.eps)?,
            "el_residual_static": el_residual(&start, mc.eps)?,
            "monotonicity": monotonicity_check(&v, mc.eps)?,
            "monotonicity_slowed_path": monotonicity_check(&time_dilate(&v, 2.0)?, mc.eps)?,
        });
    }
    let eps_list = cfg.list("sweep")?;
    let sweep = if eps_list.is_empty() || !standard {
        None
    } else {
        let table = epsilon_sweep(&u0, &eps_list, &mc)?;
        let mut csv = Csv::new(&["eps", "dtv_sq"]);
        for r in &table.rows {
            csv.row(&[r.eps, r.dtv_sq]);
        }
        match (table.slope, table.intercept) {
            (Some(s), Some(i)) => csv.footer(&format!("slope={},intercept={}", fmt_f64(s), fmt_f64(i))),
            _ => csv.footer("slope=undefined"),
        }
        run.csv("sweep.csv", &csv)?;
        Some(table)
    };
    run.json(
        "variational_report.json",
        &json!({
            "eps": mc.eps, "s": mc.s, "p": mc.p,
            "time_step": mc.dt(), "time_steps": mc.steps(),
            "energy": min.energy,
            "static_bound": bound,
            "iterations": min.iterations,
            "status": min.status,
            "history": min.history,
            "max_sphere_drift": field.max_sphere_drift(),
            "diagnostics": diagnostics,
            "sweep": sweep,
        }),
    )?;
    let mut plots = vec!["plot 'ire.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines"];
    if sweep.is_some() {
        plots.push("set logscale xy");
        plots.push("plot 'sweep.csv' using 1:2 with linespoints");
    }
    run.text("plot.gp", &plot_script(&plots))?;
    Ok(())
}

/// Outcome of [`wente_ensemble`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WenteEnsemble {
    pub ratios: Vec<f64>,
    pub defects: Vec<f64>,
    pub max_ratio: f64,
}

/// Random divergence-free pairs: `Ω(x, y) = b(x)(a(x) − a(y))/|x − y|^{1/2}`
/// for seeded trigonometric `a, b`, made divergence free by
/// [`divfree_correction`] with cutoff `delta`, tested against a seeded
/// trigonometric `g`. The random functions do not depend on `M`.
pub fn wente_ensemble(grid: CircleGrid, pairs: usize, max_mode: usize, delta: f64, seed: u64) -> Result<WenteEnsemble> {
    let mut ratios = Vec::with_capacity(pairs);
    let mut defects = Vec::with_capacity(pairs);
    for k in 0..pairs as u64 {
        let base = seed.wrapping_mul(1_000_003).wrapping_add(3 * k);
        let a = trig_coeffs(max_mode, base);
        let b = trig_coeffs(max_mode, base + 1);
        let omega = OffDiagKernel::from_fn(grid, 1, 0.5, false, |x, y, out| {
            out[0] = eval_trig(&b, x) * (eval_trig(&a, x) - eval_trig(&a, y)) / chordal_distance(x, y).sqrt();
        })?;
        let f = divfree_correction(&omega, delta)?.corrected;
        defects.push(divergence_defect(&f, (grid.len() / 8).max(1))?);
        let g = random_trig(grid, max_mode, base + 2);
        ratios.push(wente_check(&f, &g)?);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(WenteEnsemble { ratios, defects, max_ratio })
}

fn wente(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let grid = circle_grid(cfg)?;
    let cal = calibrate(grid)?;
    run.json("calibration.json", &cal)?;
    let ens = wente_ensemble(grid, cfg.get("pairs")?, cfg.get("max_mode")?, cfg.get("delta")?, cfg.seed)?;
    let mut csv = Csv::new(&["pair", "ratio", "defect"]);
    for (i, (r, d)) in ens.ratios.iter().zip(&ens.defects).enumerate() {
        csv.row(&[i as f64, *r, *d]);
    }
    run.csv("wente.csv", &csv)?;
    run.json("wente_report.json", &ens)?;
    run.text("plot.gp", &plot_script(&["plot 'wente.csv' using 1:2 with points"]))?;
    Ok(())
}

fn accept(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let criteria = match cfg.raw("criteria")? {
        "all" => None,
        _ => Some(cfg.list("criteria")?.into_iter().map(|c| c as u32).collect()),
    };
    let opts = AcceptOptions {
        resolution: cfg.get("M")?,
        c_half_factor: cfg.get("c_half_factor")?,
        criteria,
        seed: cfg.seed,
    };
    let report = acceptance_suite(&opts)?;
    run.text("acceptance.txt", &report.table())?;
    run.json("acceptance.json", &report)?;
    let failed = report.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::AcceptanceFailed(failed))
    }
}

