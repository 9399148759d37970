//! Rescaling at a concentration point and the half-harmonic map residual
//! on the line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{Field, SPHERE_TOL};
use crate::flow::FlowTrace;
use crate::frac::Calibration;
use crate::grid::{Grid, LineGrid};
use crate::spectral::evaluate_at;

/// The odd map `φ_R: ℝ → (−π, π)`: slope `R²` on `|x| ≤ a = 2^N / R`, then
/// `b + c·arctan(R²(x − a)/c)` with `b = 2^N R` and `c = 2(π − b)/π`, which
/// is `C¹` at `a`, has slope at most `R²` and tends to `π`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiR {
    pub r: f64,
    pub n: u32,
    /// End of the linear zone.
    pub a: f64,
    /// `φ_R(a)`.
    pub b: f64,
    /// Arctan amplitude.
    pub c: f64,
    pub profile: String,
}

impl PhiR {
    pub fn new(r: f64, n: u32) -> Result<Self> {
        let scale = 2f64.powi(n as i32);
        let b = r * scale;
        if !(r > 0.0 && b < PI / 2.0) {
            return Err(invalid(format!("φ_R needs R > 0 and R·2^N < π/2, got R = {r}, N = {n}")));
        }
        Ok(Self { r, n, a: scale / r, b, c: 2.0 * (PI - b) / PI, profile: "arctan".into() })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = x.signum();
        let ax = x.abs();
        if ax <= self.a {
            self.r * self.r * x
        } else {
            s * (self.b + self.c * (self.r * self.r * (ax - self.a) / self.c).atan())
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let ax = x.abs();
        let r2 = self.r * self.r;
        if ax <= self.a {
            r2
        } else {
            let z = r2 * (ax - self.a) / self.c;
            r2 / (1.0 + z * z)
        }
    }
}

/// Builds `φ_R`; see [`PhiR`].
pub fn build_phi_r(r: f64, n: u32) -> Result<PhiR> {
    PhiR::new(r, n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleExtract {
    pub center: f64,
    pub scale: f64,
    pub time: f64,
    pub gamma: f64,
    pub phi: PhiR,
    /// `u(t_n, x_n + φ_R(x))` on the line grid, projected to the sphere.
    pub line_field: Field,
    /// Distance from the sphere before projection (interpolation error).
    pub interpolation_drift: f64,
    pub residual_l2: f64,
    /// `∫∫_{[−L, L]²} |v(x) − v(y)|² / |x − y|²`.
    pub bubble_energy: f64,
}

/// Snapshot field at time `t`, linear in time between snapshots.
pub fn field_at(trace: &FlowTrace, t: f64) -> Result<Field> {
    let (start, end) = (trace.initial().t, trace.last().t);
    if !(t >= start && t <= end) {
        return Err(Error::OutOfRange { t, start, end });
    }
    let states = &trace.states;
    let i = states.partition_point(|s| s.t <= t);
    if i == 0 {
        return Ok(states[0].u.clone());
    }
    if i == states.len() {
        return Ok(states[i - 1].u.clone());
    }
    let (a, b) = (&states[i - 1], &states[i]);
    let th = (t - a.t) / (b.t - a.t);
    a.u.lin_comb(1.0 - th, &b.u, th)
}

/// Samples `u_n(0, x) = u(t_n, x_n + φ_{R_n}(x))` on `line`.
#[allow(clippy::too_many_arguments)]
pub fn rescale_extract(
    trace: &FlowTrace,
    t_n: f64,
    x_n: f64,
    r_n: f64,
    gamma: f64,
    line: LineGrid,
    n: u32,
    cal: &Calibration,
) -> Result<BubbleExtract> {
    if !(gamma >= 0.0) {
        return Err(invalid(format!("look-back γ must be nonnegative, got {gamma}")));
    }
    let phi = PhiR::new(r_n, n)?;
    let (start, end) = (trace.initial().t, trace.last().t);
    let back = t_n - gamma * r_n * r_n;
    if back < start || t_n > end {
        return Err(Error::OutOfRange { t: back.min(t_n), start, end });
    }
    let u = field_at(trace, t_n)?;
    let points: Vec<f64> = line.nodes().iter().map(|&x| x_n + phi.eval(x)).collect();
    let samples = evaluate_at(&u, &points)?;
    let raw = Field::new(line, u.dim(), samples.into_iter().flatten().collect())?;
    let interpolation_drift = raw.sphere_drift();
    let line_field = crate::flow::reproject(&raw)?;
    let residual_l2 = bubble_residual(&line_field, cal)?;
    let bubble_energy = line_gagliardo(&line_field)?;
    Ok(BubbleExtract {
        center: x_n,
        scale: r_n,
        time: t_n,
        gamma,
        phi,
        line_field,
        interpolation_drift,
        residual_l2,
        bubble_energy,
    })
}

fn line_grid(v: &Field) -> Result<LineGrid> {
    match v.grid() {
        Grid::Line(l) => Ok(l),
        Grid::Circle(_) => Err(invalid("expected a field on a line grid")),
    }
}

struct LineQuadrature {
    /// `P.V.∫ (v(x) − v(y)) / |x − y|² dy` per node, row-major `M × n`.
    pv: Vec<f64>,
    /// `∫ |v(x) − v(y)|² / |x − y|² dy` per node, without the frozen tails.
    dens_inner: Vec<f64>,
    /// Tail contributions to the density.
    dens_tail: Vec<f64>,
}

/// Nodal quadrature over `[x_0 − h/2, x_{M−1} + h/2]`: off-diagonal nodes
/// with weight `h`, the diagonal cell from the Taylor expansion
/// (`−v''h/2` for the principal value, `|v'|²h` for the density), and the
/// analytic tails for `v` frozen at its end values.
fn line_quadrature(v: &Field) -> Result<LineQuadrature> {
    let line = line_grid(v)?;
    let m = line.len();
    let n = v.dim();
    let h = line.spacing();
    let x = line.nodes();
    let vals = v.values();
    let at = |j: usize, c: usize| vals[j * n + c];
    let (left, right) = (x[0] - 0.5 * h, x[m - 1] + 0.5 * h);
    let mut pv = vec![0.0; m * n];
    let mut dens_inner = vec![0.0; m];
    let mut dens_tail = vec![0.0; m];
    use rayon::prelude::*;
    pv.par_chunks_mut(n)
        .zip(dens_inner.par_iter_mut())
        .zip(dens_tail.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((pv_i, di), dt))| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(m - 1));
            for j in 0..m {
                if j == i {
                    continue;
                }
                let w = h / ((x[i] - x[j]) * (x[i] - x[j]));
                let mut d2 = 0.0;
                for c in 0..n {
                    let d = at(i, c) - at(j, c);
                    pv_i[c] += w * d;
                    d2 += d * d;
                }
                *di += w * d2;
            }
            let mut grad2 = 0.0;
            for c in 0..n {
                let (d1, d2) = if lo < i && hi > i {
                    (
                        (at(hi, c) - at(lo, c)) / (2.0 * h),
                        (at(hi, c) - 2.0 * at(i, c) + at(lo, c)) / (h * h),
                    )
                } else {
                    ((at(hi, c) - at(lo, c)) / ((hi - lo) as f64 * h), 0.0)
                };
                pv_i[c] -= 0.5 * h * d2;
                grad2 += d1 * d1;
                let (dl, dr) = (at(i, c) - at(0, c), at(i, c) - at(m - 1, c));
                pv_i[c] += dl / (x[i] - left) + dr / (right - x[i]);
                *dt += dl * dl / (x[i] - left) + dr * dr / (right - x[i]);
            }
            *di += grad2 * h;
        });
    Ok(LineQuadrature { pv, dens_inner, dens_tail })
}

/// `‖(-Δ)^{1/2} v − κ v |d_{1/2} v|²‖_{L²([−L/2, L/2])}` with
/// `(-Δ)^{1/2} = C_pv · P.V.∫` on the line. Beyond `[−L, L]` the field is
/// frozen at its end values.
pub fn bubble_residual(v: &Field, cal: &Calibration) -> Result<f64> {
    let line = line_grid(v)?;
    v.certify_on_sphere(SPHERE_TOL)?;
    let q = line_quadrature(v)?;
    let n = v.dim();
    let h = line.spacing();
    let half = 0.5 * line.half_width();
    let mut acc = 0.0;
    for (i, x) in line.nodes().into_iter().enumerate() {
        if x.abs() > half {
            continue;
        }
        let dens = q.dens_inner[i] + q.dens_tail[i];
        for c in 0..n {
            let r = cal.c_pv * q.pv[i * n + c] - cal.nonlinearity_scale * v.get(i, c) * dens;
            acc += r * r;
        }
    }
    Ok((h * acc).sqrt())
}

/// `∫∫_{[−L, L]²} |v(x) − v(y)|² / |x − y|² dy dx`.
pub fn line_gagliardo(v: &Field) -> Result<f64> {
    let line = line_grid(v)?;
    let q = line_quadrature(v)?;
    Ok(line.spacing() * q.dens_inner.iter().sum::<f64>())
}
