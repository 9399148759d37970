//! Conservation-law currents, the divergence-free gauge correction and the
//! compensated (Wente-type) pairing.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, SPHERE_TOL};
use crate::frac::kernel::{d_s, divergence, offset_values, pairing, l2od_norm, OffDiagKernel};
use crate::grid::{chordal_distance, CircleGrid};
use crate::spectral::{apply_multiplier, require_circle, sobolev_norm};

/// Divergence tolerance below which a kernel counts as divergence free.
pub const DIVFREE_TOL: f64 = 1e-6;

/// `div_{1/2} d_{1/2} = 2π (-Δ)^{1/2}` on the discrete pair grid.
pub const DIV_GRAD_FACTOR: f64 = 2.0 * PI;

/// Result of [`shatah_current`].
#[derive(Clone, Debug)]
pub struct ShatahCurrent {
    pub kernel: OffDiagKernel,
    /// Set when the input was not certified on the sphere; the kernel is
    /// still computed, but carries no conservation law.
    pub off_sphere: bool,
    pub drift: f64,
}

/// `Ω_ij = u_i(x) d_{1/2} u_j(x, y) − u_j(x) d_{1/2} u_i(x, y)`.
///
/// For `(-Δ)^{1/2} u = κ u |d_{1/2} u|² + f`,
/// `⟨div_{1/2} Ω_ij, φ⟩ = 2π ∫ (u_i f_j − u_j f_i) φ dx`.
pub fn shatah_current(u: &Field, i: usize, j: usize) -> Result<ShatahCurrent> {
    let grid = require_circle(u)?;
    let n = u.dim();
    if i >= n || j >= n {
        return Err(invalid(format!("component index out of range for dimension {n}")));
    }
    let drift = u.sphere_drift();
    let d = d_s(u, 0.5)?;
    let m = grid.len();
    let src = u.values();
    let mut values = vec![0.0; m * m];
    values.par_chunks_mut(m).enumerate().for_each(|(x, row)| {
        let (ui, uj) = (src[x * n + i], src[x * n + j]);
        for (k, out) in row.iter_mut().enumerate() {
            let p = d.pair(x, k);
            *out = ui * p[j] - uj * p[i];
        }
    });
    Ok(ShatahCurrent {
        kernel: OffDiagKernel::from_raw(grid, 1, 0.5, false, values),
        off_sphere: drift > SPHERE_TOL,
        drift,
    })
}

/// Solves `(-Δ)^{1/2} ψ = g − mean(g)` with `ψ` of zero mean. Returns
/// `ψ` and the removed mean.
pub fn solve_half_poisson(g: &Field) -> Result<(Field, f64)> {
    let grid = require_circle(g)?;
    if g.dim() != 1 {
        return Err(Error::Mismatch("half Poisson problem expects a scalar field".into()));
    }
    let mean = g.values().iter().sum::<f64>() / grid.len() as f64;
    let psi = apply_multiplier(g, |k| if k == 0 { 0.0 } else { 1.0 / k.abs() as f64 })?;
    Ok((psi, mean))
}

/// Largest relative divergence pairing
/// `|⟨div_{1/2} F, φ⟩| / (‖F‖_{L²_od} ‖φ‖_{Ḣ^{1/2}})` over the modes
/// `cos kx, sin kx`, `k = 1..=kmax`, and all kernel components.
pub fn divergence_defect(f: &OffDiagKernel, kmax: usize) -> Result<f64> {
    let norm = l2od_norm(f);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let grid = f.grid();
    let div = divergence(f)?;
    let cols = div.columns();
    let mut worst = 0.0f64;
    for k in 1..=kmax {
        let kf = k as f64;
        for phi in [
            Field::scalar(grid, |x| (kf * x).cos()),
            Field::scalar(grid, |x| (kf * x).sin()),
        ] {
            let pn = sobolev_norm(&phi, 0.5, true)?;
            for col in &cols {
                let pair: f64 = grid.spacing()
                    * col.iter().zip(phi.values()).map(|(a, b)| a * b).sum::<f64>();
                worst = worst.max(pair.abs() / (norm * pn));
            }
        }
    }
    Ok(worst)
}

/// Output of [`divfree_correction`].
#[derive(Clone, Debug)]
pub struct DivFreeCorrection {
    /// `Ω_δ − d_{1/2} h_δ`.
    pub corrected: OffDiagKernel,
    /// The cut kernel `Ω_δ`.
    pub cut: OffDiagKernel,
    /// One gauge potential per kernel component.
    pub potential: Vec<Field>,
}

/// Zeroes `Ω` on pairs closer than `δ`, then removes the divergence of the
/// cut kernel by subtracting `d_{1/2} h_δ` with
/// `(-Δ)^{1/2} h_δ = div_{1/2} Ω_δ` (in the `2π` normalization of the pair grid).
pub fn divfree_correction(omega: &OffDiagKernel, delta: f64) -> Result<DivFreeCorrection> {
    if !(delta > 0.0 && delta < PI) {
        return Err(invalid(format!("cutoff δ must lie in (0, π), got {delta}")));
    }
    if (omega.order() - 0.5).abs() > 1e-12 {
        return Err(invalid("gauge correction is defined for order-1/2 kernels"));
    }
    let grid = omega.grid();
    let cut = omega.cut_diagonal(delta);
    let div = divergence(&cut)?;
    let mut corrected = cut.clone();
    let mut potential = Vec::with_capacity(omega.comps());
    let comps = omega.comps();
    for c in 0..comps {
        let dc = Field::new(grid, 1, div.column(c))?.scale(1.0 / DIV_GRAD_FACTOR);
        let (h, _) = solve_half_poisson(&dc)?;
        let dh = d_s(&h, 0.5)?;
        let target = corrected.values().to_vec();
        let mut values = target;
        for (idx, v) in dh.values().iter().enumerate() {
            values[idx * comps + c] -= v;
        }
        corrected = OffDiagKernel::from_raw(grid, comps, 0.5, false, values);
        potential.push(h);
    }
    Ok(DivFreeCorrection { corrected, cut, potential })
}

/// `T^i(u, v, w) = ½ Σ_k ∫ d_{1/2} u_i d_{1/4} v_k d_{1/4} w_k dy / |x − y|`.
pub fn remainder_t(u: &Field, v: &Field, w: &Field) -> Result<Field> {
    let grid = require_circle(u)?;
    u.check_compatible(v)?;
    u.check_compatible(w)?;
    let m = grid.len();
    let n = u.dim();
    let h = grid.spacing();
    let weights: Vec<f64> = grid.offset_distances().iter().map(|d| 1.0 / (d * d)).collect();
    let (uo, vo, wo) = (offset_values(u)?, offset_values(v)?, offset_values(w)?);
    let (us, vs, ws) = (u.values(), v.values(), w.values());
    let (uo, vo, wo) = (uo.values(), vo.values(), wo.values());
    let mut out = vec![0.0; m * n];
    out.par_chunks_mut(n).enumerate().for_each(|(x, row)| {
        for (k, wk) in weights.iter().enumerate() {
            let y = (x + k) % m;
            let mut vw = 0.0;
            for c in 0..n {
                vw += (vs[x * n + c] - vo[y * n + c]) * (ws[x * n + c] - wo[y * n + c]);
            }
            for (c, r) in row.iter_mut().enumerate() {
                *r += wk * (us[x * n + c] - uo[y * n + c]) * vw;
            }
        }
        row.iter_mut().for_each(|r| *r *= 0.5 * h);
    });
    Field::new(grid, n, out)
}

/// `T(u) = T(u, u, u)`.
pub fn remainder_t_diag(u: &Field) -> Result<Field> {
    remainder_t(u, u, u)
}

/// Compensation ratio
/// `‖F · d_{1/2} g‖_{H^{-1/2}} / (‖F‖_{L²_od} ‖g‖_{Ḣ^{1/2}})` for a
/// divergence-free scalar kernel `F`.
pub fn wente_check(f: &OffDiagKernel, g: &Field) -> Result<f64> {
    if f.comps() != 1 || g.dim() != 1 {
        return Err(Error::Mismatch("Wente pairing expects scalar kernel and field".into()));
    }
    let defect = divergence_defect(f, (f.grid().len() / 8).max(1))?;
    if defect > DIVFREE_TOL {
        return Err(Error::NotDivergenceFree(defect));
    }
    let fnorm = l2od_norm(f);
    let gnorm = sobolev_norm(g, 0.5, true)?;
    if fnorm == 0.0 || gnorm == 0.0 {
        return Ok(0.0);
    }
    let p = pairing(f, &d_s(g, 0.5)?)?;
    Ok(sobolev_norm(&p, -0.5, false)? / (fnorm * gnorm))
}

/// Chordal arc `{x : |x − center| ≤ radius}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub center: f64,
    pub radius: f64,
}

impl Arc {
    pub fn new(center: f64, radius: f64) -> Self {
        Self { center, radius }
    }

    /// The arc covering the whole circle.
    pub fn full() -> Self {
        Self { center: 0.0, radius: 2.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        chordal_distance(x, self.center) <= self.radius
    }
}

/// `∫_A ∫_B |u(x) − u(y)|² / |x − y|² dy dx` by the half-offset rule.
pub fn gagliardo_local(u: &Field, a: Arc, b: Arc) -> Result<f64> {
    let grid: CircleGrid = require_circle(u)?;
    let m = grid.len();
    let n = u.dim();
    let h = grid.spacing();
    let weights: Vec<f64> = grid.offset_distances().iter().map(|d| 1.0 / (d * d)).collect();
    let off = offset_values(u)?;
    let (src, offv) = (u.values(), off.values());
    let in_b: Vec<bool> = (0..m).map(|j| b.contains(grid.node(j) + 0.5 * h)).collect();
    let total: f64 = (0..m)
        .into_par_iter()
        .filter(|&x| a.contains(grid.node(x)))
        .map(|x| {
            let mut acc = 0.0;
            for (k, wk) in weights.iter().enumerate() {
                let y = (x + k) % m;
                if !in_b[y] {
                    continue;
                }
                let mut d2 = 0.0;
                for c in 0..n {
                    let d = src[x * n + c] - offv[y * n + c];
                    d2 += d * d;
                }
                acc += wk * d2;
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(h * h * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::kernel::frac_div_pair;
    use crate::spectral::frac_laplacian;

    fn grid(m: usize) -> CircleGrid {
        CircleGrid::new(m).unwrap()
    }

    fn circle(g: CircleGrid) -> Field {
        Field::from_fn(g, 2, |x| vec![x.cos(), x.sin()]).unwrap()
    }

    #[test]
    fn current_vanishes_on_diagonal_indices() {
        let cur = shatah_current(&circle(grid(32)), 1, 1).unwrap();
        assert!(cur.kernel.values().iter().all(|v| *v == 0.0));
        assert!(!cur.off_sphere);
    }

    #[test]
    fn current_flags_off_sphere_input() {
        let u = circle(grid(32)).scale(1.2);
        assert!(shatah_current(&u, 0, 1).unwrap().off_sphere);
    }

    #[test]
    fn current_conserved_for_circle_map() {
        let g = grid(128);
        let cur = shatah_current(&circle(g), 0, 1).unwrap();
        for k in 1..=16 {
            let phi = Field::scalar(g, |x| (k as f64 * x).cos());
            let pn = sobolev_norm(&phi, 0.5, false).unwrap();
            assert!(frac_div_pair(&cur.kernel, &phi).unwrap().abs() <= 1e-3 * pn);
        }
    }

    #[test]
    fn forced_conservation_identity() {
        // f := (-Δ)^{1/2} u − κ u |d u|² is the defect of a non-harmonic u
        let g = grid(128);
        let u = Field::from_fn(g, 2, |x| {
            let a = x + 0.4 * (2.0 * x).sin();
            vec![a.cos(), a.sin()]
        })
        .unwrap();
        let dens = crate::frac::sq_grad_density(&u).unwrap();
        let nonlin = u.mul_scalar_field(&dens).unwrap().scale(1.0 / (2.0 * PI));
        let f = frac_laplacian(&u, 0.5).unwrap().sub(&nonlin).unwrap();
        let cur = shatah_current(&u, 0, 1).unwrap();
        for k in 0..6 {
            let phi = Field::scalar(g, |x| (k as f64 * x).cos() + 0.3 * x.sin());
            let lhs = frac_div_pair(&cur.kernel, &phi).unwrap();
            let src = Field::scalar(g, |_| 0.0);
            let mut vals = src.into_values();
            for j in 0..g.len() {
                vals[j] = u.get(j, 0) * f.get(j, 1) - u.get(j, 1) * f.get(j, 0);
            }
            let s = Field::new(g, 1, vals).unwrap();
            let rhs = 2.0 * PI * s.dot(&phi).unwrap();
            assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()), "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn half_poisson_inverts_multiplier() {
        let g = grid(64);
        let rhs = Field::scalar(g, |x| (3.0 * x).cos() + 0.5 * (7.0 * x).sin() + 2.0);
        let (psi, mean) = solve_half_poisson(&rhs).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);
        let back = frac_laplacian(&psi, 0.5).unwrap();
        let expect = rhs.map(|v| v - 2.0);
        assert!(back.sub(&expect).unwrap().max_abs() < 1e-12);
        let single = solve_half_poisson(&Field::scalar(g, |x| (4.0 * x).cos())).unwrap().0;
        let exact = Field::scalar(g, |x| (4.0 * x).cos() / 4.0);
        assert!(single.sub(&exact).unwrap().max_abs() < 1e-13);
        let zero = solve_half_poisson(&Field::zeros(g, 1)).unwrap().0;
        assert_eq!(zero.max_abs(), 0.0);
    }

    fn smooth_kernel(g: CircleGrid) -> OffDiagKernel {
        OffDiagKernel::from_fn(g, 1, 0.5, false, |x, y, out| {
            out[0] = (x - 2.0 * y).sin() + 0.5 * (2.0 * x + y).cos();
        })
        .unwrap()
    }

    #[test]
    fn correction_is_divergence_free() {
        let g = grid(64);
        let om = smooth_kernel(g);
        assert!(divergence_defect(&om, 8).unwrap() > 1e-3);
        let out = divfree_correction(&om, 0.25).unwrap();
        assert!(divergence_defect(&out.corrected, 8).unwrap() <= DIVFREE_TOL);
    }

    #[test]
    fn correction_converges_as_cutoff_shrinks() {
        let g = grid(128);
        let om = smooth_kernel(g);
        let gaps: Vec<f64> = [0.5, 0.25, 0.1]
            .iter()
            .map(|&d| {
                let c = divfree_correction(&om, d).unwrap();
                let hn = sobolev_norm(&c.potential[0], 0.5, true).unwrap();
                let cut_gap = l2od_norm(&c.cut.sub(&om).unwrap());
                // ‖h_δ‖_{Ḣ^{1/2}} ≲ ‖Ω_δ − Ω‖_{L²_od}
                assert!(hn <= 10.0 * cut_gap + 1e-12);
                l2od_norm(&c.corrected.sub(&om).unwrap())
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn correction_rejects_large_cutoff() {
        let om = smooth_kernel(grid(16));
        assert!(divfree_correction(&om, PI).is_err());
    }

    #[test]
    fn correction_of_zero_kernel_is_zero() {
        let g = grid(32);
        let u = circle(g);
        let d = d_s(&u, 0.5).unwrap();
        let zero = d.sub(&d).unwrap();
        let out = divfree_correction(&zero, 0.3).unwrap();
        assert!(out.corrected.values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn remainder_of_circle_map() {
        let g = grid(256);
        let u = circle(g);
        let t = remainder_t_diag(&u).unwrap();
        let expect = u.scale(PI);
        assert!(t.sub(&expect).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn remainder_symmetry_and_constants() {
        let g = grid(64);
        let u = Field::from_fn(g, 2, |x| vec![x.cos(), (2.0 * x).sin()]).unwrap();
        let v = Field::from_fn(g, 2, |x| vec![(3.0 * x).sin(), x.cos() * 0.5]).unwrap();
        let w = Field::from_fn(g, 2, |x| vec![(x).sin(), (2.0 * x).cos()]).unwrap();
        let a = remainder_t(&u, &v, &w).unwrap();
        let b = remainder_t(&u, &w, &v).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
        let c = Field::from_fn(g, 2, |_| vec![0.3, -0.2]).unwrap();
        assert!(remainder_t(&u, &c, &w).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn wente_trivial_cases() {
        let g = grid(32);
        let zero = OffDiagKernel::zeros(g, 1, 0.5).unwrap();
        let gfield = Field::scalar(g, |x| x.sin());
        assert_eq!(wente_check(&zero, &gfield).unwrap(), 0.0);
        let f = divfree_correction(&smooth_kernel(g), 0.3).unwrap().corrected;
        assert_eq!(wente_check(&f, &Field::scalar(g, |_| 1.0)).unwrap(), 0.0);
        let r = wente_check(&f, &gfield).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn wente_rejects_divergent_kernel() {
        let g = grid(32);
        let f = smooth_kernel(g);
        let err = wente_check(&f, &Field::scalar(g, |x| x.sin())).unwrap_err();
        assert!(matches!(err, Error::NotDivergenceFree(_)));
    }

    #[test]
    fn gagliardo_full_circle() {
        let g = grid(128);
        let val = gagliardo_local(&circle(g), Arc::full(), Arc::full()).unwrap();
        assert!((val - 4.0 * PI * PI).abs() < 1e-9);
        let c = Field::from_fn(g, 2, |_| vec![1.0, 0.0]).unwrap();
        assert!(gagliardo_local(&c, Arc::full(), Arc::full()).unwrap() < 1e-12);
    }

    #[test]
    fn gagliardo_monotone_in_arcs() {
        let g = grid(64);
        let u = Field::from_fn(g, 2, |x| vec![(2.0 * x).cos(), (2.0 * x).sin()]).unwrap();
        let mut last = 0.0;
        for r in [0.2, 0.5, 1.0, 2.0] {
            let v = gagliardo_local(&u, Arc::new(1.0, r), Arc::new(1.0, r)).unwrap();
            assert!(v >= last);
            last = v;
        }
    }
}
