//! Fractional Laplacians, Sobolev norms and the fractional heat semigroup
//! on the circle.
//!
//! Two realizations of `(-Δ)^{1/2}` live here:
//!
//! * the Fourier multiplier `|k|`, [`frac_laplacian`];
//! * a principal-value quadrature of `∫ (u(x) - u(y)) / |x - y|² dy`,
//!   [`pv_half_laplacian`], evaluated on the half-offset grid
//!   `y_m = x + (m + 1/2) h`.
//!
//! The offset grid never touches the diagonal, sums constants exactly and is
//! symmetric about `x`, so the odd part of the singular integrand cancels.

pub(crate) mod fourier;

use std::f64::consts::PI;

pub use fourier::{
    apply_multiplier, evaluate_at, from_spectral, to_spectral, SpectralField, Stencil,
};
pub(crate) use fourier::{inverse_real, require_circle};

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::grid::CircleGrid;

pub use crate::grid::chordal_distance;

/// `(-Δ)^s u` via the multiplier `|k|^{2s}`, `s ∈ (0, 1]`.
pub fn frac_laplacian(u: &Field, s: f64) -> Result<Field> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(invalid(format!("exponent s must lie in (0, 1], got {s}")));
    }
    require_circle(u)?;
    apply_multiplier(u, |k| (k.abs() as f64).powf(2.0 * s))
}

/// Weights `1/|x - y_m|²` of the half-offset rule.
pub(crate) fn pv_weights(grid: CircleGrid) -> Vec<f64> {
    grid.offset_distances().into_iter().map(|d| 1.0 / (d * d)).collect()
}

/// `C_pv · P.V.∫ (u(x) - u(y)) / |x - y|² dy` by the half-offset rule.
///
/// Values at the offset points come from trigonometric interpolation, so the
/// rule is exact on trigonometric polynomials of degree below `M/2` and the
/// calibrated constant is `1/π`.
pub fn pv_half_laplacian(u: &Field, c_pv: f64) -> Result<Field> {
    let grid = require_circle(u)?;
    let m = grid.len();
    let n = u.dim();
    let h = grid.spacing();
    let w = pv_weights(grid);
    let shifted = Stencil::half_shift(grid).apply(u);
    let (src, off) = (u.values(), shifted.values());
    let mut values = vec![0.0; m * n];
    for i in 0..m {
        for c in 0..n {
            let ui = src[i * n + c];
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let y = (i + k) % m;
                acc += wk * (ui - off[y * n + c]);
            }
            values[i * n + c] = c_pv * h * acc;
        }
    }
    Field::new(grid, n, values)
}

/// `e^{-t(-Δ)^s} u`: multiplies `û(k)` by `e^{-|k|^{2s} t}`.
pub fn heat_semigroup(u: &Field, t: f64, s: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(invalid(format!("heat semigroup time must be nonnegative, got {t}")));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(invalid(format!("exponent s must lie in (0, 1], got {s}")));
    }
    require_circle(u)?;
    if t == 0.0 {
        return Ok(u.clone());
    }
    apply_multiplier(u, |k| (-(k.abs() as f64).powf(2.0 * s) * t).exp())
}

/// Number of image shifts kept on each side in [`poisson_kernel`].
pub const POISSON_IMAGES: i64 = 50;

/// The `2π`-periodization of `(1/π) t / (t² + x²)`.
///
/// Images with `|n| ≤ 50` are summed directly; the remaining tail is replaced
/// by its leading asymptotic `t / (2π³ (N + 1/2))`.
pub fn poisson_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("Poisson kernel needs t > 0, got {t}")));
    }
    let x = x.rem_euclid(2.0 * PI);
    let x = if x > PI { x - 2.0 * PI } else { x };
    let mut acc = 0.0;
    for n in -POISSON_IMAGES..=POISSON_IMAGES {
        let y = x + 2.0 * PI * n as f64;
        acc += t / (t * t + y * y);
    }
    let tail = t / (2.0 * PI * PI * (POISSON_IMAGES as f64 + 0.5));
    Ok((acc + tail) / PI)
}

/// `(2π Σ_k w(k) |û(k)|²)^{1/2}` with `w = |k|^{2s}` (homogeneous) or
/// `(1 + k²)^s`. Negative `s` is allowed for the inhomogeneous norm.
pub fn sobolev_norm(u: &Field, s: f64, homogeneous: bool) -> Result<f64> {
    let sp = to_spectral(u)?;
    let g = sp.grid();
    let power = sp.power();
    let mut acc = 0.0;
    for (idx, p) in power.iter().enumerate() {
        let k = g.wavenumber(idx) as f64;
        let w = if homogeneous {
            if k == 0.0 {
                0.0
            } else {
                k.abs().powf(2.0 * s)
            }
        } else {
            (1.0 + k * k).powf(s)
        };
        acc += w * p;
    }
    Ok((2.0 * PI * acc).sqrt())
}

/// `½ ∫ |(-Δ)^{1/4} u|² dx = π Σ_k |k| |û(k)|²`.
pub fn half_energy(u: &Field) -> Result<f64> {
    let sp = to_spectral(u)?;
    let g = sp.grid();
    Ok(PI
        * sp
            .power()
            .iter()
            .enumerate()
            .map(|(idx, p)| g.wavenumber(idx).abs() as f64 * p)
            .sum::<f64>())
}

/// Spectral derivative `∂ₓ u` (the Nyquist mode is dropped).
pub fn derivative(u: &Field) -> Result<Field> {
    let sp = to_spectral(u)?;
    let g = sp.grid();
    let half = (g.len() / 2) as i64;
    let cols: Vec<Vec<f64>> = (0..sp.dim())
        .map(|c| {
            let coeffs: Vec<_> = sp
                .component(c)
                .iter()
                .enumerate()
                .map(|(idx, z)| {
                    let k = g.wavenumber(idx);
                    if k == -half {
                        num_complex::Complex64::new(0.0, 0.0)
                    } else {
                        z * num_complex::Complex64::new(0.0, k as f64)
                    }
                })
                .collect();
            inverse_real(&coeffs)
        })
        .collect();
    Field::from_columns(g, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> CircleGrid {
        CircleGrid::new(m).unwrap()
    }

    fn rel_l2(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().l2_norm() / b.l2_norm()
    }

    #[test]
    fn multiplier_on_pure_modes() {
        let g = grid(64);
        for &s in &[0.25, 0.5, 1.0] {
            for k in 1..=16 {
                let u = Field::scalar(g, |x| (k as f64 * x).cos());
                let lu = frac_laplacian(&u, s).unwrap();
                let factor = (k as f64).powf(2.0 * s);
                let expect = u.scale(factor);
                assert!(lu.sub(&expect).unwrap().max_abs() / factor < 1e-12);
            }
        }
        let u = Field::scalar(g, |x| (2.0 * x).cos());
        let lu = frac_laplacian(&u, 0.5).unwrap();
        assert!(lu.sub(&u.scale(2.0)).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn constants_are_annihilated() {
        let g = grid(32);
        let c = Field::scalar(g, |_| 3.0);
        assert!(frac_laplacian(&c, 0.5).unwrap().max_abs() < 1e-14);
        assert!(pv_half_laplacian(&c, 1.0 / PI).unwrap().max_abs() < 1e-12);
        assert_eq!(half_energy(&c).unwrap(), 0.0);
        assert_eq!(sobolev_norm(&c, 0.7, true).unwrap(), 0.0);
    }

    #[test]
    fn pv_matches_multiplier() {
        let g = grid(256);
        let u = Field::scalar(g, |x| (3.0 * x).cos());
        let pv = pv_half_laplacian(&u, 1.0 / PI).unwrap();
        let sp = frac_laplacian(&u, 0.5).unwrap();
        assert!(rel_l2(&pv, &sp) <= 1e-2);
    }

    #[test]
    fn pv_is_linear() {
        let g = grid(64);
        let u = Field::scalar(g, |x| (2.0 * x).sin());
        let v = Field::scalar(g, |x| (5.0 * x).cos() + 0.2);
        let (a, b) = (1.7, -0.4);
        let lhs = pv_half_laplacian(&u.lin_comb(a, &v, b).unwrap(), 0.3).unwrap();
        let rhs = pv_half_laplacian(&u, 0.3)
            .unwrap()
            .lin_comb(a, &pv_half_laplacian(&v, 0.3).unwrap(), b)
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn heat_semigroup_examples() {
        let g = grid(32);
        let u = Field::from_fn(g, 2, |x| vec![x.cos(), x.sin()]).unwrap();
        assert_eq!(heat_semigroup(&u, 0.0, 0.5).unwrap(), u);
        let e = heat_semigroup(&u, 1.0, 0.5).unwrap();
        assert!(e.sub(&u.scale((-1.0f64).exp())).unwrap().max_abs() < 1e-14);
        let c = Field::scalar(g, |_| 0.7);
        assert!(heat_semigroup(&c, 5.0, 0.5).unwrap().sub(&c).unwrap().max_abs() < 1e-14);
        assert!(heat_semigroup(&u, -1.0, 0.5).is_err());
    }

    #[test]
    fn semigroup_property() {
        let g = grid(64);
        let u = Field::scalar(g, |x| (x).sin() + 0.3 * (4.0 * x).cos() + 0.1 * (9.0 * x).sin());
        let a = heat_semigroup(&heat_semigroup(&u, 0.3, 0.5).unwrap(), 0.2, 0.5).unwrap();
        let b = heat_semigroup(&u, 0.5, 0.5).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn poisson_kernel_properties() {
        assert!(poisson_kernel(0.0, 1.0).is_err());
        for &t in &[0.1, 1.0] {
            let a = poisson_kernel(t, 0.7).unwrap();
            let b = poisson_kernel(t, -0.7).unwrap();
            assert!((a - b).abs() < 1e-15);
            // closed form (1/2π) sinh t / (cosh t - cos x)
            for &x in &[0.0, 0.4, 2.0, PI] {
                let exact = t.sinh() / (t.cosh() - x.cos()) / (2.0 * PI);
                assert!((poisson_kernel(t, x).unwrap() - exact).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid(32);
        let u = Field::scalar(g, |x| x.cos());
        assert!((sobolev_norm(&u, 0.5, true).unwrap() - PI.sqrt()).abs() < 1e-13);
        let v = Field::scalar(g, |x| (2.0 * x).cos() + (5.0 * x).sin());
        let mut prev = 0.0;
        for s in [0.1, 0.3, 0.5, 0.8, 1.0] {
            let n = sobolev_norm(&v, s, true).unwrap();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn half_energy_of_circle_map() {
        let u = Field::from_fn(grid(64), 2, |x| vec![x.cos(), x.sin()]).unwrap();
        assert!((half_energy(&u).unwrap() - PI).abs() < 1e-13);
        let e2 = half_energy(&u.scale(2.0)).unwrap();
        assert!((e2 - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_modes() {
        let g = grid(32);
        let u = Field::scalar(g, |x| (3.0 * x).sin());
        let du = derivative(&u).unwrap();
        let expect = Field::scalar(g, |x| 3.0 * (3.0 * x).cos());
        assert!(du.sub(&expect).unwrap().max_abs() < 1e-12);
    }
}
