//! Discrete Fourier analysis on the circle grid.
//!
//! Coefficients follow `û(k) = (1/M) Σ_j u(x_j) e^{-ikx_j}` so that
//! `∫_{S¹} |u|² dx = 2π Σ_k |û(k)|²` for band-limited fields.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::CircleGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

/// Coefficients of one real sequence, FFT-ordered and normalized by `1/M`.
pub(crate) fn forward_real(data: &[f64]) -> Vec<Complex64> {
    let m = data.len() as f64;
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    buf.iter_mut().for_each(|c| *c /= m);
    buf
}

/// Real part of the synthesis `Σ_k c_k e^{ikx_j}` (FFT-ordered input).
pub(crate) fn inverse_real(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    fft_inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Spectral mirror of a [`Field`]: `û(k) ∈ C^n` for `k = -M/2 .. M/2-1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    grid: CircleGrid,
    dim: usize,
    /// One FFT-ordered coefficient vector per component.
    coeffs: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `û_c(k)`, or zero for unresolved wavenumbers.
    pub fn coeff(&self, k: i64, c: usize) -> Complex64 {
        match self.grid.slot(k) {
            Some(idx) => self.coeffs[c][idx],
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    /// `Σ_c |û_c(k)|²` for every FFT slot.
    pub fn power(&self) -> Vec<f64> {
        let m = self.grid.len();
        (0..m)
            .map(|idx| self.coeffs.iter().map(|c| c[idx].norm_sqr()).sum())
            .collect()
    }

    /// Multiplies every coefficient by `mult(k)`.
    pub fn multiply(&self, mult: impl Fn(i64) -> f64) -> SpectralField {
        let g = self.grid;
        let factors: Vec<f64> = (0..g.len()).map(|i| mult(g.wavenumber(i))).collect();
        SpectralField {
            grid: g,
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().zip(&factors).map(|(z, f)| z * f).collect())
                .collect(),
        }
    }
}

pub fn to_spectral(u: &Field) -> Result<SpectralField> {
    let grid = u.circle_grid()?;
    let coeffs = u.columns().iter().map(|col| forward_real(col)).collect();
    Ok(SpectralField { grid, dim: u.dim(), coeffs })
}

/// Synthesizes the real field; imaginary parts (from non-symmetric input)
/// are discarded.
pub fn from_spectral(uh: &SpectralField) -> Field {
    let cols: Vec<Vec<f64>> = uh.coeffs.iter().map(|c| inverse_real(c)).collect();
    Field::from_columns(uh.grid, &cols).expect("spectral synthesis preserves shape")
}

/// Applies the real even Fourier multiplier `mult(|k|)` componentwise.
pub fn apply_multiplier(u: &Field, mult: impl Fn(i64) -> f64) -> Result<Field> {
    Ok(from_spectral(&to_spectral(u)?.multiply(mult)))
}

/// Circulant operator stored as a physical-space kernel: `(Cu)_i = Σ_j c_j u_{i-j}`.
///
/// Applying a stencil costs `O(M²)` but is exactly equivariant under cyclic
/// relabelling of the nodes, which the FFT path is not.
#[derive(Clone, Debug)]
pub struct Stencil {
    kernel: Vec<f64>,
}

impl Stencil {
    /// Kernel of the multiplier `mult(k)`. The Nyquist slot uses the mean of
    /// `mult(M/2)` and `mult(-M/2)`, real part only.
    pub fn from_multiplier(grid: CircleGrid, mult: impl Fn(i64) -> Complex64) -> Stencil {
        let m = grid.len();
        let half = (m / 2) as i64;
        let mut coeffs: Vec<Complex64> = (0..m)
            .map(|idx| {
                let k = grid.wavenumber(idx);
                if k == -half {
                    Complex64::new(0.5 * (mult(half) + mult(-half)).re, 0.0)
                } else {
                    mult(k)
                }
            })
            .collect();
        fft_inverse(&mut coeffs);
        let kernel = coeffs.into_iter().map(|c| c.re / m as f64).collect();
        Stencil { kernel }
    }

    pub fn from_real_multiplier(grid: CircleGrid, mult: impl Fn(i64) -> f64) -> Stencil {
        Self::from_multiplier(grid, |k| Complex64::new(mult(k), 0.0))
    }

    /// Evaluation at the half-offset nodes `x_j + h/2`.
    pub fn half_shift(grid: CircleGrid) -> Stencil {
        let h = grid.spacing();
        Self::from_multiplier(grid, |k| Complex64::from_polar(1.0, k as f64 * h / 2.0))
    }

    /// Inverse of [`Stencil::half_shift`] on non-Nyquist modes (its transpose).
    pub fn half_shift_back(grid: CircleGrid) -> Stencil {
        let h = grid.spacing();
        Self::from_multiplier(grid, |k| Complex64::from_polar(1.0, -(k as f64) * h / 2.0))
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        let m = self.kernel.len();
        debug_assert_eq!(u.len(), m);
        let mut out = vec![0.0; m];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, c) in self.kernel.iter().enumerate() {
                acc += c * u[(i + m - j) % m];
            }
            *o = acc;
        }
        out
    }

    /// Applies the stencil to every component of `u`.
    pub fn apply(&self, u: &Field) -> Field {
        let m = u.len();
        let n = u.dim();
        assert_eq!(m, self.kernel.len(), "stencil size differs from field size");
        let src = u.values();
        let mut values = vec![0.0; m * n];
        for i in 0..m {
            let out = &mut values[i * n..(i + 1) * n];
            for (j, c) in self.kernel.iter().enumerate() {
                let s = (i + m - j) % m;
                for (o, v) in out.iter_mut().zip(&src[s * n..(s + 1) * n]) {
                    *o += c * v;
                }
            }
        }
        Field::from_parts_unchecked(u.grid(), n, values)
    }
}

/// Trigonometric interpolant of `u` evaluated at arbitrary angles.
pub fn evaluate_at(u: &Field, points: &[f64]) -> Result<Vec<Vec<f64>>> {
    let sp = to_spectral(u)?;
    let g = sp.grid();
    let m = g.len();
    let half = (m / 2) as i64;
    Ok(points
        .iter()
        .map(|&x| {
            (0..sp.dim())
                .map(|c| {
                    let coeffs = sp.component(c);
                    let mut acc = 0.0;
                    for (idx, z) in coeffs.iter().enumerate() {
                        let k = g.wavenumber(idx);
                        if k == -half {
                            // split the Nyquist mode evenly between ±M/2
                            acc += z.re * (k as f64 * x).cos();
                        } else {
                            acc += (z * Complex64::from_polar(1.0, k as f64 * x)).re;
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect())
}

pub(crate) fn require_circle(u: &Field) -> Result<CircleGrid> {
    u.circle_grid().map_err(|_| Error::NotCircleGrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(m: usize) -> CircleGrid {
        CircleGrid::new(m).unwrap()
    }

    #[test]
    fn constant_has_only_mean_mode() {
        let u = Field::scalar(grid(16), |_| 2.5);
        let s = to_spectral(&u).unwrap();
        assert!((s.coeff(0, 0).re - 2.5).abs() < 1e-15);
        for k in 1..8 {
            assert!(s.coeff(k, 0).norm() < 1e-15);
            assert!(s.coeff(-k, 0).norm() < 1e-15);
        }
    }

    #[test]
    fn cosine_splits_into_two_halves() {
        let u = Field::scalar(grid(32), |x| (3.0 * x).cos());
        let s = to_spectral(&u).unwrap();
        for k in -16..16 {
            let expect = if k == 3 || k == -3 { 0.5 } else { 0.0 };
            assert!((s.coeff(k, 0) - Complex64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_line_fields() {
        let g = crate::grid::LineGrid::new(1.0, 16).unwrap();
        let u = Field::zeros(g, 1);
        assert!(matches!(to_spectral(&u), Err(Error::NotCircleGrid)));
    }

    #[test]
    fn conjugate_symmetry_for_real_fields() {
        let u = Field::scalar(grid(32), |x| (x).sin() + 0.3 * (5.0 * x).cos());
        let s = to_spectral(&u).unwrap();
        for k in 1..16 {
            assert!((s.coeff(-k, 0) - s.coeff(k, 0).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn stencil_matches_fft_multiplier() {
        let g = grid(32);
        let u = Field::scalar(g, |x| (2.0 * x).sin() + (7.0 * x).cos());
        let st = Stencil::from_real_multiplier(g, |k| (k as f64).abs());
        let a = st.apply(&u);
        let b = apply_multiplier(&u, |k| (k as f64).abs()).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn half_shift_interpolates_exactly() {
        let g = grid(32);
        let h = g.spacing();
        let u = Field::scalar(g, |x| (3.0 * x).sin() + 0.5 * (x).cos());
        let s = Stencil::half_shift(g).apply(&u);
        for j in 0..32 {
            let y = g.node(j) + h / 2.0;
            let exact = (3.0 * y).sin() + 0.5 * y.cos();
            assert!((s.get(j, 0) - exact).abs() < 1e-13);
        }
        let back = Stencil::half_shift_back(g).apply(&s);
        assert!(back.sub(&u).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn evaluate_off_grid() {
        let u = Field::scalar(grid(16), |x| (2.0 * x).cos());
        let vals = evaluate_at(&u, &[0.1, 1.7, PI]).unwrap();
        for (x, v) in [0.1f64, 1.7, PI].iter().zip(vals) {
            assert!((v[0] - (2.0 * x).cos()).abs() < 1e-13);
        }
    }
}
