//! Space-time samples and the nonlocal spatial energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::CircleGrid;
use crate::spectral::{require_circle, Stencil};

/// Which time variable the samples are indexed by: the original `t` or the
/// rescaled `τ = t/ε` of `v(τ, x) = u(ετ, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    U,
    V,
}

/// `u(t_m, ·)` for `t_m = m Δt`, `m = 0..=M_t`, with `u(0)` pinned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    grid: CircleGrid,
    dt: f64,
    frame: Frame,
    slices: Vec<Field>,
}

impl SpaceTimeField {
    /// The static path `u(t) = u0` on `steps + 1` time nodes.
    pub fn constant_in_time(u0: &Field, dt: f64, steps: usize) -> Result<Self> {
        Self::from_slices(dt, Frame::U, vec![u0.clone(); steps + 1])
    }

    pub fn from_slices(dt: f64, frame: Frame, slices: Vec<Field>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if slices.len() < 2 {
            return Err(invalid("a space-time field needs at least two time nodes"));
        }
        let grid = require_circle(&slices[0])?;
        let n = slices[0].dim();
        if slices.iter().any(|s| s.grid() != grid.into() || s.dim() != n) {
            return Err(Error::Mismatch("time slices differ in grid or dimension".into()));
        }
        Ok(Self { grid, dt, frame, slices })
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Number of time intervals `M_t`.
    pub fn steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.slices.len()).map(|m| m as f64 * self.dt).collect()
    }

    pub fn slices(&self) -> &[Field] {
        &self.slices
    }

    pub fn slice(&self, m: usize) -> &Field {
        &self.slices[m]
    }

    pub fn initial(&self) -> &Field {
        &self.slices[0]
    }

    pub fn max_sphere_drift(&self) -> f64 {
        self.slices.iter().map(|s| s.sphere_drift()).fold(0.0, f64::max)
    }

    pub(crate) fn with_slices(&self, slices: Vec<Field>) -> Self {
        Self { slices, ..self.clone() }
    }

    pub(crate) fn relabel(&self, dt: f64, frame: Frame) -> Self {
        Self { dt, frame, ..self.clone() }
    }
}

/// Precomputed half-offset weights for `S_{s,p}`.
#[derive(Clone, Debug)]
pub(crate) struct SpatialEnergy {
    grid: CircleGrid,
    p: f64,
    weights: Vec<f64>,
    shift: Stencil,
    back: Stencil,
}

impl SpatialEnergy {
    pub fn new(grid: CircleGrid, s: f64, p: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(invalid(format!("exponent p must be at least 2, got {p}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid(format!("order s must lie in (0, 1), got {s}")));
        }
        Ok(Self {
            grid,
            p,
            weights: grid.offset_distances().iter().map(|d| d.powf(-(1.0 + s * p))).collect(),
            shift: Stencil::half_shift(grid),
            back: Stencil::half_shift_back(grid),
        })
    }

    /// `S(u) = ∫∫ |u(x) − u(y)|^p / |x − y|^{sp} dy dx / |x − y|`.
    pub fn value(&self, u: &Field) -> f64 {
        let m = self.grid.len();
        let n = u.dim();
        let h = self.grid.spacing();
        let off = self.shift.apply(u);
        let (src, ov) = (u.values(), off.values());
        let mut acc = 0.0;
        for i in 0..m {
            for (k, w) in self.weights.iter().enumerate() {
                let y = (i + k) % m;
                let mut d2 = 0.0;
                for c in 0..n {
                    let d = src[i * n + c] - ov[y * n + c];
                    d2 += d * d;
                }
                acc += w * d2.powf(0.5 * self.p);
            }
        }
        h * h * acc
    }

    /// Gradient of [`SpatialEnergy::value`] with respect to nodal values.
    pub fn gradient(&self, u: &Field) -> Field {
        let m = self.grid.len();
        let n = u.dim();
        let h = self.grid.spacing();
        let off = self.shift.apply(u);
        let (src, ov) = (u.values(), off.values());
        let mut node = vec![0.0; m * n];
        let mut collected = vec![0.0; m * n];
        let scale = h * h * self.p;
        for i in 0..m {
            for (k, w) in self.weights.iter().enumerate() {
                let y = (i + k) % m;
                let mut d2 = 0.0;
                for c in 0..n {
                    let d = src[i * n + c] - ov[y * n + c];
                    d2 += d * d;
                }
                let f = scale * w * if self.p == 2.0 { 1.0 } else { d2.powf(0.5 * self.p - 1.0) };
                for c in 0..n {
                    let d = f * (src[i * n + c] - ov[y * n + c]);
                    node[i * n + c] += d;
                    collected[y * n + c] -= d;
                }
            }
        }
        let pulled = self.back.apply(&Field::from_parts_unchecked(self.grid.into(), n, collected));
        let values = node.iter().zip(pulled.values()).map(|(a, b)| a + b).collect();
        Field::from_parts_unchecked(self.grid.into(), n, values)
    }

    pub fn values(&self, slices: &[Field]) -> Vec<f64> {
        slices.par_iter().map(|u| self.value(u)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::{d_s, l2od_norm};

    #[test]
    fn p2_matches_l2od_norm() {
        let g = CircleGrid::new(32).unwrap();
        let u = Field::from_fn(g, 2, |x| vec![(2.0 * x).cos(), x.sin()]).unwrap();
        let e = SpatialEnergy::new(g, 0.5, 2.0).unwrap();
        let direct = l2od_norm(&d_s(&u, 0.5).unwrap()).powi(2);
        assert!((e.value(&u) - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = CircleGrid::new(16).unwrap();
        let u = Field::from_fn(g, 2, |x| vec![(2.0 * x).cos() + 0.3, x.sin()]).unwrap();
        for p in [2.0, 3.0] {
            let e = SpatialEnergy::new(g, 0.5, p).unwrap();
            let grad = e.gradient(&u);
            for idx in [0, 5, 17, 30] {
                let mut plus = u.clone();
                plus.values_mut()[idx] += 1e-6;
                let mut minus = u.clone();
                minus.values_mut()[idx] -= 1e-6;
                let fd = (e.value(&plus) - e.value(&minus)) / 2e-6;
                assert!((fd - grad.values()[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "p={p}");
            }
        }
    }

    #[test]
    fn rejects_small_p() {
        assert!(SpatialEnergy::new(CircleGrid::new(16).unwrap(), 0.5, 1.5).is_err());
    }

    #[test]
    fn pinned_initial_slice() {
        let g = CircleGrid::new(16).unwrap();
        let u = Field::from_fn(g, 2, |x| vec![x.cos(), x.sin()]).unwrap();
        let st = SpaceTimeField::constant_in_time(&u, 0.1, 4).unwrap();
        assert_eq!(st.steps(), 4);
        assert!((st.horizon() - 0.4).abs() < 1e-15);
        assert_eq!(st.initial(), &u);
    }
}
