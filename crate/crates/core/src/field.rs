//! Vector-valued samples on a grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{CircleGrid, Grid};

/// Default tolerance for on-sphere certification.
pub const SPHERE_TOL: f64 = 1e-8;

/// Samples of a map `u: domain -> R^n` at the nodes of a grid.
///
/// Values are stored node-major: component `c` of node `j` lives at
/// `values[j * dim + c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: impl Into<Grid>, dim: usize, values: Vec<f64>) -> Result<Self> {
        let grid = grid.into();
        if dim == 0 {
            return Err(invalid("target dimension must be positive"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::Mismatch(format!(
                "expected {} values for {} nodes x {dim} components, got {}",
                grid.len() * dim,
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: impl Into<Grid>, dim: usize) -> Self {
        let grid = grid.into();
        Self {
            values: vec![0.0; grid.len() * dim],
            grid,
            dim,
        }
    }

    /// Samples `f(x_j)` at every node; `f` must return `dim` components.
    pub fn from_fn(grid: impl Into<Grid>, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let grid = grid.into();
        let mut values = Vec::with_capacity(grid.len() * dim);
        for j in 0..grid.len() {
            let v = f(grid.node(j));
            if v.len() != dim {
                return Err(Error::Mismatch(format!(
                    "sample function returned {} components, expected {dim}",
                    v.len()
                )));
            }
            values.extend(v);
        }
        Self::new(grid, dim, values)
    }

    pub fn scalar(grid: impl Into<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let grid = grid.into();
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, dim: 1, values }
    }

    pub fn from_columns(grid: impl Into<Grid>, columns: &[Vec<f64>]) -> Result<Self> {
        let grid = grid.into();
        let dim = columns.len();
        let m = grid.len();
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::Mismatch("column length differs from node count".into()));
        }
        let mut values = vec![0.0; m * dim];
        for (c, col) in columns.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                values[j * dim + c] = *v;
            }
        }
        Self::new(grid, dim, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn circle_grid(&self) -> Result<CircleGrid> {
        self.grid.as_circle()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, j: usize, c: usize) -> f64 {
        self.values[j * self.dim + c]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|c| self.column(c)).collect()
    }

    /// Pointwise Euclidean norms `|u(x_j)|`.
    pub fn norms(&self) -> Vec<f64> {
        self.values
            .chunks_exact(self.dim)
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.norms().into_iter().fold(0.0, f64::max)
    }

    /// `max_j | |u(x_j)| - 1 |`.
    pub fn sphere_drift(&self) -> f64 {
        self.norms()
            .into_iter()
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Fails unless every sample lies within `tol` of the unit sphere.
    pub fn certify_on_sphere(&self, tol: f64) -> Result<()> {
        let drift = self.sphere_drift();
        if drift > tol {
            return Err(Error::OffSphere { drift, tol });
        }
        Ok(())
    }

    /// Riemann-sum `(h Σ_j |u_j|^2)^{1/2}`, exact for band-limited fields.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Discrete inner product `h Σ_j u_j · v_j`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.grid.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::Mismatch(format!(
                "fields differ in grid or dimension ({} vs {})",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_compatible(other)?;
        Ok(Field {
            grid: self.grid,
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, 1.0)
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar_field(&self, s: &Field) -> Result<Field> {
        if s.dim != 1 || s.grid != self.grid {
            return Err(Error::Mismatch("expected a scalar field on the same grid".into()));
        }
        let mut out = self.clone();
        for (row, w) in out.values.chunks_exact_mut(self.dim).zip(&s.values) {
            row.iter_mut().for_each(|v| *v *= w);
        }
        Ok(out)
    }

    /// Applies the linear map `rot` (row-major `dim x dim`) to every sample.
    pub fn transform_target(&self, rot: &[f64]) -> Result<Field> {
        let n = self.dim;
        if rot.len() != n * n {
            return Err(Error::Mismatch("target matrix has the wrong size".into()));
        }
        let mut values = vec![0.0; self.values.len()];
        for (out, row) in values.chunks_exact_mut(n).zip(self.values.chunks_exact(n)) {
            for a in 0..n {
                out[a] = (0..n).map(|b| rot[a * n + b] * row[b]).sum();
            }
        }
        Ok(Field { grid: self.grid, dim: n, values })
    }

    /// Cyclic relabelling of nodes: result at node `j` is `self` at `j - shift`.
    pub fn roll(&self, shift: usize) -> Field {
        let m = self.len();
        let n = self.dim;
        let mut values = vec![0.0; self.values.len()];
        for j in 0..m {
            let src = (j + m - shift % m) % m;
            values[j * n..(j + 1) * n].copy_from_slice(&self.values[src * n..(src + 1) * n]);
        }
        Field { grid: self.grid, dim: n, values }
    }

    /// Pointwise unit-sphere projection without failure checks.
    pub(crate) fn normalized_unchecked(&self) -> Field {
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(self.dim) {
            let r = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter_mut().for_each(|v| *v /= r);
        }
        out
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, dim: usize, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.len() * dim);
        Field { grid, dim, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> CircleGrid {
        CircleGrid::new(16).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        assert!(matches!(
            Field::new(grid(), 1, vec![f64::NAN; 16]),
            Err(Error::NonFinite)
        ));
        assert!(Field::new(grid(), 2, vec![0.0; 16]).is_err());
    }

    #[test]
    fn sphere_certification() {
        let u = Field::from_fn(grid(), 2, |x| vec![x.cos(), x.sin()]).unwrap();
        assert!(u.certify_on_sphere(SPHERE_TOL).is_ok());
        let v = u.scale(1.1);
        assert!(v.certify_on_sphere(SPHERE_TOL).is_err());
    }

    #[test]
    fn columns_roundtrip() {
        let u = Field::from_fn(grid(), 3, |x| vec![x, 2.0 * x, -x]).unwrap();
        let w = Field::from_columns(grid(), &u.columns()).unwrap();
        assert_eq!(u, w);
    }

    #[test]
    fn roll_moves_samples() {
        let u = Field::scalar(grid(), |x| x);
        let r = u.roll(3);
        assert_eq!(r.get(3, 0), u.get(0, 0));
        assert_eq!(r.get(0, 0), u.get(13, 0));
    }
}
