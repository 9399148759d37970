use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::CircleGrid;
use crate::spectral::{require_circle, Stencil};

/// A two-point function `F(x_i, y)` sampled on all node / half-offset pairs.
///
/// The pair `(i, m)` stands for `x = x_i`, `y = x_i + (m + 1/2) h`. Every
/// kernel remembers the order `s` of the fractional gradient it is paired
/// against in divergence computations.
#[derive(Clone, Debug, PartialEq)]
pub struct OffDiagKernel {
    grid: CircleGrid,
    comps: usize,
    order: f64,
    antisymmetric: bool,
    values: Vec<f64>,
}

/// Largest node count for which O(M²) kernels are materialized.
pub const MAX_KERNEL_NODES: usize = 2048;

impl OffDiagKernel {
    pub fn zeros(grid: CircleGrid, comps: usize, order: f64) -> Result<Self> {
        check_size(grid)?;
        Ok(Self {
            grid,
            comps,
            order,
            antisymmetric: true,
            values: vec![0.0; grid.len() * grid.len() * comps],
        })
    }

    /// Builds a kernel from `f(x, y, out)` evaluated at every pair.
    pub fn from_fn(
        grid: CircleGrid,
        comps: usize,
        order: f64,
        antisymmetric: bool,
        f: impl Fn(f64, f64, &mut [f64]) + Sync,
    ) -> Result<Self> {
        check_size(grid)?;
        let m = grid.len();
        let h = grid.spacing();
        let mut values = vec![0.0; m * m * comps];
        values
            .par_chunks_mut(m * comps)
            .enumerate()
            .for_each(|(i, row)| {
                let x = grid.node(i);
                for (k, out) in row.chunks_exact_mut(comps).enumerate() {
                    f(x, x + (k as f64 + 0.5) * h, out);
                }
            });
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, comps, order, antisymmetric, values })
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.antisymmetric
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of pair `(i, m)`.
    pub fn pair(&self, i: usize, m: usize) -> &[f64] {
        let base = (i * self.grid.len() + m) * self.comps;
        &self.values[base..base + self.comps]
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(x, y)| *x = a * *x + b * y);
        out.antisymmetric = self.antisymmetric && other.antisymmetric;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// Zeroes every pair closer than `delta` in chordal distance.
    pub fn cut_diagonal(&self, delta: f64) -> Self {
        let m = self.grid.len();
        let dist = self.grid.offset_distances();
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(m * self.comps) {
            for (k, pair) in row.chunks_exact_mut(self.comps).enumerate() {
                if dist[k] < delta {
                    pair.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        out
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.comps != other.comps {
            return Err(Error::Mismatch("off-diagonal kernels live on different grids".into()));
        }
        Ok(())
    }

    pub(crate) fn from_raw(
        grid: CircleGrid,
        comps: usize,
        order: f64,
        antisymmetric: bool,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), grid.len() * grid.len() * comps);
        Self { grid, comps, order, antisymmetric, values }
    }
}

fn check_size(grid: CircleGrid) -> Result<()> {
    if grid.len() > MAX_KERNEL_NODES {
        return Err(Error::InvalidGrid(format!(
            "off-diagonal kernels are capped at M = {MAX_KERNEL_NODES}, got {}",
            grid.len()
        )));
    }
    Ok(())
}

/// Field values at the half-offset nodes `x_j + h/2`.
pub(crate) fn offset_values(u: &Field) -> Result<Field> {
    let grid = require_circle(u)?;
    Ok(Stencil::half_shift(grid).apply(u))
}

/// Fractional `s`-gradient `(u(x) - u(y)) / |x - y|^s`, `s ∈ [0, 1)`.
pub fn d_s(u: &Field, s: f64) -> Result<OffDiagKernel> {
    if !(0.0..1.0).contains(&s) {
        return Err(crate::error::invalid(format!("gradient order must lie in [0, 1), got {s}")));
    }
    let grid = require_circle(u)?;
    check_size(grid)?;
    let m = grid.len();
    let n = u.dim();
    let inv: Vec<f64> = grid.offset_distances().iter().map(|d| d.powf(-s)).collect();
    let off = offset_values(u)?;
    let (src, offv) = (u.values(), off.values());
    let mut values = vec![0.0; m * m * n];
    values.par_chunks_mut(m * n).enumerate().for_each(|(i, row)| {
        let ui = &src[i * n..(i + 1) * n];
        for (k, pair) in row.chunks_exact_mut(n).enumerate() {
            let y = (i + k) % m;
            let uy = &offv[y * n..(y + 1) * n];
            for c in 0..n {
                pair[c] = (ui[c] - uy[c]) * inv[k];
            }
        }
    });
    Ok(OffDiagKernel::from_raw(grid, n, s, true, values))
}

/// `|d_{1/2} u|²(x) = ∫ |u(x) - u(y)|² / |x - y|² dy` by the half-offset rule.
pub fn sq_grad_density(u: &Field) -> Result<Field> {
    let grid = require_circle(u)?;
    let off = offset_values(u)?;
    let w = crate::spectral::pv_weights(grid);
    Ok(sq_grad_density_with(u, &off, &w))
}

pub(crate) fn sq_grad_density_with(u: &Field, off: &Field, w: &[f64]) -> Field {
    let m = u.len();
    let n = u.dim();
    let h = u.grid().spacing();
    let (src, offv) = (u.values(), off.values());
    let mut out = vec![0.0; m];
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let ui = &src[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            let y = (i + k) % m;
            let uy = &offv[y * n..(y + 1) * n];
            let mut d2 = 0.0;
            for c in 0..n {
                let d = ui[c] - uy[c];
                d2 += d * d;
            }
            acc += wk * d2;
        }
        *o = h * acc;
    });
    Field::from_parts_unchecked(u.grid(), 1, out)
}

/// Pointwise weighted pairing `(F · G)(x) = ∫ F(x, y) · G(x, y) dy / |x - y|`.
pub fn pairing(f: &OffDiagKernel, g: &OffDiagKernel) -> Result<Field> {
    f.check_compatible(g)?;
    let grid = f.grid;
    let m = grid.len();
    let n = f.comps;
    let h = grid.spacing();
    let inv: Vec<f64> = grid.offset_distances().iter().map(|d| 1.0 / d).collect();
    let out: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for (k, wk) in inv.iter().enumerate() {
                let (a, b) = (f.pair(i, k), g.pair(i, k));
                let dot: f64 = a.iter().zip(b).take(n).map(|(x, y)| x * y).sum();
                acc += wk * dot;
            }
            h * acc
        })
        .collect();
    Field::new(grid, 1, out)
}

/// `‖F‖_{L²_od} = (∫∫ |F|² dy dx / |x - y|)^{1/2}`.
pub fn l2od_norm(f: &OffDiagKernel) -> f64 {
    let grid = f.grid;
    let m = grid.len();
    let h = grid.spacing();
    let inv: Vec<f64> = grid.offset_distances().iter().map(|d| 1.0 / d).collect();
    let total: f64 = (0..m)
        .into_par_iter()
        .map(|i| {
            inv.iter()
                .enumerate()
                .map(|(k, wk)| wk * f.pair(i, k).iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    (h * h * total).sqrt()
}

/// Duality pairing `⟨div_s F, φ⟩ = ∫∫ F(x, y) d_s φ(x, y) dy dx / |x - y|`,
/// one value per kernel component.
pub fn frac_div_pair_components(f: &OffDiagKernel, phi: &Field) -> Result<Vec<f64>> {
    if phi.dim() != 1 || phi.grid() != f.grid.into() {
        return Err(Error::Mismatch("test function must be scalar on the kernel grid".into()));
    }
    let grid = f.grid;
    let m = grid.len();
    let n = f.comps;
    let h = grid.spacing();
    let w: Vec<f64> = grid
        .offset_distances()
        .iter()
        .map(|d| d.powf(-(1.0 + f.order)))
        .collect();
    let off = offset_values(phi)?;
    let (p, po) = (phi.values(), off.values());
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; n];
            for (k, wk) in w.iter().enumerate() {
                let dphi = p[i] - po[(i + k) % m];
                for (a, v) in acc.iter_mut().zip(f.pair(i, k)) {
                    *a += wk * v * dphi;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for row in rows {
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|v| h * h * v).collect())
}

/// Scalar form of [`frac_div_pair_components`].
pub fn frac_div_pair(f: &OffDiagKernel, phi: &Field) -> Result<f64> {
    if f.comps != 1 {
        return Err(Error::Mismatch(format!(
            "frac_div_pair expects a scalar kernel, got {} components",
            f.comps
        )));
    }
    Ok(frac_div_pair_components(f, phi)?[0])
}

/// The fractional divergence as a field: the unique grid function with
/// `h Σ_j (div_s F)_j φ_j = ⟨div_s F, φ⟩` for every grid function `φ`.
pub fn divergence(f: &OffDiagKernel) -> Result<Field> {
    let grid = f.grid;
    let m = grid.len();
    let n = f.comps;
    let h = grid.spacing();
    let w: Vec<f64> = grid
        .offset_distances()
        .iter()
        .map(|d| d.powf(-(1.0 + f.order)))
        .collect();
    // node part: Σ_m F(i, m) w_m
    let mut node = vec![0.0; m * n];
    node.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        for (k, wk) in w.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(f.pair(i, k)) {
                *o += wk * v;
            }
        }
    });
    // offset part: collected at offset node l = i + m
    let mut offset = vec![0.0; m * n];
    offset.par_chunks_mut(n).enumerate().for_each(|(l, out)| {
        for (k, wk) in w.iter().enumerate() {
            let i = (l + m - k) % m;
            for (o, v) in out.iter_mut().zip(f.pair(i, k)) {
                *o += wk * v;
            }
        }
    });
    let offset = Field::from_parts_unchecked(grid.into(), n, offset);
    let pulled = Stencil::half_shift_back(grid).apply(&offset);
    let values = node
        .iter()
        .zip(pulled.values())
        .map(|(a, b)| h * (a - b))
        .collect();
    Field::new(grid, n, values)
}
