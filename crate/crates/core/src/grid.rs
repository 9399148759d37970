//! Uniform grids on the circle and on a truncated line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intrinsic distance on the circle, `2 |sin((x - y) / 2)|`.
///
/// Arguments are angles in radians and are interpreted modulo `2π`.
pub fn chordal_distance(x: f64, y: f64) -> f64 {
    2.0 * ((x - y) / 2.0).sin().abs()
}

/// `M` equispaced nodes `x_j = 2πj/M` on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleGrid {
    m: usize,
}

impl CircleGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 || m % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "circle grid needs an even node count >= 8, got {m}"
            )));
        }
        Ok(Self { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.spacing() * j as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.node(j)).collect()
    }

    /// Chordal distance between node `x_i` and the half-offset point
    /// `x_i + (m + 1/2) h`. Independent of `i`.
    pub fn offset_distance(&self, m: usize) -> f64 {
        2.0 * ((m as f64 + 0.5) * self.spacing() / 2.0).sin().abs()
    }

    /// All `M` half-offset distances.
    pub fn offset_distances(&self) -> Vec<f64> {
        (0..self.m).map(|m| self.offset_distance(m)).collect()
    }

    /// Signed wavenumber of FFT slot `idx`, in `-M/2 .. M/2 - 1`.
    pub fn wavenumber(&self, idx: usize) -> i64 {
        let m = self.m as i64;
        let i = idx as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// FFT slot of wavenumber `k`; `None` outside the resolved band.
    pub fn slot(&self, k: i64) -> Option<usize> {
        let m = self.m as i64;
        if k < -m / 2 || k >= m / 2 {
            return None;
        }
        Some(k.rem_euclid(m) as usize)
    }

    /// Nodes whose chordal distance to `center` is at most `radius`.
    pub fn ball(&self, center: f64, radius: f64) -> Vec<usize> {
        (0..self.m)
            .filter(|&j| chordal_distance(self.node(j), center) <= radius)
            .collect()
    }
}

/// `M` equispaced nodes `x_j = -L + 2Lj/M` on the truncated line `[-L, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    half_width: f64,
    m: usize,
}

impl LineGrid {
    pub fn new(half_width: f64, m: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "line half-width must be positive, got {half_width}"
            )));
        }
        if m < 16 {
            return Err(Error::InvalidGrid(format!(
                "line grid needs at least 16 nodes, got {m}"
            )));
        }
        Ok(Self { half_width, m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.m as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + self.spacing() * j as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.node(j)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    Circle(CircleGrid),
    Line(LineGrid),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Circle(g) => g.len(),
            Grid::Line(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        match self {
            Grid::Circle(g) => g.spacing(),
            Grid::Line(g) => g.spacing(),
        }
    }

    pub fn node(&self, j: usize) -> f64 {
        match self {
            Grid::Circle(g) => g.node(j),
            Grid::Line(g) => g.node(j),
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        match self {
            Grid::Circle(g) => g.nodes(),
            Grid::Line(g) => g.nodes(),
        }
    }

    pub fn as_circle(&self) -> Result<CircleGrid> {
        match self {
            Grid::Circle(g) => Ok(*g),
            Grid::Line(_) => Err(Error::NotCircleGrid),
        }
    }
}

impl From<CircleGrid> for Grid {
    fn from(g: CircleGrid) -> Self {
        Grid::Circle(g)
    }
}

impl From<LineGrid> for Grid {
    fn from(g: LineGrid) -> Self {
        Grid::Line(g)
    }
}
