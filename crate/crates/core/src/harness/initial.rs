//! Library of initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::grid::CircleGrid;

/// Modes used by [`InitialDataSpec::perturbed_constant`].
pub const PERTURBATION_MODES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    Constant,
    GreatCircle { k: i64 },
    BubblePullback { lambda: f64, x0: f64 },
    BandlimitedNoise { amplitude: f64, max_mode: usize, seed: u64 },
    PerturbedConstant { amplitude: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    #[serde(flatten)]
    pub kind: InitialKind,
    /// Target dimension: maps into `S^{n-1} ⊂ R^n`.
    pub n: usize,
}

impl InitialDataSpec {
    pub fn constant(n: usize) -> Self {
        Self { kind: InitialKind::Constant, n }
    }

    pub fn great_circle(k: i64, n: usize) -> Self {
        Self { kind: InitialKind::GreatCircle { k }, n }
    }

    pub fn bubble_pullback(lambda: f64, x0: f64, n: usize) -> Self {
        Self { kind: InitialKind::BubblePullback { lambda, x0 }, n }
    }

    pub fn bandlimited_noise(amplitude: f64, max_mode: usize, seed: u64, n: usize) -> Self {
        Self { kind: InitialKind::BandlimitedNoise { amplitude, max_mode, seed }, n }
    }

    pub fn perturbed_constant(amplitude: f64, seed: u64, n: usize) -> Self {
        Self { kind: InitialKind::PerturbedConstant { amplitude, seed }, n }
    }
}

/// `e₁`, padded to dimension `n`.
fn unit(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

/// The standard degree-one half-harmonic map of the line, composed with the
/// stereographic chart `x ↦ tan((x − x0)/2)/λ`.
pub fn bubble_pullback_value(x: f64, lambda: f64, x0: f64) -> [f64; 2] {
    let th = 0.5 * (x - x0);
    let (s, c) = th.sin_cos();
    let (a, b) = (lambda * c, s);
    let den = a * a + b * b;
    [(a * a - b * b) / den, 2.0 * a * b / den]
}

fn tangent_noise(grid: CircleGrid, n: usize, amplitude: f64, max_mode: usize, seed: u64) -> Result<Field> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) || max_mode == 0 {
        return Err(invalid("noise needs a nonnegative amplitude and max_mode ≥ 1"));
    }
    if max_mode >= grid.len() / 2 {
        return Err(invalid(format!("max_mode {max_mode} is not resolved on M = {}", grid.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = amplitude / (2.0 * max_mode as f64);
    // coefficients of cos kx and sin kx for the tangent components 1..n
    let coeffs: Vec<[f64; 2]> = (0..(n - 1) * max_mode)
        .map(|_| [scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0)])
        .collect();
    Field::from_fn(grid, n, |x| {
        let mut v = unit(n);
        for c in 1..n {
            for k in 1..=max_mode {
                let [a, b] = coeffs[(c - 1) * max_mode + k - 1];
                let kx = k as f64 * x;
                v[c] += a * kx.cos() + b * kx.sin();
            }
        }
        v
    })
    .map(|f| f.normalized_unchecked())
}

/// Samples the initial datum; the result lies on the unit sphere.
pub fn make_initial(spec: &InitialDataSpec, grid: CircleGrid) -> Result<Field> {
    let n = spec.n;
    if !(2..=3).contains(&n) {
        return Err(invalid(format!("target dimension must be 2 or 3, got {n}")));
    }
    match spec.kind {
        InitialKind::Constant => Field::from_fn(grid, n, |_| unit(n)),
        InitialKind::GreatCircle { k } => {
            if k.unsigned_abs() as usize >= grid.len() / 2 {
                return Err(invalid(format!("degree {k} is not resolved on M = {}", grid.len())));
            }
            Field::from_fn(grid, n, |x| {
                let mut v = vec![0.0; n];
                v[0] = (k as f64 * x).cos();
                v[1] = (k as f64 * x).sin();
                v
            })
        }
        InitialKind::BubblePullback { lambda, x0 } => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(invalid(format!("bubble scale must be positive, got {lambda}")));
            }
            Field::from_fn(grid, n, |x| {
                let [a, b] = bubble_pullback_value(x, lambda, x0);
                let mut v = vec![0.0; n];
                v[0] = a;
                v[1] = b;
                v
            })
            .map(|f| f.normalized_unchecked())
        }
        InitialKind::BandlimitedNoise { amplitude, max_mode, seed } => {
            tangent_noise(grid, n, amplitude, max_mode, seed)
        }
        InitialKind::PerturbedConstant { amplitude, seed } => {
            tangent_noise(grid, n, amplitude, PERTURBATION_MODES, seed)
        }
    }
}

/// Seeded coefficients `(a_k, b_k)`, `k = 1..=max_mode`, uniform in `[-1, 1]`.
pub fn trig_coeffs(max_mode: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..max_mode)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// `Σ_k a_k cos kx + b_k sin kx` for coefficients from [`trig_coeffs`].
pub fn eval_trig(coeffs: &[(f64, f64)], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let kx = (k + 1) as f64 * x;
            a * kx.cos() + b * kx.sin()
        })
        .sum()
}

/// A seeded random trigonometric polynomial `Σ_{k ≤ max_mode} a_k cos kx + b_k sin kx`
/// with coefficients uniform in `[-1, 1]` (no mean).
pub fn random_trig(grid: CircleGrid, max_mode: usize, seed: u64) -> Field {
    let coeffs = trig_coeffs(max_mode, seed);
    Field::scalar(grid, |x| eval_trig(&coeffs, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbling::local_energy;
    use crate::frac::sq_grad_density;
    use crate::spectral::half_energy;
    use std::f64::consts::PI;

    fn grid(m: usize) -> CircleGrid {
        CircleGrid::new(m).unwrap()
    }

    #[test]
    fn constant_has_no_energy() {
        let u = make_initial(&InitialDataSpec::constant(3), grid(16)).unwrap();
        assert_eq!(half_energy(&u).unwrap(), 0.0);
    }

    #[test]
    fn great_circle_density() {
        let u = make_initial(&InitialDataSpec::great_circle(1, 3), grid(64)).unwrap();
        let d = sq_grad_density(&u).unwrap();
        assert!(d.values().iter().all(|v| (v - 2.0 * PI).abs() < 1e-10));
    }

    #[test]
    fn bubble_concentrates_as_scale_shrinks() {
        let g = grid(1024);
        let e = |lambda: f64| {
            let u = make_initial(&InitialDataSpec::bubble_pullback(lambda, 1.0, 2), g).unwrap();
            local_energy(&u, 1.0, 0.1).unwrap()
        };
        assert!(e(0.02) > e(0.1));
    }

    #[test]
    fn bubble_has_degree_one_energy() {
        let u = make_initial(&InitialDataSpec::bubble_pullback(0.3, 0.5, 2), grid(256)).unwrap();
        assert!((half_energy(&u).unwrap() - PI).abs() < 1e-8);
    }

    #[test]
    fn noise_is_seeded_and_on_sphere() {
        let g = grid(64);
        let a = make_initial(&InitialDataSpec::perturbed_constant(0.2, 4, 3), g).unwrap();
        let b = make_initial(&InitialDataSpec::perturbed_constant(0.2, 4, 3), g).unwrap();
        let c = make_initial(&InitialDataSpec::perturbed_constant(0.2, 5, 3), g).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.sphere_drift() < 1e-14);
        let w = make_initial(&InitialDataSpec::bandlimited_noise(0.1, 8, 1, 2), g).unwrap();
        assert!(w.sphere_drift() < 1e-14);
    }
}
