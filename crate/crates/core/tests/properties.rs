use std::f64::consts::PI;

use halfflow::frac::{d_s, l2od_norm};
use halfflow::harness::{eval_trig, trig_coeffs, Command, ExperimentConfig};
use halfflow::spectral::{frac_laplacian, half_energy, heat_semigroup, to_spectral};
use halfflow::{CircleGrid, Field};
use proptest::prelude::*;

fn trig_field(grid: CircleGrid, max_mode: usize, seed: u64) -> Field {
    let c = trig_coeffs(max_mode, seed);
    Field::scalar(grid, |x| eval_trig(&c, x))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn l2od_norm_matches_half_energy(seed in 0u64..1000, max_mode in 1usize..8) {
        let g = CircleGrid::new(64).unwrap();
        let u = trig_field(g, max_mode, seed);
        let du = d_s(&u, 0.5).unwrap();
        let lhs = l2od_norm(&du).powi(2);
        let rhs = 4.0 * PI * half_energy(&u).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn frac_laplacian_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, s in 0.1f64..1.0) {
        let g = CircleGrid::new(32).unwrap();
        let u = trig_field(g, 6, seed);
        let v = trig_field(g, 6, seed + 1);
        let lhs = frac_laplacian(&u.lin_comb(a, &v, 1.0).unwrap(), s).unwrap();
        let rhs = frac_laplacian(&u, s).unwrap().lin_comb(a, &frac_laplacian(&v, s).unwrap(), 1.0).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn heat_semigroup_composes(seed in 0u64..1000, t1 in 0.0f64..0.5, t2 in 0.0f64..0.5) {
        let g = CircleGrid::new(32).unwrap();
        let u = trig_field(g, 8, seed);
        let two = heat_semigroup(&heat_semigroup(&u, t1, 0.5).unwrap(), t2, 0.5).unwrap();
        let one = heat_semigroup(&u, t1 + t2, 0.5).unwrap();
        prop_assert!(two.sub(&one).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn parseval(seed in 0u64..1000) {
        let g = CircleGrid::new(64).unwrap();
        let u = trig_field(g, 10, seed);
        let physical = u.l2_norm().powi(2);
        let spectral = 2.0 * PI * to_spectral(&u).unwrap().power().iter().sum::<f64>();
        prop_assert!(close(physical, spectral, 1e-10), "{physical} vs {spectral}");
    }

    #[test]
    fn half_energy_is_translation_invariant(seed in 0u64..1000, shift in 0usize..64) {
        let g = CircleGrid::new(64).unwrap();
        let u = trig_field(g, 10, seed);
        let a = half_energy(&u).unwrap();
        let b = half_energy(&u.roll(shift)).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn frac_laplacian_commutes_with_rotation(seed in 0u64..1000, shift in 0usize..32) {
        let g = CircleGrid::new(32).unwrap();
        let u = trig_field(g, 6, seed);
        let a = frac_laplacian(&u.roll(shift), 0.5).unwrap();
        let b = frac_laplacian(&u, 0.5).unwrap().roll(shift);
        prop_assert!(a.sub(&b).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn resolved_config_round_trips(seed in 0u64..u64::MAX, m in 8usize..2048, dt in 1e-6f64..1.0) {
        let mut cfg = ExperimentConfig::defaults(Command::Flow).with_seed(seed);
        cfg.set("M", m.to_string()).unwrap();
        cfg.set("dt", format!("{dt:e}")).unwrap();
        let text = cfg.resolved();
        let back = ExperimentConfig::parse(Command::Flow, &text).unwrap();
        prop_assert_eq!(back.resolved(), text);
        prop_assert_eq!(back.get::<usize>("M").unwrap(), m);
        prop_assert_eq!(back.get::<f64>("dt").unwrap(), dt);
    }
}

#[test]
fn single_mode_half_energy() {
    // u = cos(kx): |û(±k)|² = 1/4, so the energy is π k / 2.
    let g = CircleGrid::new(64).unwrap();
    for k in 1..10 {
        let u = Field::scalar(g, |x| (k as f64 * x).cos());
        assert!(close(half_energy(&u).unwrap(), PI * k as f64 / 2.0, 1e-12));
    }
}
