use dbm_edge::comparison::{build_coefficients, equilibrium_window, evolve, OperatorPath, Part};
use dbm_edge::coupling::noise::NoiseSource;
use dbm_edge::coupling::sup_difference;
use dbm_edge::dbm::{drift, ParticleState, RegularizationConfig, Trajectory};
use dbm_edge::semicircle::{density, stieltjes, SemicircleModel};
use num_complex::Complex64;
use proptest::prelude::*;

fn ordered(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..2.0, n).prop_map(|gaps| {
        let mut x = -5.0;
        gaps.iter()
            .map(|g| {
                x += g;
                x
            })
            .collect()
    })
}

fn trajectory(rows: Vec<Vec<f64>>) -> Trajectory {
    Trajectory {
        n: rows[0].len(),
        beta: 2.0,
        dt_base: 0.1,
        edge_offset: 0.0,
        steps: (0..rows.len() as u64).collect(),
        times: (0..rows.len()).map(|s| 0.1 * s as f64).collect(),
        positions: rows,
        rejections: 0,
        floor_crossings: 0,
    }
}

fn rows(len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_inverts_cdf(n in 2usize..5000, frac in 0.0f64..1.0) {
        let model = SemicircleModel::default();
        let i = 1 + ((n - 1) as f64 * frac) as usize;
        let g = model.quantile(i, n).unwrap();
        prop_assert!((model.cdf(g) - i as f64 / n as f64).abs() < 1e-10);
    }

    #[test]
    fn quantiles_increase(n in 2usize..3000) {
        let model = SemicircleModel::default();
        let q: Vec<f64> = (1..=n).step_by(n / 50 + 1).map(|i| model.quantile(i, n).unwrap()).collect();
        prop_assert!(q.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn density_is_even(e in -3.0f64..3.0) {
        prop_assert_eq!(density(e), density(-e));
        prop_assert!(density(e) >= 0.0);
    }

    #[test]
    fn stieltjes_solves_its_quadratic(re in -6.0f64..6.0, im in 1e-4f64..5.0) {
        let z = Complex64::new(re, im);
        let m = stieltjes(z).unwrap();
        prop_assert!((m * m + z * m + 1.0).norm() < 1e-10 * (1.0 + m.norm() * z.norm()));
        prop_assert!(m.im > 0.0);
    }

    #[test]
    fn mean_field_tail_increases_toward_the_cutoff(a in 0.0f64..20.0, step in 0.5f64..5.0) {
        let model = SemicircleModel::default();
        let n = 1_000_000;
        let gc = 60.0;
        let lo = model.mean_field_tail(a, gc, n).unwrap();
        let hi = model.mean_field_tail(a + step, gc, n).unwrap();
        // every term ν(x)/(a − x) with x > γ_c decreases as a moves toward γ_c
        prop_assert!(hi < lo);
    }

    #[test]
    fn drift_is_antisymmetric_under_reflection(x in ordered(6)) {
        let reg = RegularizationConfig { epsilon: 0.0, dt_base: 1e-3, dt_min: 1e-6 };
        let reflected: Vec<f64> = x.iter().rev().map(|v| -v).collect();
        let a = drift(&ParticleState::new(x, 2.0).unwrap(), &reg);
        let b = drift(&ParticleState::new(reflected, 2.0).unwrap(), &reg);
        for (p, q) in a.iter().zip(b.iter().rev()) {
            prop_assert!((p + q).abs() < 1e-12 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn noise_ignores_the_system_size(seed: u64, i in 1usize..4096, k in 0u64..1_000_000) {
        // two consumers with the same (seed, dt) see the same increments whatever their N
        let small = NoiseSource::new(seed, 1e-3);
        let large = NoiseSource::new(seed, 1e-3);
        prop_assert_eq!(small.increment(i, k).to_bits(), large.increment(i, k).to_bits());
        let halves = small.sub_increment(i, k, 1, 0) + small.sub_increment(i, k, 1, 1);
        prop_assert!((halves - small.increment(i, k)).abs() < 1e-15);
    }

    #[test]
    fn sup_difference_is_a_metric(a in rows(4), b in rows(4), c in rows(4)) {
        let (ta, tb, tc) = (trajectory(a), trajectory(b), trajectory(c));
        let w = (0.0, 1.0);
        let ab = sup_difference(&ta, &tb, 3, w).unwrap();
        let ba = sup_difference(&tb, &ta, 3, w).unwrap();
        let bc = sup_difference(&tb, &tc, 3, w).unwrap();
        let ac = sup_difference(&ta, &tc, 3, w).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(sup_difference(&ta, &ta, 3, w).unwrap(), 0.0);
        prop_assert!(ac <= ab + bc + 1e-15);
    }

    #[test]
    fn semigroup_is_positive_and_contracting(
        k in 4usize..24,
        shifts in prop::collection::vec(-0.2f64..0.2, 48),
        w0 in prop::collection::vec(-1.0f64..1.0, 24),
    ) {
        let n = 1_000_000;
        let (q, gc) = equilibrium_window(k, n, 0.1).unwrap();
        let mut x: Vec<f64> = q.iter().zip(&shifts).map(|(a, s)| a + s).collect();
        let mut y: Vec<f64> = q.iter().zip(&shifts[24..]).map(|(a, s)| a + s).collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let op = build_coefficients(&x, &y, gc, n, 0.0, 0.1).unwrap();
        let path = OperatorPath::Frozen(op);
        let w0 = &w0[..k];
        let w = evolve(&path, Part::Full, w0, 0.0, 0.3).unwrap();
        for p in [1.0, 2.0] {
            let norm = |v: &[f64]| v.iter().map(|a| a.abs().powf(p)).sum::<f64>().powf(1.0 / p);
            prop_assert!(norm(&w) <= norm(w0) + 1e-10);
        }
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        prop_assert!(sup(&w) <= sup(w0) + 1e-10);
        let pos: Vec<f64> = w0.iter().map(|a| a.abs()).collect();
        prop_assert!(evolve(&path, Part::Full, &pos, 0.0, 0.3).unwrap().iter().all(|&v| v >= 0.0));
    }
}
