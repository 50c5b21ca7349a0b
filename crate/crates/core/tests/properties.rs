use mean_energy::bounds::{
    constants_for, flip_for_high_energy, ln_tail_bound, required_epsilon, tail_bound,
};
use mean_energy::canonical::{detmax_state, qubit_exact_tail, qubit_exponential_bound};
use mean_energy::experiments::{estimate_reduced_dm, tail_curve};
use mean_energy::roots::{bisect_increasing, DEFAULT_MAX_ITER};
use mean_energy::rng::RngSpec;
use mean_energy::sampler::sample_sphere;
use mean_energy::spectrum::{
    compute_means, concentration_shift_solve, harmonic_residual, harmonic_shift_solve, Spectrum,
};
use mean_energy::Error;
use proptest::prelude::*;

fn levels() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..20.0, 2..12)
}

fn spectrum() -> impl Strategy<Value = Spectrum> {
    (levels(), prop::collection::vec(1u64..50, 12)).prop_filter_map("distinct levels", |(l, d)| {
        let degs = d[..l.len()].to_vec();
        Spectrum::with_degeneracies(l, degs).ok().filter(|s| !s.all_equal())
    })
}

fn harmonic_of(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (w, inv) = values.fold((0.0, 0.0), |(w, i), (e, d)| (w + d, i + d / e));
    w / inv
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn power_means_are_ordered(s in spectrum()) {
        let m = compute_means(&s);
        let (h, q) = (m.e_harm.unwrap(), m.e_quad.unwrap());
        let slack = 1e-12 * m.e_max;
        prop_assert!(m.e_min <= q + slack);
        prop_assert!(q <= h + slack);
        prop_assert!(h <= m.e_arith + slack);
        prop_assert!(m.e_arith <= m.e_max + slack);
    }

    #[test]
    fn harmonic_shift_meets_its_condition(s in spectrum(), frac in 0.001f64..0.999) {
        let e = s.min() + frac * (s.arithmetic_mean() - s.min());
        let x = harmonic_shift_solve(&s, e, 1e-12).unwrap();
        let direct = harmonic_of(s.weighted().map(|(l, w)| (l + x, w)));
        prop_assert!((direct - (e + x)).abs() <= 1e-12 * (e + x) * 4.0);
        prop_assert!(x > -s.min());
    }

    #[test]
    fn harmonic_residual_is_monotone_and_bisects(s in spectrum(), frac in 0.01f64..0.99) {
        let e = s.min() + frac * (s.arithmetic_mean() - s.min());
        let lo = -s.min() + 1e-9;
        let xs: Vec<f64> = (0..40).map(|i| lo + (i as f64).powi(2) * 0.05).collect();
        let r: Vec<f64> = xs.iter().map(|&x| harmonic_residual(&s, e, x)).collect();
        prop_assert!(r.windows(2).all(|w| w[0] <= w[1] + 1e-12 * w[1].abs().max(1.0)));
        let solved = harmonic_shift_solve(&s, e, 1e-12).unwrap();
        let mut width = 1.0;
        while harmonic_residual(&s, e, lo + width) <= 0.0 {
            width *= 2.0;
        }
        let hi = lo + width;
        let b = bisect_increasing(|x| harmonic_residual(&s, e, x), -s.min(), hi, DEFAULT_MAX_ITER);
        // nearly equal levels make the residual flat, so compare residuals
        let tol = 4e-12 * (e + solved);
        prop_assert!(harmonic_residual(&s, e, solved).abs() <= tol);
        prop_assert!(harmonic_residual(&s, e, b).abs() <= tol.max(4e-12 * (e + b)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn feasibility_matches_required_epsilon(
        l in prop::collection::vec(0.5f64..4.0, 3..6),
        mult in 400u64..3000,
        frac in 0.05f64..0.6,
        eps in 0.2f64..8.0,
    ) {
        let Ok(s) = Spectrum::uniform(l, mult) else { return Ok(()) };
        prop_assume!(!s.all_equal());
        let e = s.min() + frac * (s.arithmetic_mean() - s.min());
        let Ok(frame) = concentration_shift_solve(&s, e, eps, 1e-13) else { return Ok(()) };
        match constants_for(&s, e, eps) {
            Ok(k) => {
                prop_assert!(eps > required_epsilon(&k.frame));
                prop_assert!(k.a > 0.0 && k.c > 0.0);
            }
            Err(Error::InfeasibleEpsilon { .. }) => prop_assert!(eps <= required_epsilon(&frame)),
            Err(_) => {}
        }
    }

    #[test]
    fn tail_bound_decreases_in_t(mult in 500u64..5000, t in 0.01f64..3.0, dt in 0.0f64..1.0) {
        let s = Spectrum::uniform(vec![1.0, 2.0, 3.0], mult).unwrap();
        let k = constants_for(&s, 1.5, 2.0).unwrap();
        let t0 = t.max(1.0 / (4.0 * k.n as f64));
        prop_assert!(ln_tail_bound(&k, t0 + dt) <= ln_tail_bound(&k, t0));
        let (a, b) = (tail_bound(&k, t0 + dt, 1.0), tail_bound(&k, t0, 1.0));
        prop_assert!(a <= b || (a.is_infinite() && b.is_infinite()));
    }

    #[test]
    fn flipping_twice_is_identity(l in levels(), frac in 0.01f64..0.99) {
        let s = Spectrum::new(l).unwrap();
        prop_assume!(!s.all_equal());
        let e = s.arithmetic_mean() + frac * (s.max() - s.arithmetic_mean());
        prop_assume!(e > s.arithmetic_mean() && e < s.max());
        let (f, fe) = flip_for_high_energy(&s, e).unwrap();
        prop_assert_eq!(f.negated(), s);
        prop_assert_eq!(-fe, e);
        prop_assert!(fe < f.arithmetic_mean());
    }

    #[test]
    fn detmax_beats_feasible_perturbations(
        l in prop::collection::vec(0.0f64..5.0, 3..6),
        frac in 0.05f64..0.95,
        dir in prop::collection::vec(-1.0f64..1.0, 6),
        step in 1e-4f64..1e-2,
    ) {
        let s = Spectrum::new(l.clone()).unwrap();
        prop_assume!(s.levels().len() == l.len() && !s.all_equal());
        let e = s.min() + frac * (s.max() - s.min());
        let rho = detmax_state(&l, e, 1e-13).unwrap();
        let p = rho.diagonal();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!((p.iter().zip(&l).map(|(x, y)| x * y).sum::<f64>() - e).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        // project the direction onto {sum v = 0, sum v E = 0}
        let d = l.len();
        let mut v: Vec<f64> = dir[..d].to_vec();
        let ones = vec![1.0; d];
        let mean = l.iter().sum::<f64>() / d as f64;
        let centered: Vec<f64> = l.iter().map(|x| x - mean).collect();
        for basis in [&ones, &centered] {
            let nb: f64 = basis.iter().map(|x| x * x).sum();
            let proj: f64 = v.iter().zip(basis.iter()).map(|(a, b)| a * b).sum::<f64>() / nb;
            for (vi, bi) in v.iter_mut().zip(basis.iter()) {
                *vi -= proj * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let q: Vec<f64> = p.iter().zip(&v).map(|(x, vi)| x + step * vi / norm).collect();
        prop_assume!(q.iter().all(|&x| x > 0.0));
        let ld = |x: &[f64]| x.iter().map(|y| y.ln()).sum::<f64>();
        prop_assert!(ld(&q) <= ld(&p) + 1e-12);
    }

    #[test]
    fn qubit_tail_below_exponential_bound(
        e2 in -3.0f64..3.0,
        gap in 0.1f64..5.0,
        frac in 0.01f64..0.99,
        dim_b in 2usize..200,
        eps in 0.0f64..1.2,
    ) {
        let e1 = e2 + gap;
        let e = e2 + frac * 0.5 * gap;
        prop_assume!(e > e2 && e < 0.5 * (e1 + e2));
        let exact = qubit_exact_tail(e1, e2, e, dim_b, eps).unwrap();
        let bound = qubit_exponential_bound(e1, e2, e, dim_b, eps).unwrap();
        prop_assert!((0.0..=1.0).contains(&exact));
        prop_assert!(exact <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn exceedance_is_non_increasing(values in prop::collection::vec(-5.0f64..5.0, 1..200),
                                    mut ts in prop::collection::vec(0.0f64..6.0, 1..20)) {
        ts.sort_by(f64::total_cmp);
        let c = tail_curve(&values, None, &ts).unwrap();
        prop_assert!(c.exceedance.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(c.exceedance.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn reduced_states_are_density_matrices(seed in any::<u64>(), da in 1usize..5, db in 1usize..8, count in 1usize..40) {
        let b = sample_sphere(da * db, count, RngSpec::new(seed, 0)).unwrap();
        let rho = estimate_reduced_dm(&b, da, db).unwrap();
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        prop_assert!(rho.is_hermitian(1e-12));
        prop_assert!(rho.eigenvalues().iter().all(|&x| x > -1e-12));
    }
}
