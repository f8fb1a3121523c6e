use gelab::diagnostics::{blowup_time_bound, gelation_time_from_series, KernelConstants};
use gelab::measures::Grid;
use gelab::solver_fv::{run, FvConfig};
use gelab::{Kernel, SizeDistribution};
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::geometric(1e-2, 1e3, 12).unwrap()
}

/// Up to 12 atoms in `[0.02, 500]` with positive number weights; atoms
/// sharing a bin are merged by the constructor.
fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.02f64..500.0, 1e-3f64..10.0), 1..12)
}

fn kernels() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        Just(Kernel::differential_sedimentation()),
        (1.0f64..3.0).prop_map(|g| Kernel::sum(g).unwrap()),
        (0.1f64..1.5, 0.1f64..1.5).prop_map(|(a, b)| Kernel::power_difference(a, b).unwrap()),
        (0.1f64..1.5, 0.1f64..1.5).prop_map(|(a, b)| Kernel::abs_difference(a, b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_symmetric_bit_exact(k in kernels(), v in 1e-3f64..1e3, w in 1e-3f64..1e3) {
        prop_assert_eq!(k.evaluate(v, w).unwrap().to_bits(), k.evaluate(w, v).unwrap().to_bits());
        prop_assert!(k.evaluate(v, w).unwrap() >= 0.0);
    }

    #[test]
    fn kernel_homogeneous(k in kernels(), v in 1e-2f64..1e2, w in 1e-2f64..1e2, lambda in 0.1f64..10.0) {
        let gamma = k.degree().unwrap();
        let scaled = k.evaluate(lambda * v, lambda * w).unwrap();
        let expected = lambda.powf(gamma) * k.evaluate(v, w).unwrap();
        prop_assert!((scaled - expected).abs() <= 1e-9 * expected.abs().max(1e-12), "{scaled} vs {expected}");
    }

    #[test]
    fn cutoff_pair_closes_exactly(a in atoms(), r in 0.0f64..600.0) {
        let d = SizeDistribution::from_atoms(grid(), &a).unwrap();
        let (i, j) = d.cutoff_pair(r);
        prop_assert_eq!(i + j, d.mass());
        prop_assert!(i >= 0.0 && j >= 0.0);
    }

    #[test]
    fn moment_root_inequality(a in atoms(), r in 0.1f64..100.0, m in 1.0f64..12.0) {
        let d = SizeDistribution::from_atoms(grid(), &a).unwrap();
        let (lhs, rhs, holds) = d.moment_root_inequality_check(r, m);
        prop_assert!(holds, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn truncated_moment_nonincreasing_in_r(a in atoms(), r in 0.0f64..300.0, dr in 0.0f64..100.0, m in 0.5f64..6.0) {
        let d = SizeDistribution::from_atoms(grid(), &a).unwrap();
        prop_assert!(d.truncated_moment(r + dr, m) <= d.truncated_moment(r, m));
    }

    #[test]
    fn moments_ordered_like_jensen(a in atoms()) {
        // M_1^2 <= M_0 M_2 (Cauchy–Schwarz)
        let d = SizeDistribution::from_atoms(grid(), &a).unwrap();
        let (m0, m1, m2) = (d.moment(0.0).unwrap(), d.moment(1.0).unwrap(), d.moment(2.0).unwrap());
        prop_assert!(m1 * m1 <= m0 * m2 * (1.0 + 1e-12));
    }

    #[test]
    fn csv_round_trip(a in atoms(), gel in 0.0f64..5.0) {
        let mut d = SizeDistribution::from_atoms(grid(), &a).unwrap();
        d.gel_mass = gel;
        let text = d.to_csv();
        let back = SizeDistribution::from_csv(&text).unwrap();
        prop_assert_eq!(back.counts(), d.counts());
        prop_assert_eq!(back.grid(), d.grid());
        prop_assert_eq!(back.gel_mass, gel);
        prop_assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn blowup_bound_antitone_in_tail(factor in 1.0f64..1e6, m in 2.1f64..10.0) {
        let d = SizeDistribution::exponential(grid(), 1.0, 1.0).unwrap();
        let c = KernelConstants { h0: 0.5, g0: 0.2, k: 1.0, gamma: 4.0 / 3.0, crossover: 2.0 };
        let base = blowup_time_bound(&d, 0.1, 4.0, m, c, 1.0).unwrap();
        let inflated = blowup_time_bound(&d.scale_tail(4.0, factor), 0.1, 4.0, m, c, 1.0).unwrap();
        prop_assert!(inflated.bound <= base.bound);
        prop_assert!(base.bound >= base.t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gelation_estimate_monotone_in_epsilon(e1 in 0.001f64..0.05, e2 in 0.001f64..0.05) {
        let cfg = FvConfig { v_min: 1e-2, v_max: 64.0, t_end: 1.0, sample_interval: 0.02, ..FvConfig::default() };
        let init = SizeDistribution::exponential(cfg.grid().unwrap(), 1.0, 1.0).unwrap();
        let traj = run(&init, &Kernel::differential_sedimentation(), &cfg).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = gelation_time_from_series(&traj, lo).unwrap().t_gel_eps;
        let b = gelation_time_from_series(&traj, hi).unwrap().t_gel_eps;
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!(a <= b),
            (None, Some(_)) => prop_assert!(false, "smaller epsilon never crossed"),
            _ => {}
        }
    }
}
