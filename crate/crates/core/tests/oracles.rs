use gelab::solver_fv::{run, FvConfig, TestFunction};
use gelab::solver_mc::{ensemble_tgel, init_system, simulate, simulate_until, Volume};
use gelab::{InitSpec, Kernel, McConfig, ParticleSystem, SizeDistribution};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn two_particle_waiting_time_is_exponential() {
    // one pair, rate K(1, 2)/2 = 3/2 for K = v + v'
    let k = Kernel::sum(1.0).unwrap();
    let waits: Vec<f64> = (0..20_000)
        .map(|seed| {
            let mut s = ParticleSystem::new(vec![Volume::from_f64(1.0), Volume::from_f64(2.0)], seed, 0);
            let log = simulate_until(&mut s, &k, f64::INFINITY, |_| false);
            assert_eq!(log.events.len(), 1);
            assert_eq!(log.events[0].merged().get(), 3.0);
            log.events[0].time
        })
        .collect();
    let (mean, se) = mean_and_se(&waits);
    assert!((mean - 2.0 / 3.0).abs() < 4.0 * se, "mean {mean} se {se}");
    // exponential: P(T > mean) = e^{-1}
    let tail = waits.iter().filter(|&&w| w > 2.0 / 3.0).count() as f64 / waits.len() as f64;
    assert!((tail - (-1f64).exp()).abs() < 0.015, "tail {tail}");
}

#[test]
fn constant_kernel_particle_count_follows_ode() {
    // N(t)/n -> 1/(1 + t/2)
    let k = Kernel::constant(1.0).unwrap();
    let cfg = McConfig { n_particles: 2000, t_end: 2.0, seed: 11, n_replicas: 1, ..McConfig::default() };
    let times = [0.5, 1.0, 2.0];
    let mut per_time = vec![Vec::new(); times.len()];
    for r in 0..12 {
        let mut s = init_system(&InitSpec::Exponential { mean: 1.0 }, &cfg, r).unwrap();
        let log = simulate(&mut s, &k, &cfg);
        for (slot, &t) in per_time.iter_mut().zip(&times) {
            slot.push(log.count_at(t) as f64 / 2000.0);
        }
    }
    for (xs, &t) in per_time.iter().zip(&times) {
        let (mean, se) = mean_and_se(xs);
        let exact = 1.0 / (1.0 + t / 2.0);
        assert!((mean - exact).abs() < 3.0 * se + 1.0 / 2000.0, "t {t}: {mean} vs {exact} (se {se})");
    }
}

#[test]
fn additive_kernel_conserves_mass_in_domain() {
    let cfg =
        FvConfig { v_min: 1e-3, v_max: 1e4, t_end: 1.0, sample_interval: 0.01, max_dt: 0.01, ..FvConfig::default() };
    let init = SizeDistribution::exponential(cfg.grid().unwrap(), 1.0, 1.0).unwrap();
    let traj = run(&init, &Kernel::sum(1.0).unwrap(), &cfg).unwrap();
    assert!(traj.max_ledger_drift() < 1e-12);
    assert!(traj.last().gel_mass < 5e-3 * init.mass());
}

#[test]
fn linear_test_function_is_conserved_mass() {
    // φ(v) = v makes Θ_φ vanish: mass is the integral of a linear φ
    let cfg = FvConfig { v_min: 1e-2, v_max: 1e3, t_end: 0.3, ..FvConfig::default() };
    let init = SizeDistribution::exponential(cfg.grid().unwrap(), 1.0, 1.0).unwrap();
    let traj = run(&init, &Kernel::differential_sedimentation(), &cfg).unwrap();
    let phi = TestFunction::PowerTruncated { m: 1.0, r: 0.0 };
    for s in &traj.states {
        assert!((phi.integrate(s) + s.gel_mass - init.mass()).abs() < 1e-12);
    }
}

#[test]
fn sectional_and_stochastic_agree_on_rain_kernel() {
    // M0(t)/M0(0) from both solvers at t = 0.2, before gelation
    let k = Kernel::differential_sedimentation();
    let t = 0.2;
    let cfg =
        FvConfig { v_min: 1e-4, v_max: 1e4, t_end: t, sample_interval: 0.01, max_dt: 0.002, ..FvConfig::default() };
    let init = SizeDistribution::exponential(cfg.grid().unwrap(), 1.0, 1.0).unwrap();
    let traj = run(&init, &k, &cfg).unwrap();
    let fv_ratio = traj.last().total_number() / init.total_number();

    let n = 2000;
    let mc = McConfig { n_particles: n, t_end: t, seed: 5, n_replicas: 1, ..McConfig::default() };
    let ratios: Vec<f64> = (0..8)
        .map(|r| {
            let mut s = init_system(&InitSpec::Exponential { mean: 1.0 }, &mc, r).unwrap();
            simulate(&mut s, &k, &mc).final_count as f64 / n as f64
        })
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    assert!(fv_ratio < 1.0);
    assert!((mean - fv_ratio).abs() < 3.0 * se + 0.01, "fv {fv_ratio} mc {mean} ± {se}");
}

#[test]
fn ensemble_is_ordered_and_reproducible() {
    let k = Kernel::differential_sedimentation();
    let cfg = McConfig { n_particles: 200, t_end: 20.0, seed: 3, n_replicas: 6, ..McConfig::default() };
    let a = ensemble_tgel(&InitSpec::Exponential { mean: 1.0 }, &k, &cfg).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| ensemble_tgel(&InitSpec::Exponential { mean: 1.0 }, &k, &cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.replicas.iter().enumerate().all(|(i, r)| r.replica == i));
    assert!(a.median.is_some());
}

#[test]
fn blowup_bound_decreases_with_order_on_exponential_tail() {
    use gelab::diagnostics::{blowup_time_bound, KernelConstants};
    let grid = FvConfig { v_min: 1e-3, v_max: 1e3, ..FvConfig::default() }.grid().unwrap();
    let d = SizeDistribution::exponential(grid, 1.0, 1.0).unwrap();
    let c = KernelConstants { h0: 0.5, g0: 0.2, k: 1.0, gamma: 4.0 / 3.0, crossover: 2.0 };
    let bounds: Vec<f64> =
        (3..=12).map(|m| blowup_time_bound(&d, 0.0, 8.0, m as f64, c, d.mass()).unwrap().bound).collect();
    assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{bounds:?}");
}
