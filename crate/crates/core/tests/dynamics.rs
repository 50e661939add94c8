use bsq_core::dynamics::{grid_index, realization_seed, Model, NoisePath};
use bsq_core::ergodics::{exp_moment_probe, EnsembleConfig, InitialLaw};
use bsq_core::{io, stats, Exec, PhysParams, SpectralState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODE_L2: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::PI;

#[test]
fn deterministic_energy_never_increases() {
    let p = PhysParams::new(0.8, 1.2, 2.0).deterministic();
    let model = Model::new(p.clone(), 8);
    let dt = 0.005;
    for seed in 0..5 {
        let u0 = SpectralState::random_smooth(8, 8, 2.0, 0.5, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut prev = f64::INFINITY;
        model
            .evolve_observed(&u0, 2.0, &NoisePath::zeros(0, dt, 400), |k, u| {
                let e = u.weighted_norm_sq(&p);
                assert!(e <= prev * (1.0 + 1e-12), "step {k}: {e} > {prev}");
                prev = e;
            })
            .unwrap();
    }
}

/// `E‖U(T)‖²` of the linear system started at rest: each forced `σ_k^m`
/// feeds `θ(s) = e^{−bs}` and, through the buoyancy, `ω` with amplitude
/// `g k1 (e^{−bs} − e^{−as})/(a − b)`.
fn ou_second_moment(p: &PhysParams, t: f64) -> f64 {
    let panels = 20_000;
    let h = t / panels as f64;
    p.forcing
        .iter()
        .map(|f| {
            let q = f.index.norm_sq() as f64;
            let (a, b, c) = (p.nu1 * q, p.nu2 * q, p.g * f.index.j1 as f64);
            let density = |s: f64| {
                let phi = if (a - b).abs() > 1e-14 { ((-b * s).exp() - (-a * s).exp()) / (a - b) } else { s * (-a * s).exp() };
                MODE_L2 * (p.zeta() * (c * phi).powi(2) + (-2.0 * b * s).exp())
            };
            let mut sum = density(0.0) + density(t);
            for i in 1..panels {
                sum += density(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            f.alpha * f.alpha * sum * h / 3.0
        })
        .sum()
}

#[test]
fn linear_second_moment_matches_closed_form() {
    let p = PhysParams::new(1.0, 0.5, 1.5);
    let model = Model::new(p.clone(), 2).linear();
    let (dt, t) = (0.002, 1.0);
    let steps = grid_index(t, dt).unwrap();
    let samples = 10_000;
    let energies: Vec<f64> = Exec::available().map(samples, |i| {
        let path = NoisePath::generate(realization_seed(31, i as u64), p.d(), dt, steps);
        model.evolve_observed(&model.zeros(), t, &path, |_, _| {}).unwrap().weighted_norm_sq(&p)
    });
    let (m, se) = (stats::mean(&energies), stats::std_err(&energies));
    let exact = ou_second_moment(&p, t);
    assert!((m - exact).abs() <= 3.0 * se, "{m} ± {se} vs {exact}");
}

#[test]
fn small_eta_exponential_moment_is_stable() {
    let cfg = EnsembleConfig {
        params: PhysParams::new(1.0, 1.0, 1.0),
        n_trunc: 4,
        dt: 0.01,
        samples: 400,
        seed: 8,
        initial: InitialLaw::Fixed(SpectralState::zeros(4)),
    };
    let r = exp_moment_probe(&cfg, 0.01, 2.0, Exec::available()).unwrap();
    assert!(r.log_moment.is_finite() && r.ratio.is_finite());
    assert!(r.stability() < 0.05, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn same_inputs_same_bytes(seed in any::<u64>(), n in 1usize..5) {
        let p = PhysParams::new(1.0, 0.7, 1.3);
        let model = Model::new(p.clone(), n);
        let u0 = SpectralState::random_smooth(n, n, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let path = NoisePath::generate(seed, p.d(), 0.01, 20);
        let a = io::to_bytes(&model.evolve(&u0, 0.2, &path).unwrap());
        let b = io::to_bytes(&model.evolve(&u0, 0.2, &path).unwrap());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(io::to_bytes(&io::from_bytes(&a).unwrap()), a);
    }

    #[test]
    fn coarsened_path_keeps_endpoint(seed in any::<u64>(), factor in 1usize..6) {
        let fine = NoisePath::generate(seed, 3, 0.01, 6 * factor);
        let coarse = fine.coarsen(factor);
        prop_assert_eq!(coarse.steps(), 6);
        for (x, y) in fine.value(fine.steps()).iter().zip(coarse.value(coarse.steps())) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}
