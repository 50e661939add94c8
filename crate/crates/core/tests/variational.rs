use bsq_core::dynamics::{grid_index, realization_seed, Model, NoisePath, Trajectory};
use bsq_core::variational::{duality_defect, tangent_norm, AdjointScheme, LinearFlow};
use bsq_core::{PhysParams, SpectralState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trajectory(n: usize, seed: u64, t: f64, dt: f64) -> Trajectory {
    let p = PhysParams::new(1.0, 0.8, 1.2);
    let model = Model::new(p.clone(), n);
    let u0 = SpectralState::random_smooth(n, 3, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    let path = NoisePath::generate(realization_seed(seed, 0), p.d(), dt, grid_index(t, dt).unwrap());
    model.evolve(&u0, t, &path).unwrap()
}

#[test]
fn duality_with_the_discrete_adjoint() {
    let tr = trajectory(8, 1, 0.5, 0.01);
    let flow = LinearFlow::new(&tr, 0, tr.steps()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let xi = SpectralState::random_smooth(8, 8, 1.0, 0.0, &mut rng);
        let phi = SpectralState::random_smooth(8, 8, 1.0, 0.0, &mut rng);
        let d = duality_defect(&flow, 0, tr.steps(), &xi, &phi, AdjointScheme::Exact).unwrap();
        assert!(d <= 1e-8, "{d}");
    }
}

#[test]
fn tangent_flow_is_a_cocycle() {
    let tr = trajectory(6, 3, 0.6, 0.01);
    let flow = LinearFlow::new(&tr, 0, 60).unwrap();
    let p = tr.params().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for r in [1usize, 17, 30, 59] {
        let xi = SpectralState::random_smooth(6, 6, 1.0, 0.0, &mut rng);
        let direct = flow.tangent(0, 60, &xi).unwrap();
        let composed = flow.tangent(r, 60, &flow.tangent(0, r, &xi).unwrap()).unwrap();
        assert!((&direct - &composed).weighted_norm(&p) <= 1e-10 * direct.weighted_norm(&p));
    }
}

#[test]
fn tangent_norm_is_finite_across_realizations() {
    for seed in 0..10 {
        let tr = trajectory(4, 100 + seed, 1.0, 0.01);
        let flow = LinearFlow::new(&tr, 0, tr.steps()).unwrap();
        let norm = tangent_norm(&flow, 0, tr.steps(), None, 20, seed).unwrap();
        assert!(norm.is_finite() && norm > 0.0, "{norm}");
    }
}

#[test]
fn high_modes_contract_more_as_the_cut_grows() {
    let tr = trajectory(8, 5, 1.0, 0.01);
    let flow = LinearFlow::new(&tr, 0, tr.steps()).unwrap();
    let norms: Vec<f64> = [1usize, 2, 4, 6].iter().map(|&c| tangent_norm(&flow, 0, tr.steps(), Some(c), 30, 9).unwrap()).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
}
