use bsq_core::dynamics::{Model, NoisePath, Trajectory};
use bsq_core::malliavin::{assemble_m, cone_min, cone_min_matrix, gram_quadratic_direct, ConeSpec, GramMatrix};
use bsq_core::variational::LinearFlow;
use bsq_core::{Exec, PhysParams, SpectralState};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn trajectory(n: usize) -> Trajectory {
    let p = PhysParams::new(1.0, 1.0, 1.0);
    let model = Model::new(p.clone(), n);
    let u0 = SpectralState::random_smooth(n, n, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(17));
    model.evolve(&u0, 0.5, &NoisePath::generate(18, p.d(), 0.01, 50)).unwrap()
}

fn gram() -> &'static GramMatrix {
    static G: OnceLock<GramMatrix> = OnceLock::new();
    G.get_or_init(|| {
        let tr = trajectory(3);
        let flow = LinearFlow::new(&tr, 0, 50).unwrap();
        assemble_m(&flow, 0, 50, Exec::available()).unwrap()
    })
}

#[test]
fn gram_matrix_matches_direct_integral() {
    let tr = trajectory(3);
    let flow = LinearFlow::new(&tr, 0, 50).unwrap();
    let m = assemble_m(&flow, 0, 50, Exec::Serial).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let phi = SpectralState::random_smooth(3, 3, 1.0, 0.0, &mut rng);
        let direct = gram_quadratic_direct(&flow, 0, 50, &phi).unwrap();
        assert!((m.quadratic(&phi) - direct).abs() <= 1e-8 * direct, "{} vs {direct}", m.quadratic(&phi));
    }
}

#[test]
fn full_cone_is_the_minimum_eigenvalue() {
    let m = gram();
    // Radius 2·n_trunc reaches the corners of the box, so P_N is the identity.
    let (v, _) = cone_min(m, ConeSpec::new(1.0, 2 * m.n_trunc).unwrap()).unwrap();
    let eig = m.min_eigenvalue();
    assert!((v - eig).abs() <= 1e-12 * m.trace(), "{v} vs {eig}");
}

#[test]
fn cone_min_does_not_increase_as_alpha_shrinks() {
    let m = gram();
    let values: Vec<f64> = [1.0, 0.75, 0.5, 0.25].iter().map(|&a| cone_min(m, ConeSpec::new(a, 1).unwrap()).unwrap().0).collect();
    let tol = 1e-12 * m.trace();
    assert!(values.windows(2).all(|w| w[1] <= w[0] + tol), "{values:?}");
}

#[test]
fn identity_has_cone_min_one() {
    for alpha in [0.1, 0.5, 1.0] {
        let low: Vec<bool> = (0..12).map(|i| i % 3 == 0).collect();
        let r = cone_min_matrix(&DMatrix::identity(12, 12), &low, alpha).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "{alpha}: {}", r.value);
    }
}

#[test]
fn regularized_solve_tends_to_identity_for_large_beta() {
    let m = gram();
    let xi = SpectralState::random_smooth(3, 3, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(3));
    let p = &m.params;
    let mut prev = f64::INFINITY;
    for beta in [1e2, 1e4, 1e6, 1e8] {
        let r = m.regularized_solve(beta, &xi).unwrap().scaled(beta);
        let gap = (&r - &xi).weighted_norm(p) / xi.weighted_norm(p);
        assert!(gap < prev, "{beta}: {gap}");
        prev = gap;
    }
    assert!(prev < 1e-6);
}

fn psd(entries: &[f64], n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(n, n, entries);
    let m = &a * a.transpose();
    (&m + m.transpose()) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cone_min_is_sandwiched(entries in prop::collection::vec(-1.0f64..1.0, 400), mask in prop::collection::vec(any::<bool>(), 20), alpha in 0.05f64..1.0) {
        prop_assume!(mask.iter().any(|b| *b));
        let m = psd(&entries, 20);
        let r = cone_min_matrix(&m, &mask, alpha).unwrap();
        let eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
        let sel: Vec<usize> = (0..20).filter(|i| mask[*i]).collect();
        let block = DMatrix::from_fn(sel.len(), sel.len(), |a, b| m[(sel[a], sel[b])]);
        let block_min = SymmetricEigen::new(block).eigenvalues.min();
        let tol = 1e-10 * m.amax();
        prop_assert!(r.value >= eig - tol, "{} < {}", r.value, eig);
        prop_assert!(r.value <= block_min + tol, "{} > {}", r.value, block_min);
        let x = &r.argmin;
        prop_assert!((x.norm() - 1.0).abs() < 1e-9);
        prop_assert!((x.dot(&(&m * x)) - r.value).abs() <= tol);
        let low: f64 = sel.iter().map(|&i| x[i] * x[i]).sum();
        prop_assert!(low >= alpha - 1e-8);
    }

    #[test]
    fn cone_min_is_monotone_in_alpha(entries in prop::collection::vec(-1.0f64..1.0, 100), a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let m = psd(&entries, 10);
        let low: Vec<bool> = (0..10).map(|i| i < 4).collect();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let v_lo = cone_min_matrix(&m, &low, lo).unwrap().value;
        let v_hi = cone_min_matrix(&m, &low, hi).unwrap().value;
        prop_assert!(v_lo <= v_hi + 1e-10 * m.amax(), "{} > {}", v_lo, v_hi);
    }

    #[test]
    fn full_alpha_is_the_block_minimum(entries in prop::collection::vec(-1.0f64..1.0, 64)) {
        let m = psd(&entries, 8);
        let low = [true, false, true, true, false, false, true, false];
        let sel = [0usize, 2, 3, 6];
        let block = DMatrix::from_fn(4, 4, |a, b| m[(sel[a], sel[b])]);
        let expect = SymmetricEigen::new(block).eigenvalues.min();
        let v = cone_min_matrix(&m, &low, 1.0).unwrap().value;
        prop_assert!((v - expect).abs() <= 1e-12 * m.amax().max(1.0));
    }

    #[test]
    fn regularized_residual_is_a_contraction(seed in any::<u64>(), beta in 1e-4f64..1e3) {
        let m = gram();
        let xi = SpectralState::random_smooth(3, 3, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let r = m.regularized_solve(beta, &xi).unwrap().scaled(beta);
        let p = &m.params;
        prop_assert!(r.weighted_norm(p) <= xi.weighted_norm(p) * (1.0 + 1e-10));
    }
}
