//! Acceptance suite: one PASS/FAIL line per criterion. Every tolerance used by
//! a check is a named constant below.

use bsq_core::brackets::lemma::advect_mode;
use bsq_core::brackets::quadratic::sample_cone;
use bsq_core::brackets::span::generate_span;
use bsq_core::brackets::{bracket_fd, psi_axis_weights, BracketContext, FD_STEP};
use bsq_core::dynamics::{grid_index, realization_seed, Model, NoisePath};
use bsq_core::ergodics::{clt_probe, lln_probe, mixing_probe, EnsembleConfig, InitialLaw, MeanReference, Observable};
use bsq_core::malliavin::{assemble_m, cone_min, control_decay_experiment, ito_isometry_check, AdaptedIntegrand, ConeSpec, ControlDecayConfig};
use bsq_core::modes::{lattice, BasisElement, Kind, ModeIndex};
use bsq_core::spectral::advect_b;
use bsq_core::variational::{duality_defect, AdjointScheme, LinearFlow};
use bsq_core::{io, stats, Exec, PhysParams, SpectralState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

const RATIO_WINDOW: (f64, f64) = (3.5, 4.5);
const BRACKET_MATCH_TOL: f64 = 1e-7;
const Z_SIGMA_U_INDEPENDENCE_TOL: f64 = 1e-8;
const BRACKET_RUNTIME_S: f64 = 300.0;
const LEMMA_TOL: f64 = 1e-12;
const SPAN_RUNTIME_S: f64 = 60.0;
const SPAN_DEPTH_CAP: usize = 64;
const TAIL_SLOPE_MAX: f64 = -0.4;
const AFFINE_TOL: f64 = 1e-10;
const DUALITY_TOL: f64 = 1e-6;
const HYPO_RATIO_MIN: f64 = 10.0;
const ENERGY_SLACK_PER_DT: f64 = 5.0;
const ORDER_SLOPE_MIN: f64 = 0.95;
const ITO_SE_MULTIPLE: f64 = 3.0;
const BOOTSTRAP_LEVEL: f64 = 0.95;
const MIXING_RATE_REL_TOL: f64 = 0.1;
const PARALLEL_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

fn sign(e: u8) -> f64 {
    if e % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Max coefficient, or 1 for the zero state.
fn scale(u: &SpectralState) -> f64 {
    let s = u.max_abs();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn rel_err(x: &SpectralState, reference: &SpectralState) -> f64 {
    (x - reference).max_abs() / scale(reference)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

#[derive(Default)]
struct FdTally {
    cases: usize,
    in_window: usize,
    ratios: Vec<f64>,
    max_err: f64,
    worst: String,
}

impl FdTally {
    fn record(&mut self, label: impl Fn() -> String, closed: &SpectralState, fd_h: &SpectralState, fd_h2: &SpectralState) {
        let (e1, e2) = (rel_err(fd_h, closed), rel_err(fd_h2, closed));
        self.cases += 1;
        if e1.max(e2) > self.max_err {
            self.max_err = e1.max(e2);
            self.worst = label();
        }
        let r = e1 / e2;
        self.ratios.push(r);
        if r >= RATIO_WINDOW.0 && r <= RATIO_WINDOW.1 {
            self.in_window += 1;
        }
    }

    fn line(&self, name: &str) -> String {
        format!(
            "{name}: {} cases, max rel err {:.2e} (tol {BRACKET_MATCH_TOL:e}, worst {}), h-halving ratio in [{}, {}] for {}/{} (median {:.3})",
            self.cases,
            self.max_err,
            self.worst,
            RATIO_WINDOW.0,
            RATIO_WINDOW.1,
            self.in_window,
            self.cases,
            median(self.ratios.iter().copied().filter(|r| r.is_finite()).collect())
        )
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let n = 14;
    let ctx = BracketContext::new(PhysParams::new(0.7, 1.3, 1.9), n);
    let g = ctx.params.g;
    let modes: Vec<ModeIndex> = lattice::modes(3).filter(|j| j.norm_sq() <= 9).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let states: Vec<SpectralState> = (0..5).map(|_| SpectralState::random_smooth(n, 2, 1.0, 1.0, &mut rng)).collect();
    let f = ctx.field_f();
    let (h, h2) = (FD_STEP, FD_STEP / 2.0);
    let e1 = ModeIndex::new(1, 0);
    let [mut ty, mut tz, mut tzs, mut tzy, mut tpsi] = std::array::from_fn(|_| FdTally::default());
    let mut zs_first: HashMap<(ModeIndex, u8, ModeIndex, u8), SpectralState> = HashMap::new();
    let mut u_dev = 0.0f64;
    for u in &states {
        for &j in &modes {
            for m in 0..2u8 {
                let label = || format!("j={j} m={m}");
                let s = ctx.field_sigma(j, m).unwrap();
                ty.record(label, &ctx.y(j, m, u).unwrap(), &bracket_fd(&f, &s, u, h).unwrap(), &bracket_fd(&f, &s, u, h2).unwrap());
                let y = ctx.field_y(j, m);
                tz.record(label, &ctx.z(j, m, u).unwrap(), &bracket_fd(&f, &y, u, h).unwrap(), &bracket_fd(&f, &y, u, h2).unwrap());

                let psi_fd = |h: f64| -> SpectralState {
                    if j.j1 != 0 {
                        let s = ctx.field_sigma(j, m + 1).unwrap();
                        bracket_fd(&f, &s, u, h).unwrap().scaled(sign(m + 1) / (g * j.j1 as f64))
                    } else {
                        let mut out = SpectralState::zeros(n);
                        for (a, b, w) in psi_axis_weights(j.j2, m, g) {
                            out.axpy(w, &bracket_fd(&ctx.field_z(j + e1, a), &ctx.field_y(e1, b), u, h).unwrap());
                        }
                        out
                    }
                };
                tpsi.record(label, &ctx.psi_with_error(j, m, u).unwrap(), &psi_fd(h), &psi_fd(h2));

                let z = ctx.field_z(j, m);
                for &k in &modes {
                    for mp in 0..2u8 {
                        let label = || format!("j={j} m={m} k={k} m'={mp}");
                        let s = ctx.field_sigma(k, mp).unwrap();
                        let fd = bracket_fd(&z, &s, u, h).unwrap();
                        let closed = ctx.z_sigma(j, m, k, mp).unwrap();
                        tzs.record(label, &closed, &fd, &bracket_fd(&z, &s, u, h2).unwrap());
                        // Measured against the closed form's scale: many of these brackets vanish.
                        match zs_first.get(&(j, m, k, mp)) {
                            Some(first) => u_dev = u_dev.max((&fd - first).max_abs() / scale(&closed)),
                            None => {
                                zs_first.insert((j, m, k, mp), fd);
                            }
                        }
                        let y = ctx.field_y(k, mp);
                        tzy.record(label, &ctx.z_y(j, m, k, mp, u).unwrap(), &bracket_fd(&z, &y, u, h).unwrap(), &bracket_fd(&z, &y, u, h2).unwrap());
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let tallies = [("Y", &ty), ("Z", &tz), ("[Z,sigma]", &tzs), ("[Z,Y]", &tzy), ("psi+J", &tpsi)];
    let match_ok = tallies.iter().all(|(_, t)| t.max_err <= BRACKET_MATCH_TOL);
    let ratio_ok = tallies.iter().all(|(_, t)| t.in_window == t.cases);
    let indep_ok = u_dev <= Z_SIGMA_U_INDEPENDENCE_TOL;
    let time_ok = elapsed < BRACKET_RUNTIME_S;
    let mut details: Vec<String> = tallies.iter().map(|(name, t)| t.line(name)).collect();
    details.push(format!("[Z,sigma] FD spread across 5 states: {u_dev:.2e} (tol {Z_SIGMA_U_INDEPENDENCE_TOL:e})"));
    details.push(format!("runtime {elapsed:.1}s (limit {BRACKET_RUNTIME_S}s)"));
    details.push(
        "ratio check: all five fields are polynomials of degree <= 2 in U, so central differences carry no O(h^2) term; \
         errors sit at the rounding floor and the ratio cannot approach 4"
            .into(),
    );
    Outcome {
        pass: match_ok && ratio_ok && indep_ok && time_ok,
        summary: format!(
            "closed forms match FD: {}; h-halving ratio in window: {}; [Z,sigma] U-independent: {}; runtime: {}",
            verdict(match_ok),
            verdict(ratio_ok),
            verdict(indep_ok),
            verdict(time_ok)
        ),
        details,
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn criterion_2() -> Outcome {
    let n = 8;
    let modes: Vec<ModeIndex> = lattice::modes(4).filter(|j| j.norm_sq() <= 16).collect();
    let mut max_err = 0.0f64;
    let mut cases = 0;
    for &j in &modes {
        for &k in &modes {
            for m in 0..2u8 {
                for mp in 0..2u8 {
                    for kind in [Kind::Sigma, Kind::Psi] {
                        let psi = SpectralState::basis_vector(BasisElement::new(Kind::Psi, j, m), n).unwrap();
                        let x = SpectralState::basis_vector(BasisElement::new(kind, k, mp), n).unwrap();
                        let product = advect_b(&psi, &x);
                        let closed = advect_mode(j, m, kind, k, mp).to_state(n).unwrap();
                        max_err = max_err.max((&product - &closed).max_abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    Outcome {
        pass: max_err <= LEMMA_TOL,
        summary: format!("{cases} products, max coefficient error {max_err:.2e} (tol {LEMMA_TOL:e})"),
        details: vec![],
    }
}

fn rational_nonzero(prefactor: &str) -> bool {
    let Some(q) = prefactor.split('*').nth(1) else { return false };
    let mut parts = q.split('/');
    let num: Option<i64> = parts.next().and_then(|s| s.parse().ok());
    let den: Option<i64> = parts.next().map_or(Some(1), |s| s.parse().ok());
    matches!((num, den), (Some(a), Some(b)) if a != 0 && b != 0)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let forced = [ModeIndex::new(1, 0), ModeIndex::new(0, 1)];
    let mut ok = true;
    let mut details = Vec::new();
    for n in 1..=5 {
        let ledger = generate_span(&forced, n, SPAN_DEPTH_CAP);
        let exact = ledger.recipes.iter().all(|r| rational_nonzero(&r.prefactor));
        ok &= ledger.covers_targets() && exact;
        details.push(format!(
            "N={n}: {} targets, covered {}, depth {}, {} recipes with exact nonzero prefactors: {}",
            ledger.targets.len(),
            ledger.covers_targets(),
            ledger.depth,
            ledger.recipes.len(),
            exact
        ));
    }
    let negative = generate_span(&[ModeIndex::new(2, 0), ModeIndex::new(0, 2)], 1, SPAN_DEPTH_CAP);
    details.push(format!("negative control {{(2,0),(0,2)}}: covers I_1 = {} ({} uncovered)", negative.covers_targets(), negative.uncovered.len()));
    let elapsed = start.elapsed().as_secs_f64();
    let pass = ok && !negative.covers_targets() && elapsed < SPAN_RUNTIME_S;
    Outcome {
        pass,
        summary: format!("I_N covered for N=1..5: {}; negative control fails to cover: {}; runtime {elapsed:.2}s (limit {SPAN_RUNTIME_S}s)", verdict(ok), verdict(!negative.covers_targets())),
        details,
    }
}

fn criterion_4() -> Outcome {
    let n = 16;
    let ctx = BracketContext::new(PhysParams::new(1.0, 1.0, 1.0), n).truncating();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let states: Vec<SpectralState> = (0..5).map(|_| SpectralState::random_smooth(n, n, 1.0, 2.0, &mut rng)).collect();
    let js = [ModeIndex::new(1, 0), ModeIndex::new(1, 1), ModeIndex::new(2, -1), ModeIndex::new(0, 1), ModeIndex::new(0, 2)];
    let cuts = [2usize, 3, 4, 5, 6, 8, 10, 12];
    let (mut omega_zero, mut affine_err, mut worst_slope) = (true, 0.0f64, f64::NEG_INFINITY);
    for (i, u) in states.iter().enumerate() {
        let v = &states[(i + 1) % states.len()];
        for &j in &js {
            for m in 0..2u8 {
                let ju = ctx.error_term(j, m, u).unwrap();
                omega_zero &= ju.omega.iter().all(|x| *x == 0.0);
                let jv = ctx.error_term(j, m, v).unwrap();
                let lam = 0.3;
                let mix = &u.scaled(lam) + &v.scaled(1.0 - lam);
                let expect = &ju.scaled(lam) + &jv.scaled(1.0 - lam);
                affine_err = affine_err.max(rel_err(&ctx.error_term(j, m, &mix).unwrap(), &expect));
                let (xs, ys): (Vec<f64>, Vec<f64>) =
                    cuts.iter().map(|&c| ((c as f64).ln(), ctx.junk_tail(j, m, u, c).unwrap().1.ln())).unzip();
                worst_slope = worst_slope.max(stats::linear_fit(&xs, &ys).1);
            }
        }
    }
    let pass = omega_zero && affine_err <= AFFINE_TOL && worst_slope <= TAIL_SLOPE_MAX;
    Outcome {
        pass,
        summary: format!(
            "omega part exactly zero: {}; affine defect {affine_err:.2e} (tol {AFFINE_TOL:e}); worst log-log slope of ||Q_N J|| {worst_slope:.3} (max {TAIL_SLOPE_MAX})",
            verdict(omega_zero)
        ),
        details: vec![format!("5 smooth states with coefficient decay (1+|j|^2)^-1 on the full box n_trunc={n}, cuts {cuts:?}")],
    }
}

fn criterion_5() -> Outcome {
    let (n_trunc, big_n, n_tilde, alpha) = (12, 2, 8, 0.5);
    let p = PhysParams::new(1.0, 1.0, 1.0);
    let model = Model::new(p.clone(), n_trunc);
    let dt = 0.01;
    let steps = grid_index(2.0, dt).unwrap();
    let path = NoisePath::generate(55, p.d(), dt, steps);
    let tr = model.evolve(&model.zeros(), 2.0, &path).unwrap();
    let ctx = BracketContext::new(p.clone(), n_trunc).truncating();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gap = f64::INFINITY;
    let mut held = 0;
    let mut total = 0;
    for s in 1..=10 {
        let u = tr.state_at(1.0 + 0.1 * s as f64).unwrap();
        for _ in 0..100 {
            let phi = sample_cone(n_trunc, big_n, alpha, &mut rng, &p);
            let r = ctx.quad_form_report(big_n, n_tilde, alpha, u, &phi).unwrap();
            total += 1;
            worst_gap = worst_gap.min(r.value - r.lower_bound);
            if r.value >= r.lower_bound && r.low_fraction >= alpha - 1e-12 {
                held += 1;
            }
        }
    }
    Outcome {
        pass: held == total,
        summary: format!("<Q phi, phi> >= alpha/2 - sum ||Q_N~ J||^2 held in {held}/{total} cases (smallest margin {worst_gap:.3e})"),
        details: vec![format!("alpha={alpha}, N={big_n}, N~={n_tilde}, n_trunc={n_trunc}, states at t=1.1..2.0 after burn-in from rest")],
    }
}

fn criterion_6() -> Outcome {
    let p = PhysParams::new(1.0, 1.0, 1.0);
    let n = 6;
    let model = Model::new(p.clone(), n);
    let dt2 = 5e-4;
    let mut exact_max = 0.0f64;
    let mut improved = 0;
    let mut ratios = Vec::new();
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
        let u0 = SpectralState::random_smooth(n, 3, 1.0, 1.0, &mut rng);
        let xi = SpectralState::random_smooth(n, n, 1.0, 0.0, &mut rng);
        let phi = SpectralState::random_smooth(n, n, 1.0, 0.0, &mut rng);
        let fine = NoisePath::generate(realization_seed(66, i), p.d(), dt2, grid_index(1.0, dt2).unwrap());
        let mut frozen = [0.0; 2];
        for (slot, path) in [fine.coarsen(2), fine].iter().enumerate() {
            let tr = model.evolve(&u0, 1.0, path).unwrap();
            let flow = LinearFlow::new(&tr, 0, tr.steps()).unwrap();
            exact_max = exact_max.max(duality_defect(&flow, 0, tr.steps(), &xi, &phi, AdjointScheme::Exact).unwrap());
            frozen[slot] = duality_defect(&flow, 0, tr.steps(), &xi, &phi, AdjointScheme::Frozen).unwrap();
        }
        if frozen[1] < frozen[0] {
            improved += 1;
        }
        ratios.push(frozen[0] / frozen[1]);
    }
    let pass = exact_max <= DUALITY_TOL && improved == 50;
    Outcome {
        pass,
        summary: format!(
            "max defect of the discrete adjoint {exact_max:.2e} (tol {DUALITY_TOL:e}) at dt=1e-3 and 5e-4; frozen-coefficient backward scheme improves under dt-halving in {improved}/50 pairs (median defect ratio {:.3})",
            median(ratios)
        ),
        details: vec![],
    }
}

fn criterion_7() -> Outcome {
    let n = 6;
    let p = PhysParams::new(1.0, 1.0, 1.0);
    let dt = 0.01;
    let steps = grid_index(1.0, dt).unwrap();
    let cone = ConeSpec::new(0.5, 1).unwrap();
    let runs: Vec<(f64, f64)> = (0..100u64)
        .map(|r| {
            let path = NoisePath::generate(realization_seed(77, r), p.d(), dt, steps);
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + r);
            let u0 = SpectralState::random_smooth(n, 3, 2.0, 1.0, &mut rng);
            let mut out = [0.0; 2];
            for (slot, q) in [p.clone(), p.without_buoyancy()].into_iter().enumerate() {
                let model = Model::new(q, n);
                let tr = model.evolve(&u0, 1.0, &path).unwrap();
                let flow = LinearFlow::new(&tr, 0, steps).unwrap();
                let gram = assemble_m(&flow, 0, steps, Exec::available()).unwrap();
                out[slot] = cone_min(&gram, cone).unwrap().0;
            }
            (out[0], out[1])
        })
        .collect();
    let positive = runs.iter().filter(|r| r.0 > 0.0).count();
    let with_g = median(runs.iter().map(|r| r.0).collect());
    let without_g = median(runs.iter().map(|r| r.1).collect());
    let pass = positive == runs.len() && with_g >= HYPO_RATIO_MIN * without_g;
    Outcome {
        pass,
        summary: format!(
            "cone_min(M_01, alpha=0.5, N=1) > 0 on {positive}/{} realizations; median {with_g:.3e} with g=1 vs {without_g:.3e} with g=0 (required ratio >= {HYPO_RATIO_MIN})",
            runs.len()
        ),
        details: vec![format!(
            "smallest cone_min with g=1: {:.3e}; n_trunc={n}, dt={dt}, forcing on both parities of (1,0),(0,1)",
            runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min)
        )],
    }
}

fn criterion_8() -> Outcome {
    let p = PhysParams::new(1.0, 1.5, 1.0).deterministic();
    let n = 8;
    let dt = 0.01;
    let model = Model::new(p.clone(), n);
    let kappa = p.kappa();
    let path = NoisePath::zeros(0, dt, grid_index(5.0, dt).unwrap());
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + i);
        let u0 = SpectralState::random_smooth(n, n, 1.0, 1.0, &mut rng);
        let e0 = u0.weighted_norm_sq(&p);
        model
            .evolve_observed(&u0, 5.0, &path, |k, u| {
                let t = k as f64 * dt;
                let bound = (1.0 + ENERGY_SLACK_PER_DT * dt) * (-kappa * t).exp() * e0;
                worst = worst.max(u.weighted_norm_sq(&p) / bound);
            })
            .unwrap();
    }
    Outcome {
        pass: worst <= 1.0,
        summary: format!("max ||U(t)||^2 / ((1+5dt) e^(-kappa t) ||U0||^2) over t<=5 and 20 states = {worst:.4} (must be <= 1)"),
        details: vec![],
    }
}

/// Exact flow of `dU = (−A + G)U dt` on one mode over time `tau`.
fn exact_mode_flow(p: &PhysParams, j: ModeIndex, tau: f64, w: [f64; 2], t: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let q = j.norm_sq() as f64;
    let (a, b, c) = (p.nu1 * q, p.nu2 * q, p.g * j.j1 as f64);
    let phi = if (a - b).abs() > 1e-14 { ((-b * tau).exp() - (-a * tau).exp()) / (a - b) } else { tau * (-a * tau).exp() };
    let (ea, eb) = ((-a * tau).exp(), (-b * tau).exp());
    ([ea * w[0] + c * phi * t[1], ea * w[1] - c * phi * t[0]], [eb * t[0], eb * t[1]])
}

fn exact_flow(p: &PhysParams, u: &SpectralState, tau: f64) -> SpectralState {
    let mut out = u.clone();
    for (i, j) in lattice::modes(u.n_trunc()).enumerate() {
        let (w, t) = exact_mode_flow(p, j, tau, [u.omega[2 * i], u.omega[2 * i + 1]], [u.theta[2 * i], u.theta[2 * i + 1]]);
        out.omega[2 * i..2 * i + 2].copy_from_slice(&w);
        out.theta[2 * i..2 * i + 2].copy_from_slice(&t);
    }
    out
}

fn criterion_9() -> Outcome {
    let p = PhysParams::new(1.0, 2.0, 1.0);
    let n = 3;
    let model = Model::new(p.clone(), n).linear();
    let fine_dt = 1.0 / 16384.0;
    let coarse = [8usize, 16, 32, 64, 128];
    let paths = 100;
    let mut errs = vec![0.0; coarse.len()];
    for r in 0..paths {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + r as u64);
        let u0 = SpectralState::random_smooth(n, n, 1.0, 1.0, &mut rng);
        let fine = NoisePath::generate(realization_seed(99, r as u64), p.d(), fine_dt, 16384);
        // Exact solution: e^{LT}U0 + Σ e^{L(T − s_i − δ/2)} σ ΔW_i.
        let mut noise = SpectralState::zeros(n);
        for i in 0..fine.steps() {
            noise = exact_flow(&p, &noise, fine_dt);
            noise += &exact_flow(&p, &model.noise_vector(fine.increment(i)), 0.5 * fine_dt);
        }
        let exact = &exact_flow(&p, &u0, 1.0) + &noise;
        for (c, &steps) in coarse.iter().enumerate() {
            let path = fine.coarsen(16384 / steps);
            let num = model.evolve_observed(&u0, 1.0, &path, |_, _| {}).unwrap();
            errs[c] += (&num - &exact).weighted_norm(&p) / paths as f64;
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = coarse.iter().zip(&errs).map(|(s, e)| ((1.0 / *s as f64).ln(), e.ln())).unzip();
    let slope = stats::linear_fit(&xs, &ys).1;
    let ito: Vec<_> = [AdaptedIntegrand::Constant(1.0), AdaptedIntegrand::Brownian]
        .into_iter()
        .map(|v| ito_isometry_check(v, 4, 1.0, 100, 100_000, 123, Exec::available()))
        .collect();
    let ito_ok = ito.iter().all(|r| r.defect.abs() <= ITO_SE_MULTIPLE * r.std_err);
    let mut details = vec![format!("strong errors at dt = 1/{coarse:?}: {:?}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>())];
    for (name, r) in ["constant v=1", "v=W"].iter().zip(&ito) {
        details.push(format!(
            "Ito {name}: E(sum v dW)^2 = {:.4}, E sum |v|^2 dt = {:.4}, continuous value {:.4}, defect {:.2e} +- {:.2e}",
            r.mean_square, r.compensator, r.closed_form, r.defect, r.std_err
        ));
    }
    Outcome {
        pass: slope >= ORDER_SLOPE_MIN && ito_ok,
        summary: format!(
            "strong error slope {slope:.3} (min {ORDER_SLOPE_MIN}); Ito isometry within {ITO_SE_MULTIPLE} SE at 1e5 samples: {}",
            verdict(ito_ok)
        ),
        details,
    }
}

fn criterion_10() -> Outcome {
    let cfg = ControlDecayConfig {
        params: PhysParams::new(5.0, 5.0, 0.5),
        n_trunc: 3,
        dt: 0.02,
        beta: 1.0,
        horizon: 10,
        samples: 200,
        seed: 1010,
    };
    let r = control_decay_experiment(&cfg, 1.0, Exec::available()).unwrap();
    let pass = r.contraction < 1.0 && r.ci.1 < 1.0;
    Outcome {
        pass,
        summary: format!(
            "per-stage factor of E||rho_n||^8 = {:.3e}, {:.0}% bootstrap interval [{:.3e}, {:.3e}] (must lie below 1)",
            r.contraction,
            BOOTSTRAP_LEVEL * 100.0,
            r.ci.0,
            r.ci.1
        ),
        details: vec![format!("log E||rho_n||^8 at n = {:?}: {:?}", r.stages, r.log_moment.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>())],
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_11() -> Outcome {
    let cfg = EnsembleConfig {
        params: PhysParams::new(0.5, 0.5, 0.5),
        n_trunc: 4,
        dt: 0.01,
        samples: 1000,
        seed: 11,
        initial: InitialLaw::Bimodal { element: BasisElement::sigma(1, 0, 0), amplitude: 10.0 },
    };
    let obs = Observable::mode(BasisElement::sigma(1, 0, 0));
    let horizons = [2.0, 4.0, 8.0, 16.0];
    let lln = lln_probe(&cfg, &obs, &horizons, Exec::available()).unwrap();
    let clt = clt_probe(&cfg, &obs, &horizons, Exec::available()).unwrap();
    let ks: Vec<f64> = clt.iter().map(|c| c.ks).collect();
    let lln_ok = strictly_decreasing(&lln.cauchy);
    let clt_ok = strictly_decreasing(&ks);

    let det = PhysParams::new(1.0, 2.0, 0.5).deterministic();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let u0s: Vec<SpectralState> = (0..3).map(|_| SpectralState::random_smooth(6, 6, 0.5, 2.0, &mut rng)).collect();
    let mcfg = EnsembleConfig { params: det.clone(), n_trunc: 6, dt: 0.01, samples: 1, seed: 0, initial: InitialLaw::Fixed(u0s[0].clone()) };
    let mix = mixing_probe(&mcfg, &Observable::energy(), &u0s, 10.0, MeanReference::Known(0.0), Exec::available()).unwrap();
    // Energy of the slowest linear modes decays like e^{−2κt}.
    let linear_rate = 2.0 * det.kappa();
    let worst = mix.rates.iter().map(|r| (r - linear_rate).abs() / linear_rate).fold(0.0, f64::max);
    let mix_ok = worst <= MIXING_RATE_REL_TOL;
    Outcome {
        pass: lln_ok && clt_ok && mix_ok,
        summary: format!(
            "LLN Cauchy increments decreasing: {}; CLT KS decreasing: {}; mixing rate within {:.0}% of {linear_rate}: {}",
            verdict(lln_ok),
            verdict(clt_ok),
            MIXING_RATE_REL_TOL * 100.0,
            verdict(mix_ok)
        ),
        details: vec![
            format!("horizons {horizons:?}; RMS |A(2T)-A(T)| = {:?}", lln.cauchy.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()),
            format!("KS distances {:?}", ks.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()),
            format!("fitted energy decay rates {:?}", mix.rates.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()),
        ],
    }
}

fn criterion_12() -> Outcome {
    let p = PhysParams::new(1.0, 1.0, 1.0);
    let model = Model::new(p.clone(), 6);
    let path = NoisePath::generate(1212, p.d(), 0.01, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let u0 = SpectralState::random_smooth(6, 3, 1.0, 1.0, &mut rng);
    let run = || io::to_bytes(&model.evolve(&u0, 1.0, &path).unwrap());
    let bytes_equal = run() == run();

    let cfg = EnsembleConfig {
        params: p.clone(),
        n_trunc: 4,
        dt: 0.01,
        samples: 16,
        seed: 12,
        initial: InitialLaw::Fixed(SpectralState::zeros(4)),
    };
    let obs = Observable::energy();
    let bits = |e: Exec| -> Vec<u64> { lln_probe(&cfg, &obs, &[1.0, 2.0], e).unwrap().means.iter().map(|v| v.to_bits()).collect() };
    let serial_equal = bits(Exec::Serial) == bits(Exec::Serial);

    let tr = model.evolve(&u0, 1.0, &path).unwrap();
    let flow = LinearFlow::new(&tr, 0, 100).unwrap();
    let serial = assemble_m(&flow, 0, 100, Exec::Serial).unwrap();
    let par1 = assemble_m(&flow, 0, 100, Exec::Parallel).unwrap();
    let par2 = assemble_m(&flow, 0, 100, Exec::Parallel).unwrap();
    let scale = serial.entries.amax();
    let gram_dev = (&par1.entries - &serial.entries).amax().max((&par2.entries - &par1.entries).amax()) / scale;
    let ens_dev = lln_probe(&cfg, &obs, &[1.0, 2.0], Exec::Parallel)
        .unwrap()
        .means
        .iter()
        .zip(lln_probe(&cfg, &obs, &[1.0, 2.0], Exec::Serial).unwrap().means)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
        .fold(0.0, f64::max);
    let pass = bytes_equal && serial_equal && gram_dev <= PARALLEL_TOL && ens_dev <= PARALLEL_TOL;
    Outcome {
        pass,
        summary: format!(
            "serial trajectory bytes identical: {}; serial ensemble bits identical: {}; parallel deviation Gram {gram_dev:.1e}, ensemble {ens_dev:.1e} (tol {PARALLEL_TOL:e})",
            verdict(bytes_equal),
            verdict(serial_equal)
        ),
        details: vec![],
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "bracket calculus", criterion_1),
        (2, "advection of single modes", criterion_2),
        (3, "span coverage", criterion_3),
        (4, "structure of the error term", criterion_4),
        (5, "quadratic form lower bound", criterion_5),
        (6, "variational duality", criterion_6),
        (7, "hypoellipticity probe", criterion_7),
        (8, "energy decay oracle", criterion_8),
        (9, "integrator order and Ito isometry", criterion_9),
        (10, "control decay", criterion_10),
        (11, "ergodic probes", criterion_11),
        (12, "reproducibility", criterion_12),
    ];
    let only: Option<u32> = std::env::var("BSQ_ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| Outcome {
            pass: false,
            summary: format!(
                "panicked: {}",
                e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            ),
            details: vec![],
        });
        println!(
            "criterion {id:>2} {:<36} {}  {} [{:.1}s]",
            name,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.summary,
            start.elapsed().as_secs_f64()
        );
        for d in &outcome.details {
            println!("    {d}");
        }
        if !outcome.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
