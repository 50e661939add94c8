use crate::config::ObservableSpec;
use crate::run::{Failure, Run};
use bsq_core::brackets::cascade::{cascade_probe, ChainElement};
use bsq_core::brackets::quadratic::sample_cone;
use bsq_core::brackets::span::generate_span;
use bsq_core::brackets::{bracket_fd, psi_axis_weights, BracketContext, FD_STEP};
use bsq_core::dynamics::{grid_index, Model, NoisePath, Trajectory};
use bsq_core::ergodics::{clt_probe, exp_moment_probe, lln_probe, EnsembleConfig, InitialLaw, Observable, ObservableKind};
use bsq_core::malliavin::{assemble_m, cone_min, control_decay_experiment, ConeSpec, ControlDecayConfig};
use bsq_core::modes::lattice;
use bsq_core::variational::LinearFlow;
use bsq_core::{io, BasisElement, ModeIndex, SpectralState};
use serde_json::json;
use std::collections::HashMap;

/// Closed form and finite differences must agree to this relative level.
pub const BRACKET_TOL: f64 = 1e-7;
/// `[Z, σ]` is constant in `U`; finite differences at different states must agree to this level.
pub const CONSTANCY_TOL: f64 = 1e-8;
pub const RATIO_WINDOW: (f64, f64) = (3.5, 4.5);

fn trajectory(run: &Run, i: usize) -> Result<Trajectory, Failure> {
    let cfg = &run.cfg;
    let model = Model::new(cfg.params.clone(), cfg.n_trunc);
    let path = NoisePath::generate(run.path_seed(i), cfg.params.d(), cfg.dt, grid_index(cfg.horizon, cfg.dt)?);
    Ok(model.evolve(&run.initial_state(i), cfg.horizon, &path)?)
}

pub fn simulate(run: &mut Run) -> Result<(), Failure> {
    let p = run.cfg.params.clone();
    let trajectories = run.exec.try_map(run.cfg.realizations, |i| trajectory(run, i))?;
    let mut rows = Vec::with_capacity(trajectories.len());
    for (i, tr) in trajectories.iter().enumerate() {
        let bytes = io::to_bytes(tr);
        if io::to_bytes(&io::from_bytes(&bytes)?) != bytes {
            return Err(Failure::Check(format!("trajectory {i} does not round-trip through the binary format")));
        }
        let name = format!("trajectory_{i:04}.bsq");
        run.write(&name, &bytes)?;
        let last = tr.states.last().expect("trajectory holds its initial state");
        rows.push(format!("{i},{name},{},{},{:e},{:e}", tr.steps(), tr.horizon(), last.weighted_norm_sq(&p), last.max_abs()));
    }
    run.write_csv("simulate.csv", "realization,file,steps,t_end,energy_final,max_abs_final", &rows)
}

fn rel_err(x: &SpectralState, reference: &SpectralState) -> f64 {
    (x - reference).max_abs() / scale(reference)
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

pub fn brackets_verify(run: &mut Run) -> Result<(), Failure> {
    let radius = run.cfg.probe.radius;
    let n = run.cfg.n_trunc.max(4 * radius + 2);
    let ctx = BracketContext::new(run.cfg.params.clone(), n);
    let g = ctx.params.g;
    let r2 = (radius * radius) as i64;
    let modes: Vec<ModeIndex> = lattice::modes(radius).filter(|j| j.norm_sq() <= r2).collect();
    let mut rng = run.rng(0);
    let states: Vec<SpectralState> = (0..run.cfg.realizations).map(|_| SpectralState::random_smooth(n, 2, 1.0, 1.0, &mut rng)).collect();
    let f = ctx.field_f();
    let e1 = ModeIndex::new(1, 0);
    let (h, h2) = (FD_STEP, FD_STEP / 2.0);
    let mut rows = Vec::new();
    let (mut worst, mut in_window, mut spread) = (0.0f64, 0usize, 0.0f64);
    let mut zs_first: HashMap<(ModeIndex, u8, ModeIndex, u8), SpectralState> = HashMap::new();
    let mut record = |field: &str, j: ModeIndex, m: u8, k: Option<(ModeIndex, u8)>, s: usize, closed: &SpectralState, a: &SpectralState, b: &SpectralState| {
        let (ea, eb) = (rel_err(a, closed), rel_err(b, closed));
        let ratio = ea / eb;
        worst = worst.max(ea).max(eb);
        if ratio >= RATIO_WINDOW.0 && ratio <= RATIO_WINDOW.1 {
            in_window += 1;
        }
        let (k1, k2, mp) = k.map_or((String::new(), String::new(), String::new()), |(k, mp)| (k.j1.to_string(), k.j2.to_string(), mp.to_string()));
        rows.push(format!("{field},{},{},{m},{k1},{k2},{mp},{s},{ea:e},{eb:e},{ratio}", j.j1, j.j2));
    };
    for (s, u) in states.iter().enumerate() {
        for &j in &modes {
            for m in 0..2u8 {
                let sig = ctx.field_sigma(j, m)?;
                record("Y", j, m, None, s, &ctx.y(j, m, u)?, &bracket_fd(&f, &sig, u, h)?, &bracket_fd(&f, &sig, u, h2)?);
                let y = ctx.field_y(j, m);
                record("Z", j, m, None, s, &ctx.z(j, m, u)?, &bracket_fd(&f, &y, u, h)?, &bracket_fd(&f, &y, u, h2)?);
                let psi_fd = |h: f64| -> Result<SpectralState, Failure> {
                    if j.j1 != 0 {
                        let sign = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
                        Ok(bracket_fd(&f, &ctx.field_sigma(j, m + 1)?, u, h)?.scaled(sign / (g * j.j1 as f64)))
                    } else {
                        let mut out = SpectralState::zeros(n);
                        for (a, b, w) in psi_axis_weights(j.j2, m, g) {
                            out.axpy(w, &bracket_fd(&ctx.field_z(j + e1, a), &ctx.field_y(e1, b), u, h)?);
                        }
                        Ok(out)
                    }
                };
                record("psi+J", j, m, None, s, &ctx.psi_with_error(j, m, u)?, &psi_fd(h)?, &psi_fd(h2)?);
                let z = ctx.field_z(j, m);
                for &k in &modes {
                    for mp in 0..2u8 {
                        let sk = ctx.field_sigma(k, mp)?;
                        let fd = bracket_fd(&z, &sk, u, h)?;
                        let closed = ctx.z_sigma(j, m, k, mp)?;
                        record("[Z,sigma]", j, m, Some((k, mp)), s, &closed, &fd, &bracket_fd(&z, &sk, u, h2)?);
                        match zs_first.get(&(j, m, k, mp)) {
                            Some(first) => spread = spread.max((&fd - first).max_abs() / scale(&closed)),
                            None => {
                                zs_first.insert((j, m, k, mp), fd);
                            }
                        }
                        let yk = ctx.field_y(k, mp);
                        record("[Z,Y]", j, m, Some((k, mp)), s, &ctx.z_y(j, m, k, mp, u)?, &bracket_fd(&z, &yk, u, h)?, &bracket_fd(&z, &yk, u, h2)?);
                    }
                }
            }
        }
    }
    let total = rows.len();
    run.write_csv("brackets_verify.csv", "field,j1,j2,m,k1,k2,mp,state,rel_err_h,rel_err_h2,ratio", &rows)?;
    run.write_csv(
        "brackets_verify_summary.csv",
        "cases,max_rel_err,tol,ratio_in_window,zsigma_state_spread,spread_tol",
        &[format!("{total},{worst:e},{BRACKET_TOL:e},{in_window},{spread:e},{CONSTANCY_TOL:e}")],
    )?;
    println!("{total} bracket cases: max rel err {worst:.2e}, {in_window}/{total} halving ratios in [{}, {}], [Z,sigma] spread {spread:.2e}", RATIO_WINDOW.0, RATIO_WINDOW.1);
    if worst > BRACKET_TOL {
        return Err(Failure::Check(format!("closed forms deviate from finite differences by {worst:e} > {BRACKET_TOL:e}")));
    }
    if spread > CONSTANCY_TOL {
        return Err(Failure::Check(format!("[Z,sigma] varies with the state by {spread:e} > {CONSTANCY_TOL:e}")));
    }
    Ok(())
}

pub fn span(run: &mut Run) -> Result<(), Failure> {
    let ledger = generate_span(&run.cfg.forced, run.cfg.probe.n, run.cfg.probe.depth_cap);
    let body = serde_json::to_value(&ledger).map_err(|e| Failure::Validation(vec![e.to_string()]))?;
    run.write_json("span.json", body)?;
    let rows: Vec<String> = ledger.recipes.iter().map(|r| format!("{},{},\"{}\",{}", r.target, r.depth, r.rule, r.prefactor)).collect();
    run.write_csv("span_recipes.csv", "target,depth,rule,prefactor", &rows)?;
    println!(
        "span: {} sigma and {} psi directions at depth {}, {} uncovered",
        ledger.sigma.len(),
        ledger.psi.len(),
        ledger.depth,
        ledger.uncovered.len()
    );
    if !ledger.covers_targets() {
        let missing: Vec<String> = ledger.uncovered.iter().map(BasisElement::to_string).collect();
        return Err(Failure::Check(format!("I_{} not covered: missing {}", run.cfg.probe.n, missing.join(" "))));
    }
    Ok(())
}

pub fn malliavin_probe(run: &mut Run) -> Result<(), Failure> {
    let cfg = &run.cfg;
    let cone = ConeSpec::new(cfg.probe.alpha, cfg.probe.n)?;
    let (s, t) = cfg.probe.interval;
    let (a, b) = (grid_index(s, cfg.dt)?, grid_index(t, cfg.dt)?);
    let ctx = BracketContext::new(cfg.params.clone(), cfg.n_trunc).truncating();
    // Realizations run serially here; assembly parallelizes over columns.
    let mut rows = Vec::new();
    let mut quad_rows = Vec::new();
    let mut failures = Vec::new();
    let mut rng = run.rng(1);
    for i in 0..cfg.realizations {
        let tr = trajectory(run, i)?;
        let flow = LinearFlow::new(&tr, a, b)?;
        let gram = assemble_m(&flow, a, b, run.exec)?;
        let (value, _) = cone_min(&gram, cone)?;
        rows.push(format!("{i},{s},{t},{},{},{value:e},{:e},{:e}", cone.alpha, cone.n, gram.min_eigenvalue(), gram.trace()));
        if !(value > 0.0) {
            failures.push(i);
        }
        let phi = sample_cone(cfg.n_trunc, cfg.probe.n, cfg.probe.alpha, &mut rng, &cfg.params);
        let q = ctx.quad_form_report(cfg.probe.n, cfg.headroom, cfg.probe.alpha, &tr.states[b], &phi)?;
        quad_rows.push(format!("{i},{t},{},{:e},{:e},{:e}", cfg.headroom, q.value, q.lower_bound, q.low_fraction));
    }
    run.write_csv("malliavin_probe.csv", "realization,s,t,alpha,N,cone_min,min_eig,trace", &rows)?;
    run.write_csv("malliavin_quadform.csv", "realization,t,N_tilde,q_value,lower_bound,low_fraction", &quad_rows)?;
    if !failures.is_empty() {
        return Err(Failure::Check(format!("cone_min is not positive for realizations {failures:?}")));
    }
    Ok(())
}

pub fn control_decay(run: &mut Run) -> Result<(), Failure> {
    let cfg = &run.cfg;
    let dc = ControlDecayConfig {
        params: cfg.params.clone(),
        n_trunc: cfg.n_trunc,
        dt: cfg.dt,
        beta: cfg.probe.beta,
        horizon: cfg.probe.stages,
        samples: cfg.realizations,
        seed: run.seed,
    };
    let r = control_decay_experiment(&dc, 1.0, run.exec)?;
    let rows: Vec<String> = r.stages.iter().zip(&r.log_moment).map(|(s, l)| format!("{s},{l:e}")).collect();
    run.write_csv("control_decay.csv", "stage,log_moment8", &rows)?;
    run.write_csv("control_decay_summary.csv", "contraction,ci_low,ci_high", &[format!("{:e},{:e},{:e}", r.contraction, r.ci.0, r.ci.1)])?;
    println!("per-stage factor {:.3e}, 95% interval [{:.3e}, {:.3e}]", r.contraction, r.ci.0, r.ci.1);
    if !(r.ci.1 < 1.0) {
        return Err(Failure::Check(format!("bootstrap interval [{:e}, {:e}] does not exclude 1", r.ci.0, r.ci.1)));
    }
    Ok(())
}

pub fn ergodic_stats(run: &mut Run) -> Result<(), Failure> {
    let cfg = &run.cfg;
    let kind = match cfg.probe.observable {
        ObservableSpec::Mode => ObservableKind::Mode(BasisElement::sigma(1, 0, 0)),
        ObservableSpec::Energy => ObservableKind::WeightedEnergy,
        ObservableSpec::Enstrophy => ObservableKind::Enstrophy,
    };
    let obs = Observable::new(kind).with_varsigma(cfg.probe.varsigma);
    let ens = EnsembleConfig {
        params: cfg.params.clone(),
        n_trunc: cfg.n_trunc,
        dt: cfg.dt,
        samples: cfg.realizations,
        seed: run.seed,
        initial: InitialLaw::Fixed(run.initial_state(0)),
    };
    let horizons = cfg.probe.horizons.clone();
    let eta = cfg.probe.eta;
    let horizons = &horizons;
    let lln = lln_probe(&ens, &obs, horizons, run.exec)?;
    let clt = clt_probe(&ens, &obs, horizons, run.exec)?;
    let rows: Vec<String> = horizons
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let cauchy = if k == 0 { String::new() } else { format!("{:e}", lln.cauchy[k - 1]) };
            let c = &clt[k];
            format!("{h},{:e},{cauchy},{:e},{:e},{:e},{:e}", lln.means[k], c.ks, c.variance, c.variance_ci.0, c.variance_ci.1)
        })
        .collect();
    run.write_csv("ergodic_stats.csv", "horizon,mean,cauchy,ks,variance,variance_ci_low,variance_ci_high", &rows)?;
    let last = clt.last().expect("at least one horizon");
    let hist: Vec<String> = last.histogram.iter().map(|(x, c)| format!("{x:e},{c}")).collect();
    run.write_csv("ergodic_histogram.csv", "bin_center,count", &hist)?;
    let em = exp_moment_probe(&ens, eta, *horizons.last().expect("at least one horizon"), run.exec)?;
    run.write_csv(
        "ergodic_exp_moment.csv",
        "eta,horizon,log_moment,log_bound,ratio,ratio_half",
        &[format!("{},{},{:e},{:e},{:e},{:e}", em.eta, em.horizon, em.log_moment, em.log_bound, em.ratio, em.ratio_half)],
    )?;
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let ks: Vec<f64> = clt.iter().map(|c| c.ks).collect();
    run.write_json(
        "ergodic_trends.json",
        json!({ "lln_cauchy_decreasing": decreasing(&lln.cauchy), "clt_ks_decreasing": decreasing(&ks) }),
    )?;
    Ok(())
}

pub fn cascade(run: &mut Run) -> Result<(), Failure> {
    let cfg = &run.cfg;
    let model = Model::new(cfg.params.clone(), cfg.n_trunc);
    let path = NoisePath::generate(run.path_seed(0), cfg.params.d(), cfg.dt, grid_index(cfg.horizon, cfg.dt)?);
    let mut rng = run.rng(2);
    let phi = sample_cone(cfg.n_trunc, cfg.probe.n, cfg.probe.alpha, &mut rng, &cfg.params);
    let mut chain = Vec::new();
    for &j in &cfg.forced {
        for m in 0..2 {
            chain.extend([ChainElement::Sigma(j, m), ChainElement::Y(j, m), ChainElement::Z(j, m)]);
        }
        for &k in &cfg.forced {
            chain.extend([ChainElement::ZSigma(j, 0, k, 0), ChainElement::ZY(j, 0, k, 0)]);
        }
    }
    let series = cascade_probe(&model, &run.initial_state(0), cfg.horizon, &path, &phi, &chain)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for s in &series {
        for (t, v) in s.times.iter().zip(&s.values) {
            rows.push(format!("\"{}\",{t},{v:e}", s.element));
        }
        summary.push(format!("\"{}\",{:e},{:e},{:e}", s.element, s.sup, s.derivative_residual, s.derivative_scale));
    }
    run.write_csv("cascade.csv", "element,t,value", &rows)?;
    run.write_csv("cascade_summary.csv", "element,sup,derivative_residual,derivative_scale", &summary)
}
