//! The control operators `A_{s,t}`, `A*_{s,t}`, the Malliavin matrix
//! `M_{s,t} = A A*`, cone-restricted minimization of `⟨Mφ, φ⟩`, and the
//! regularized control of the linearized flow.
//!
//! Time integrals use the trapezoid rule on the integration grid, and `A*` is
//! the adjoint of the discrete `A` for the matching weighted `L²([s,t])`
//! pairing, so `M = A A*` holds exactly at the discrete level. Matrices are
//! stored in the energy-orthonormal coordinates of [`crate::state::to_orthonormal`].

use crate::dynamics::{grid_index, realization_seed, Model, NoisePath, Trajectory};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::modes::lattice;
use crate::params::PhysParams;
use crate::state::{from_orthonormal, to_orthonormal, SpectralState, MODE_L2};
use crate::stats;
use crate::variational::LinearFlow;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trapezoid weights times `dt` for `nodes` grid points.
pub fn trapezoid_weights(nodes: usize, dt: f64) -> Vec<f64> {
    match nodes {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..nodes).map(|i| if i == 0 || i == nodes - 1 { 0.5 * dt } else { dt }).collect(),
    }
}

/// A `d`-vector control sampled on grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPath {
    pub dt: f64,
    pub d: usize,
    /// Row-major `nodes × d`.
    pub values: Vec<f64>,
}

impl ControlPath {
    pub fn zeros(nodes: usize, d: usize, dt: f64) -> Self {
        Self { dt, d, values: vec![0.0; nodes * d] }
    }

    pub fn nodes(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.values.len() / self.d
        }
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.values[n * self.d..(n + 1) * self.d]
    }

    /// Trapezoid `∫ v·w dr`.
    pub fn l2_inner(&self, other: &Self) -> f64 {
        let w = trapezoid_weights(self.nodes(), self.dt);
        (0..self.nodes()).map(|n| w[n] * self.at(n).iter().zip(other.at(n)).map(|(a, b)| a * b).sum::<f64>()).sum()
    }

    /// Trapezoid `∫ |v|² dr`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_inner(self)
    }
}

/// `(θ slot, α)` of each noise direction.
fn forced_slots(tr: &Trajectory) -> Result<Vec<(usize, f64)>> {
    let n = tr.model.n_trunc();
    tr.params()
        .forcing
        .iter()
        .map(|f| {
            let i = lattice::index_of(f.index, n).ok_or(Error::OutsideTruncation { index: f.index, n_trunc: n })?;
            Ok((2 * i + f.parity as usize, f.alpha))
        })
        .collect()
}

/// `r ↦ σ_θ* K_{r,t}φ = (⟨α_k σ_k, K_{r,t}φ⟩)_k` at each node of `[a, b]`.
pub fn apply_astar(flow: &LinearFlow, a: usize, b: usize, phi: &SpectralState) -> Result<ControlPath> {
    let tr = flow.trajectory();
    let slots = forced_slots(tr)?;
    let d = slots.len();
    let path = flow.adjoint_path(a, b, phi)?;
    let mut out = ControlPath::zeros(b - a + 1, d, tr.dt);
    for (n, k) in path.iter().enumerate() {
        for (q, (slot, alpha)) in slots.iter().enumerate() {
            out.values[n * d + q] = alpha * MODE_L2 * k.theta[*slot];
        }
    }
    Ok(out)
}

/// `A_{a,b} v = ∫ J_{r,b} σ_θ v(r) dr` by the trapezoid rule, accumulated as
/// `ρ ← J_{n,n+1}(ρ + w_n σ_θ v_n)`.
pub fn apply_aop(flow: &LinearFlow, a: usize, b: usize, v: &ControlPath) -> Result<SpectralState> {
    let tr = flow.trajectory();
    if v.nodes() != b - a + 1 || v.d != tr.params().d() {
        return Err(Error::InvalidArgument(format!(
            "control has {} nodes × {} directions, interval needs {} × {}",
            v.nodes(),
            v.d,
            b - a + 1,
            tr.params().d()
        )));
    }
    let w = trapezoid_weights(b - a + 1, tr.dt);
    let sigma = |n: usize| {
        let scaled: Vec<f64> = v.at(n).iter().map(|x| x * w[n]).collect();
        tr.model.noise_vector(&scaled)
    };
    let mut rho = SpectralState::zeros(tr.model.n_trunc());
    for n in a..b {
        rho += &sigma(n - a);
        rho = flow.step(n, &rho);
    }
    rho += &sigma(b - a);
    Ok(rho)
}

/// `M_{s,t}` in energy-orthonormal coordinates.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub n_trunc: usize,
    pub params: PhysParams,
    pub interval: (f64, f64),
    pub steps: usize,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn coords(&self, phi: &SpectralState) -> DVector<f64> {
        DVector::from_vec(to_orthonormal(phi, &self.params))
    }

    pub fn state(&self, c: &DVector<f64>) -> SpectralState {
        from_orthonormal(self.n_trunc, c.as_slice(), &self.params).expect("dimension")
    }

    /// `⟨Mφ, φ⟩`.
    pub fn quadratic(&self, phi: &SpectralState) -> f64 {
        let c = self.coords(phi);
        c.dot(&(&self.entries * &c))
    }

    pub fn apply(&self, phi: &SpectralState) -> SpectralState {
        self.state(&(&self.entries * self.coords(phi)))
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }

    /// `(M + βI)⁻¹ ξ`.
    pub fn regularized_solve(&self, beta: f64, xi: &SpectralState) -> Result<SpectralState> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("β = {beta} must be positive")));
        }
        let shifted = &self.entries + DMatrix::identity(self.dim(), self.dim()) * beta;
        let chol = shifted.cholesky().ok_or_else(|| Error::InvalidArgument("M + βI is not positive definite".into()))?;
        Ok(self.state(&chol.solve(&self.coords(xi))))
    }
}

/// `M_{a,b}` from one backward solve per basis vector:
/// `M = S Sᵀ` with `S_{i,(n,k)} = √w_n α_k ⟨σ_k, K_{n,b} ê_i⟩`.
pub fn assemble_m(flow: &LinearFlow, a: usize, b: usize, exec: Exec) -> Result<GramMatrix> {
    let tr = flow.trajectory();
    let p = tr.params();
    let n_trunc = tr.model.n_trunc();
    let slots = forced_slots(tr)?;
    let d = slots.len();
    let nodes = b - a + 1;
    let dim = 4 * lattice::mode_count(n_trunc);
    let sw: Vec<f64> = trapezoid_weights(nodes, tr.dt).iter().map(|w| w.sqrt()).collect();
    let rows = exec.try_map(dim, |i| -> Result<Vec<f64>> {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        let mut phi = from_orthonormal(n_trunc, &e, p)?;
        let mut row = vec![0.0; nodes * d];
        let record = |row: &mut [f64], n: usize, phi: &SpectralState| {
            for (q, (slot, alpha)) in slots.iter().enumerate() {
                row[(n - a) * d + q] = sw[n - a] * alpha * MODE_L2 * phi.theta[*slot];
            }
        };
        record(&mut row, b, &phi);
        for n in (a..b).rev() {
            phi = flow.step_adjoint(n, &phi);
            record(&mut row, n, &phi);
        }
        Ok(row)
    })?;
    let s = DMatrix::from_fn(dim, nodes * d, |i, j| rows[i][j]);
    let mut entries = &s * s.transpose();
    entries = (&entries + entries.transpose()) * 0.5;
    Ok(GramMatrix { entries, n_trunc, params: p.clone(), interval: (a as f64 * tr.dt, b as f64 * tr.dt), steps: b - a })
}

/// `Σ_k α_k² ∫ ⟨σ_k, K_{r,t}φ⟩² dr` computed directly.
pub fn gram_quadratic_direct(flow: &LinearFlow, a: usize, b: usize, phi: &SpectralState) -> Result<f64> {
    Ok(apply_astar(flow, a, b, phi)?.l2_norm_sq())
}

/// The cone `S_{α,N} = {φ : ‖P_N φ‖² ≥ α‖φ‖²}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    pub alpha: f64,
    pub n: usize,
}

impl ConeSpec {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("cone α = {alpha} must lie in (0, 1]")));
        }
        Ok(Self { alpha, n })
    }

    /// Which orthonormal coordinates belong to `P_N H`.
    pub fn low_mask(&self, n_trunc: usize) -> Vec<bool> {
        let r2 = (self.n * self.n) as i64;
        let half: Vec<bool> = lattice::modes(n_trunc).flat_map(|j| [j.norm_sq() <= r2; 2]).collect();
        half.iter().chain(half.iter()).copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeMin {
    pub value: f64,
    /// Unit minimizer in orthonormal coordinates.
    pub argmin: DVector<f64>,
    /// Whether the constraint `‖Pφ‖² = α` is active.
    pub on_boundary: bool,
    pub multiplier: f64,
}

fn top_eigen(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let e = SymmetricEigen::new(m.clone());
    let i = e.eigenvalues.imax();
    (e.eigenvalues[i], e.eigenvectors.column(i).into_owned())
}

/// Minimizer of `xᵀMx` over unit `x` with `xᵀPx ≥ α`, `P` the coordinate
/// projection onto `low`.
///
/// KKT: either a minimal eigenvector already satisfies the constraint, or
/// `(M − μP)x = λx` with `μ > 0` and `xᵀPx = α`. With `M = VΛVᵀ` and
/// `W = VᵀE` (`E` the selected columns), `x = V(Λ − λ)⁻¹Wy` where `y` is the
/// top eigenvector of `R(λ) = Wᵀ(Λ − λ)⁻¹W` and `μ = 1/‖R(λ)‖`. The constraint
/// value grows monotonically as `λ` decreases below `λ_min`, so `λ` is found
/// by bisection.
pub fn cone_min_matrix(m: &DMatrix<f64>, low: &[bool], alpha: f64) -> Result<ConeMin> {
    let dim = m.nrows();
    if m.ncols() != dim || low.len() != dim {
        return Err(Error::InvalidArgument("cone mask does not match matrix".into()));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("cone α = {alpha} must lie in (0, 1]")));
    }
    let sel: Vec<usize> = (0..dim).filter(|i| low[*i]).collect();
    let r = sel.len();
    if r == 0 {
        return Err(Error::InvalidArgument("cone has no low-mode coordinates".into()));
    }
    let embed = |y: &DVector<f64>| {
        let mut x = DVector::zeros(dim);
        for (c, &i) in sel.iter().enumerate() {
            x[i] = y[c];
        }
        x
    };
    let quad = |x: &DVector<f64>| x.dot(&(m * x));
    if alpha >= 1.0 {
        let block = DMatrix::from_fn(r, r, |a, b| m[(sel[a], sel[b])]);
        let e = SymmetricEigen::new(block);
        let i = e.eigenvalues.imin();
        let x = embed(&e.eigenvectors.column(i).into_owned());
        return Ok(ConeMin { value: quad(&x), argmin: x, on_boundary: true, multiplier: f64::INFINITY });
    }

    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let lam: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v = DMatrix::from_fn(dim, dim, |row, c| eig.eigenvectors[(row, order[c])]);
    // w_i = Eᵀ v_i
    let w: Vec<DVector<f64>> = (0..dim).map(|i| DVector::from_fn(r, |c, _| v[(sel[c], i)])).collect();
    let lam0 = lam[0];
    let cluster: Vec<usize> = (0..dim).take_while(|&i| lam[i] - lam0 <= 1e-12 * scale).collect();

    // Best constraint value inside the minimal eigenspace.
    let wc = DMatrix::from_fn(cluster.len(), r, |i, c| w[cluster[i]][c]);
    let (s_cluster, z) = top_eigen(&(&wc * wc.transpose()));
    if s_cluster >= alpha {
        let x = &v.columns(0, cluster.len()) * z;
        return Ok(ConeMin { value: quad(&x), argmin: x, on_boundary: false, multiplier: 0.0 });
    }
    let degenerate = wc.norm() <= 1e-12;
    let active: Vec<usize> = if degenerate { (cluster.len()..dim).collect() } else { (0..dim).collect() };

    // x(λ) for λ < λ_min (or λ = λ_min when the cluster is excluded).
    let solve = |l: f64| -> (DVector<f64>, f64, f64) {
        let mut rm = DMatrix::zeros(r, r);
        for &i in &active {
            rm += &w[i] * w[i].transpose() / (lam[i] - l);
        }
        let (top, y) = top_eigen(&rm);
        let mut c = DVector::zeros(dim);
        for &i in &active {
            c[i] = w[i].dot(&y) / (lam[i] - l);
        }
        let c = c.normalize();
        let x = &v * &c;
        let s = sel.iter().map(|&i| x[i] * x[i]).sum::<f64>();
        (x, s, 1.0 / top)
    };

    if degenerate {
        let (xt, st, mu) = solve(lam0);
        if st >= alpha {
            // Mix the P-orthogonal minimal eigenvector with the branch at λ_min.
            let t = (alpha / st).sqrt();
            let x = v.column(0) * (1.0 - t * t).sqrt() + xt * t;
            return Ok(ConeMin { value: quad(&x), argmin: x, on_boundary: true, multiplier: mu });
        }
    }

    let hi0 = lam0;
    let mut lo = lam0 - scale;
    let mut step = scale;
    while solve(lo).1 < alpha {
        step *= 2.0;
        lo = lam0 - step;
        if step > 1e30 * scale {
            return Err(Error::InvalidArgument("cone constraint cannot be met".into()));
        }
    }
    let mut hi = hi0;
    let mut best = solve(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if !(mid < hi && mid > lo) {
            break;
        }
        let cur = solve(mid);
        if cur.1 >= alpha {
            lo = mid;
            best = cur;
        } else {
            hi = mid;
        }
        if (best.1 - alpha).abs() <= 1e-10 {
            break;
        }
    }
    let (x, _, mu) = best;
    Ok(ConeMin { value: quad(&x), argmin: x, on_boundary: true, multiplier: mu })
}

/// `min { ⟨Mφ, φ⟩ : ‖φ‖ = 1, φ ∈ S_{α,N} }` and its minimizer.
pub fn cone_min(m: &GramMatrix, cone: ConeSpec) -> Result<(f64, SpectralState)> {
    let r = cone_min_matrix(&m.entries, &cone.low_mask(m.n_trunc), cone.alpha)?;
    Ok((r.value, m.state(&r.argmin)))
}

/// One stage of the regularized control on `[n, n+2]`.
#[derive(Clone, Debug)]
pub struct ControlStage {
    /// Control on `[n, n+1]`; it vanishes on `[n+1, n+2]`.
    pub v: ControlPath,
    /// `J_{n,n+1}ρ_n − A_{n,n+1}v = β(M + βI)⁻¹J_{n,n+1}ρ_n`.
    pub rho_mid: SpectralState,
    /// `ρ_{n+2} = J_{n+1,n+2} ρ_mid`.
    pub rho_next: SpectralState,
    pub gram: GramMatrix,
}

/// `v = A*(M + βI)⁻¹ J ρ_n` on `[n, n+1]` and `ρ_{n+2} = J_{n+1,n+2} β(M + βI)⁻¹ J ρ_n`.
pub fn regularized_control(tr: &Trajectory, n: usize, beta: f64, rho_n: &SpectralState, exec: Exec) -> Result<ControlStage> {
    let unit = grid_index(1.0, tr.dt)?;
    let (a, m, b) = (n * unit, (n + 1) * unit, (n + 2) * unit);
    if b > tr.steps() {
        return Err(Error::OutsideHorizon { s: n as f64, t: (n + 2) as f64, horizon: tr.horizon() });
    }
    let flow = LinearFlow::new(tr, a, b)?;
    let xi = flow.tangent(a, m, rho_n)?;
    let gram = assemble_m(&flow, a, m, exec)?;
    let y = gram.regularized_solve(beta, &xi)?;
    let v = apply_astar(&flow, a, m, &y)?;
    let rho_mid = y.scaled(beta);
    let rho_next = flow.tangent(m, b, &rho_mid)?;
    Ok(ControlStage { v, rho_mid, rho_next, gram })
}

#[derive(Clone, Debug)]
pub struct ControlDecayConfig {
    pub params: PhysParams,
    pub n_trunc: usize,
    pub dt: f64,
    pub beta: f64,
    /// Final even stage `K`.
    pub horizon: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub stages: Vec<usize>,
    /// `log E‖ρ_n‖⁸` per stage.
    pub log_moment: Vec<f64>,
    /// `‖ρ_n‖` per realization and stage.
    pub norms: Vec<Vec<f64>>,
    /// Per-stage factor `exp(slope)` of `log E‖ρ_n‖⁸` against the stage count.
    pub contraction: f64,
    /// 95% percentile bootstrap interval of `contraction`.
    pub ci: (f64, f64),
}

fn contraction_of(norms: &[Vec<f64>], idx: &[usize]) -> (Vec<f64>, f64) {
    let stages = norms.first().map_or(0, |r| r.len());
    let logm: Vec<f64> = (0..stages)
        .map(|s| stats::log_mean_exp(&idx.iter().map(|&i| 8.0 * norms[i][s].ln()).collect::<Vec<_>>()))
        .collect();
    if logm.iter().any(|v| !v.is_finite()) {
        return (logm, 0.0);
    }
    let x: Vec<f64> = (0..stages).map(|s| s as f64).collect();
    let (_, slope) = stats::linear_fit(&x, &logm);
    (logm, slope.exp())
}

/// Monte Carlo estimate of `E‖ρ_n‖⁸` for `n = 0, 2, …, K` along independent
/// trajectories started at rest, with `ρ_0` a random unit direction.
pub fn control_decay_experiment(cfg: &ControlDecayConfig, rho0_scale: f64, exec: Exec) -> Result<DecayReport> {
    if cfg.horizon % 2 != 0 {
        return Err(Error::InvalidArgument(format!("horizon K = {} must be even", cfg.horizon)));
    }
    let model = Model::new(cfg.params.clone(), cfg.n_trunc);
    let steps = grid_index(cfg.horizon as f64, cfg.dt)?;
    let p = &cfg.params;
    let norms = exec.try_map(cfg.samples, |i| -> Result<Vec<f64>> {
        let seed = realization_seed(cfg.seed, i as u64);
        let path = NoisePath::generate(seed, p.d(), cfg.dt, steps);
        let tr = model.evolve(&model.zeros(), cfg.horizon as f64, &path)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let mut rho = SpectralState::random_smooth(cfg.n_trunc, cfg.n_trunc, 1.0, 0.0, &mut rng);
        let nr = rho.weighted_norm(p);
        if nr > 0.0 {
            rho.scale(rho0_scale / nr);
        }
        let mut out = vec![rho.weighted_norm(p)];
        for n in (0..cfg.horizon).step_by(2) {
            rho = regularized_control(&tr, n, cfg.beta, &rho, Exec::Serial)?.rho_next;
            out.push(rho.weighted_norm(p));
        }
        Ok(out)
    })?;
    let all: Vec<usize> = (0..cfg.samples).collect();
    let (log_moment, contraction) = contraction_of(&norms, &all);
    let ci = if contraction == 0.0 {
        (0.0, 0.0)
    } else {
        stats::bootstrap_ci(cfg.samples, 1000, 0.95, cfg.seed, |idx| contraction_of(&norms, idx).1)
    };
    Ok(DecayReport { stages: (0..=cfg.horizon).step_by(2).collect(), log_moment, norms, contraction, ci })
}

/// Adapted integrands for the isometry check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdaptedIntegrand {
    /// `v(t) = c` in every component.
    Constant(f64),
    /// `v(t) = W(t)` componentwise.
    Brownian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItoReport {
    /// Sample mean of `(Σ v·ΔW)²`.
    pub mean_square: f64,
    /// Sample mean of `Σ |v|² dt`.
    pub compensator: f64,
    /// Continuous-time value of `E∫|v|²dt`.
    pub closed_form: f64,
    /// Mean and standard error of `(Σ v·ΔW)² − Σ |v|² dt`.
    pub defect: f64,
    pub std_err: f64,
    pub passes: bool,
}

/// `E(∫ v·dW)² = E∫|v|² dt` for an adapted `v`, with left-point sums.
pub fn ito_isometry_check(v: AdaptedIntegrand, d: usize, horizon: f64, steps: usize, samples: usize, seed: u64, exec: Exec) -> ItoReport {
    let dt = horizon / steps as f64;
    let pairs = exec.map(samples, |i| {
        let path = NoisePath::generate(realization_seed(seed, i as u64), d, dt, steps);
        let mut w = vec![0.0; d];
        let (mut integral, mut comp) = (0.0, 0.0);
        for n in 0..steps {
            let inc = path.increment(n);
            for k in 0..d {
                let vk = match v {
                    AdaptedIntegrand::Constant(c) => c,
                    AdaptedIntegrand::Brownian => w[k],
                };
                integral += vk * inc[k];
                comp += vk * vk * dt;
                w[k] += inc[k];
            }
        }
        (integral * integral, comp)
    });
    let sq: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let cp: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let closed_form = match v {
        AdaptedIntegrand::Constant(c) => c * c * d as f64 * horizon,
        AdaptedIntegrand::Brownian => d as f64 * horizon * horizon / 2.0,
    };
    let defect = stats::mean(&diff);
    let se = stats::std_err(&diff);
    ItoReport {
        mean_square: stats::mean(&sq),
        compensator: stats::mean(&cp),
        closed_form,
        defect,
        std_err: se,
        passes: defect.abs() <= 3.0 * se.max(f64::MIN_POSITIVE),
    }
}
