//! Empirical ergodicity diagnostics: time averages, exponential moments,
//! synchronous coupling, LLN and CLT probes, mixing rates and the `ρ_r` metric.

use crate::dynamics::{grid_index, realization_seed, Model, NoisePath, Trajectory};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::modes::{BasisElement, Kind};
use crate::params::PhysParams;
use crate::state::{SpectralState, MODE_L2};
use crate::stats;

/// Default burn-in fraction of a horizon.
pub const BURN_IN_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableKind {
    /// `⟨U, b⟩` in the energy pairing; zero if `b` is outside the truncation.
    Mode(BasisElement),
    /// `‖U‖²`.
    WeightedEnergy,
    /// `‖U‖²_{H¹}`.
    Enstrophy,
    /// `Σ w_i u_i²` over the flat coefficient vector.
    CustomQuadratic(Vec<f64>),
    Constant(f64),
}

/// An observable of the class `𝒪_ς`: `|Φ(U)| ≤ C exp(ς‖U‖²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub kind: ObservableKind,
    pub varsigma: f64,
}

impl Observable {
    pub fn new(kind: ObservableKind) -> Self {
        Self { kind, varsigma: 0.0 }
    }

    pub fn mode(b: BasisElement) -> Self {
        Self::new(ObservableKind::Mode(b))
    }

    pub fn energy() -> Self {
        Self::new(ObservableKind::WeightedEnergy)
    }

    pub fn with_varsigma(mut self, varsigma: f64) -> Self {
        self.varsigma = varsigma;
        self
    }

    pub fn eval(&self, u: &SpectralState, p: &PhysParams) -> f64 {
        match &self.kind {
            ObservableKind::Mode(b) => match u.get(*b) {
                Ok(c) => MODE_L2 * c * if b.kind == Kind::Psi { p.zeta() } else { 1.0 },
                Err(_) => 0.0,
            },
            ObservableKind::WeightedEnergy => u.weighted_norm_sq(p),
            ObservableKind::Enstrophy => u.sobolev_norm(p, 1.0).powi(2),
            ObservableKind::CustomQuadratic(w) => w.iter().zip(u.to_flat()).map(|(w, x)| w * x * x).sum(),
            ObservableKind::Constant(c) => *c,
        }
    }

    /// `|Φ(U)| exp(−ς‖U‖²)`, whose supremum is `‖Φ‖_ς`.
    pub fn growth_ratio(&self, u: &SpectralState, p: &PhysParams) -> f64 {
        self.eval(u, p).abs() * (-self.varsigma * u.weighted_norm_sq(p)).exp()
    }
}

fn trapezoid_mean(values: &[f64], dt: f64) -> f64 {
    let n = values.len() - 1;
    let s: f64 = values.iter().sum::<f64>() - 0.5 * (values[0] + values[n]);
    s * dt / (n as f64 * dt)
}

fn burn_in_index(burn_in: f64, dt: f64) -> usize {
    (burn_in / dt - 1e-9).ceil().max(0.0) as usize
}

/// `(T − burn_in)⁻¹ ∫_{burn_in}^T Φ(U(t)) dt` by the trapezoid rule; the
/// burn-in is rounded up to the grid.
pub fn time_average(tr: &Trajectory, obs: &Observable, burn_in: f64) -> Result<f64> {
    let a = burn_in_index(burn_in, tr.dt);
    if !(burn_in >= 0.0) || a >= tr.steps() {
        return Err(Error::InvalidArgument(format!("burn-in {burn_in} must lie in [0, {})", tr.horizon())));
    }
    let p = tr.params();
    let v: Vec<f64> = tr.states[a..].iter().map(|u| obs.eval(u, p)).collect();
    Ok(trapezoid_mean(&v, tr.dt))
}

/// Initial data of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    Fixed(SpectralState),
    /// `±amplitude · b`, alternating with the realization index.
    Bimodal { element: BasisElement, amplitude: f64 },
}

impl InitialLaw {
    pub fn sample(&self, n_trunc: usize, i: usize) -> Result<SpectralState> {
        match self {
            InitialLaw::Fixed(u) => Ok(u.clone()),
            InitialLaw::Bimodal { element, amplitude } => {
                let mut u = SpectralState::zeros(n_trunc);
                u.add_element(*element, if i % 2 == 0 { *amplitude } else { -amplitude })?;
                Ok(u)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub params: PhysParams,
    pub n_trunc: usize,
    pub dt: f64,
    pub samples: usize,
    pub seed: u64,
    pub initial: InitialLaw,
}

impl EnsembleConfig {
    pub fn model(&self) -> Model {
        Model::new(self.params.clone(), self.n_trunc)
    }

    fn path(&self, i: usize, steps: usize) -> NoisePath {
        NoisePath::generate(realization_seed(self.seed, i as u64), self.params.d(), self.dt, steps)
    }

    /// `Φ(U_n)` for `n = 0..=steps` on every realization.
    pub fn observe(&self, obs: &Observable, horizon: f64, exec: Exec) -> Result<Vec<Vec<f64>>> {
        let model = self.model();
        let steps = grid_index(horizon, self.dt)?;
        let p = &self.params;
        exec.try_map(self.samples, |i| -> Result<Vec<f64>> {
            let u0 = self.initial.sample(self.n_trunc, i)?;
            let mut out = Vec::with_capacity(steps + 1);
            model.evolve_observed(&u0, horizon, &self.path(i, steps), |_, u| out.push(obs.eval(u, p)))?;
            Ok(out)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpMomentReport {
    pub eta: f64,
    pub horizon: f64,
    /// `log E exp(X)` with `X = η‖U(T)‖² + η(κ/4)e^{−κT/4}∫‖U‖²_{H¹}`.
    pub log_moment: f64,
    /// `η e^{−κT/2}‖U₀‖²`, the log of the bound with `C = 1`.
    pub log_bound: f64,
    /// `E exp(X) / exp(η e^{−κT/2}‖U₀‖²)`, an empirical `C`.
    pub ratio: f64,
    /// The same ratio from the first half of the samples.
    pub ratio_half: f64,
}

impl ExpMomentReport {
    /// Relative change of the ratio under sample doubling.
    pub fn stability(&self) -> f64 {
        (self.ratio - self.ratio_half).abs() / self.ratio.abs().max(f64::MIN_POSITIVE)
    }
}

/// Monte Carlo estimate of `E exp(η‖U(T)‖² + η(κ/4)e^{−κT/4}∫₀ᵀ‖U‖²_{H¹}dt)`
/// against `exp(η e^{−κT/2}‖U₀‖²)` from a fixed initial state.
pub fn exp_moment_probe(cfg: &EnsembleConfig, eta: f64, horizon: f64, exec: Exec) -> Result<ExpMomentReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("η = {eta} must be positive")));
    }
    let p = &cfg.params;
    let kappa = p.kappa();
    let model = cfg.model();
    let steps = grid_index(horizon, cfg.dt)?;
    let w = eta * kappa / 4.0 * (-kappa * horizon / 4.0).exp();
    let exponents = exec.try_map(cfg.samples, |i| -> Result<f64> {
        let u0 = cfg.initial.sample(cfg.n_trunc, i)?;
        let mut h1 = Vec::with_capacity(steps + 1);
        let ut = model.evolve_observed(&u0, horizon, &cfg.path(i, steps), |_, u| h1.push(u.sobolev_norm(p, 1.0).powi(2)))?;
        let integral = if steps == 0 { 0.0 } else { trapezoid_mean(&h1, cfg.dt) * horizon };
        Ok(eta * ut.weighted_norm_sq(p) + w * integral)
    })?;
    let limit = f64::MAX.ln();
    if let Some(x) = exponents.iter().copied().find(|x| !(x.abs() < limit)) {
        return Err(Error::EtaTooLarge { eta, exponent: x });
    }
    let u0 = cfg.initial.sample(cfg.n_trunc, 0)?;
    let log_bound = eta * (-kappa * horizon / 2.0).exp() * u0.weighted_norm_sq(p);
    let log_moment = stats::log_mean_exp(&exponents);
    let half = stats::log_mean_exp(&exponents[..(exponents.len() / 2).max(1)]);
    Ok(ExpMomentReport {
        eta,
        horizon,
        log_moment,
        log_bound,
        ratio: (log_moment - log_bound).exp(),
        ratio_half: (half - log_bound).exp(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    pub times: Vec<f64>,
    /// `E log‖U₁(t) − U₂(t)‖`; `−∞` once some realization has coalesced exactly.
    pub mean_log_diff: Vec<f64>,
    /// `E‖U₁(t) − U₂(t)‖`.
    pub mean_diff: Vec<f64>,
    /// Least-squares slope of `mean_log_diff` over the middle 80% of the window.
    pub slope: f64,
}

/// Indices of the middle 80% of `0..=steps`.
fn middle_window(steps: usize) -> std::ops::RangeInclusive<usize> {
    let a = (steps as f64 * 0.1).round() as usize;
    let b = (steps as f64 * 0.9).round() as usize;
    a..=b.max(a)
}

fn fit_slope(times: &[f64], y: &[f64], window: std::ops::RangeInclusive<usize>) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = window.filter(|&n| y[n].is_finite()).map(|n| (times[n], y[n])).unzip();
    if xs.len() < 2 {
        return f64::NAN;
    }
    stats::linear_fit(&xs, &ys).1
}

/// Evolves both initial states under the same noise paths.
pub fn coupling_decay(cfg: &EnsembleConfig, u01: &SpectralState, u02: &SpectralState, horizon: f64, exec: Exec) -> Result<CouplingReport> {
    let model = cfg.model();
    let steps = grid_index(horizon, cfg.dt)?;
    let p = &cfg.params;
    let diffs = exec.try_map(cfg.samples, |i| -> Result<Vec<f64>> {
        let path = cfg.path(i, steps);
        let a = model.evolve(u01, horizon, &path)?;
        let b = model.evolve(u02, horizon, &path)?;
        Ok(a.states.iter().zip(&b.states).map(|(x, y)| (x - y).weighted_norm(p)).collect())
    })?;
    let times: Vec<f64> = (0..=steps).map(|n| n as f64 * cfg.dt).collect();
    let column = |n: usize| diffs.iter().map(|d| d[n]).collect::<Vec<f64>>();
    let mean_diff: Vec<f64> = (0..=steps).map(|n| stats::mean(&column(n))).collect();
    let mean_log_diff: Vec<f64> = (0..=steps).map(|n| stats::mean(&column(n).iter().map(|d| d.ln()).collect::<Vec<_>>())).collect();
    let slope = fit_slope(&times, &mean_log_diff, middle_window(steps));
    Ok(CouplingReport { times, mean_log_diff, mean_diff, slope })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlnReport {
    pub horizons: Vec<f64>,
    /// Ensemble mean of the time averages at each horizon.
    pub means: Vec<f64>,
    /// RMS over realizations of `A(2T) − A(T)` for consecutive horizons.
    pub cauchy: Vec<f64>,
}

impl LlnReport {
    /// Strictly decreasing Cauchy increments.
    pub fn contracting(&self) -> bool {
        self.cauchy.windows(2).all(|w| w[1] < w[0])
    }
}

fn window_average(values: &[f64], dt: f64, horizon: f64) -> Result<f64> {
    let b = grid_index(horizon, dt)?;
    let a = burn_in_index(BURN_IN_FRACTION * horizon, dt);
    Ok(trapezoid_mean(&values[a..=b], dt))
}

/// Time averages over `[T/10, T]` for each horizon, each realization run once
/// to the largest horizon.
pub fn lln_probe(cfg: &EnsembleConfig, obs: &Observable, horizons: &[f64], exec: Exec) -> Result<LlnReport> {
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let series = cfg.observe(obs, t_max, exec)?;
    let avgs: Vec<Vec<f64>> = series
        .iter()
        .map(|s| horizons.iter().map(|&h| window_average(s, cfg.dt, h)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let means = (0..horizons.len()).map(|k| stats::mean(&avgs.iter().map(|a| a[k]).collect::<Vec<_>>())).collect();
    let cauchy = (1..horizons.len())
        .map(|k| stats::mean(&avgs.iter().map(|a| (a[k] - a[k - 1]).powi(2)).collect::<Vec<_>>()).sqrt())
        .collect();
    Ok(LlnReport { horizons: horizons.to_vec(), means, cauchy })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltReport {
    pub horizon: f64,
    /// `(T − T/10)^{−1/2} ∫_{T/10}^T (Φ − m) dt` per realization, `m` the pooled mean.
    pub statistics: Vec<f64>,
    pub variance: f64,
    /// 95% bootstrap interval of the variance.
    pub variance_ci: (f64, f64),
    /// KS distance to the fitted normal law.
    pub ks: f64,
    pub histogram: Vec<(f64, usize)>,
}

/// CLT statistics at each horizon, each realization run once to the largest.
pub fn clt_probe(cfg: &EnsembleConfig, obs: &Observable, horizons: &[f64], exec: Exec) -> Result<Vec<CltReport>> {
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let series = cfg.observe(obs, t_max, exec)?;
    horizons
        .iter()
        .map(|&h| {
            let avgs = series.iter().map(|s| window_average(s, cfg.dt, h)).collect::<Result<Vec<f64>>>()?;
            let m = stats::mean(&avgs);
            let span = h - burn_in_index(BURN_IN_FRACTION * h, cfg.dt) as f64 * cfg.dt;
            let statistics: Vec<f64> = avgs.iter().map(|a| (a - m) * span.sqrt()).collect();
            let variance = stats::variance(&statistics);
            let variance_ci = stats::bootstrap_ci(statistics.len(), 1000, 0.95, cfg.seed, |idx| {
                stats::variance(&idx.iter().map(|&i| statistics[i]).collect::<Vec<_>>())
            });
            Ok(CltReport {
                horizon: h,
                ks: stats::ks_normal(&statistics),
                histogram: stats::histogram(&statistics, 20),
                variance,
                variance_ci,
                statistics,
            })
        })
        .collect()
}

pub fn clt_histogram(cfg: &EnsembleConfig, obs: &Observable, horizon: f64, exec: Exec) -> Result<CltReport> {
    Ok(clt_probe(cfg, obs, &[horizon], exec)?.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoReport {
    /// Straight-line upper bound `∫₀¹ exp(ςr‖γ‖²)‖γ'‖ ds` on `ρ_r`.
    pub upper_bound: f64,
    /// `‖U₁ − U₂‖`.
    pub lower: f64,
    /// `exp(ςr max‖U_i‖²)‖U₁ − U₂‖`.
    pub upper: f64,
}

/// `ρ_r` along the segment from `U₁` to `U₂`, by composite Simpson quadrature.
pub fn rho_r_distance(u1: &SpectralState, u2: &SpectralState, r: f64, varsigma: f64, p: &PhysParams) -> Result<RhoReport> {
    if !(r > 0.0 && r <= 1.0) || !(varsigma > 0.0) {
        return Err(Error::InvalidArgument(format!("need r ∈ (0, 1] and ς > 0, got r = {r}, ς = {varsigma}")));
    }
    u1.check_same(u2)?;
    let d = u2 - u1;
    let len = d.weighted_norm(p);
    // ‖γ(s)‖² = a + 2bs + cs²
    let (a, b, c) = (u1.weighted_norm_sq(p), u1.weighted_inner(&d, p), len * len);
    let f = |s: f64| (varsigma * r * (a + 2.0 * b * s + c * s * s)).exp();
    let panels = 2000;
    let h = 1.0 / panels as f64;
    let mut sum = f(0.0) + f(1.0);
    for i in 1..panels {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let upper_bound = sum * h / 3.0 * len;
    let m = a.max(u2.weighted_norm_sq(p));
    Ok(RhoReport { upper_bound, lower: len, upper: (varsigma * r * m).exp() * len })
}

/// Reference for the long-run mean in [`mixing_probe`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeanReference {
    /// Mean over all initial states and realizations on the last tenth of the window.
    Pooled,
    Known(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingReport {
    pub times: Vec<f64>,
    pub reference: f64,
    /// `|E Φ(U(t, U₀)) − reference|` per initial state.
    pub curves: Vec<Vec<f64>>,
    /// Fitted exponential rate per initial state.
    pub rates: Vec<f64>,
}

/// Tracks `|E Φ(U(t,U₀)) − m|` for each `U₀` and fits `−d/dt log` over the
/// middle 80% of the window.
pub fn mixing_probe(
    cfg: &EnsembleConfig,
    obs: &Observable,
    initial: &[SpectralState],
    horizon: f64,
    reference: MeanReference,
    exec: Exec,
) -> Result<MixingReport> {
    if initial.len() < 2 {
        return Err(Error::InvalidArgument("mixing probe needs at least two initial states".into()));
    }
    let steps = grid_index(horizon, cfg.dt)?;
    let means: Vec<Vec<f64>> = initial
        .iter()
        .map(|u0| {
            let sub = EnsembleConfig { initial: InitialLaw::Fixed(u0.clone()), ..cfg.clone() };
            let series = sub.observe(obs, horizon, exec)?;
            Ok((0..=steps).map(|n| stats::mean(&series.iter().map(|s| s[n]).collect::<Vec<_>>())).collect())
        })
        .collect::<Result<_>>()?;
    let reference = match reference {
        MeanReference::Known(m) => m,
        MeanReference::Pooled => {
            let tail = burn_in_index(0.9 * horizon, cfg.dt);
            stats::mean(&means.iter().flat_map(|m| m[tail..].iter().copied()).collect::<Vec<_>>())
        }
    };
    let times: Vec<f64> = (0..=steps).map(|n| n as f64 * cfg.dt).collect();
    let curves: Vec<Vec<f64>> = means.iter().map(|m| m.iter().map(|v| (v - reference).abs()).collect()).collect();
    let rates = curves
        .iter()
        .map(|c| -fit_slope(&times, &c.iter().map(|v| v.ln()).collect::<Vec<_>>(), middle_window(steps)))
        .collect();
    Ok(MixingReport { times, reference, curves, rates })
}
