//! Tangent flow `J_{s,t}`, second variation and adjoint flow `K_{s,t}` along a
//! stored trajectory.
//!
//! The tangent flow is the exact derivative of the integrator: with
//! `L_n = G − ∇B(U_n)`, one step is `ρ ↦ E(ρ + dt L_n ρ)`. Its transpose in the
//! energy pairing is `φ ↦ (I + dt L_n*) E φ`, so the discrete duality
//! `⟨J ξ, φ⟩ = ⟨ξ, K φ⟩` holds to rounding.

use crate::dynamics::{NoisePath, Propagator, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{buoyancy, buoyancy_adjoint, Linearization};
use crate::state::{Band, SpectralState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct LinearFlowRequest<'a> {
    pub trajectory: &'a Trajectory,
    pub s: f64,
    pub t: f64,
    pub direction: SpectralState,
}

impl<'a> LinearFlowRequest<'a> {
    pub fn new(trajectory: &'a Trajectory, s: f64, t: f64, direction: SpectralState) -> Self {
        Self { trajectory, s, t, direction }
    }
}

/// Discretization of the backward system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AdjointScheme {
    /// Transpose of the forward step; duality holds to rounding.
    #[default]
    Exact,
    /// `φ ↦ E(φ + dt L*(U_{n+1}) φ)`: the backward equation discretized on its own
    /// with coefficients frozen at the right endpoint; duality holds to `O(dt)`.
    Frozen,
}

/// Per-step linearizations of a trajectory over a window `[first, last]` of
/// grid indices.
pub struct LinearFlow<'a> {
    tr: &'a Trajectory,
    e: Propagator,
    first: usize,
    lins: Vec<Option<Linearization<'a>>>,
}

impl<'a> LinearFlow<'a> {
    /// Caches `∇B(U_n)` data for `n ∈ [first, last]`.
    pub fn new(tr: &'a Trajectory, first: usize, last: usize) -> Result<Self> {
        if first > last || last > tr.steps() {
            return Err(Error::OutsideHorizon { s: first as f64 * tr.dt, t: last as f64 * tr.dt, horizon: tr.horizon() });
        }
        let sp = tr.model.spectral();
        let lins = (first..=last)
            .map(|n| tr.model.advection.then(|| Linearization::new(sp, &tr.states[n])))
            .collect();
        Ok(Self { tr, e: tr.model.propagator(tr.dt), first, lins })
    }

    pub fn for_interval(tr: &'a Trajectory, s: f64, t: f64) -> Result<Self> {
        let (a, b) = tr.interval(s, t)?;
        Self::new(tr, a, b)
    }

    pub fn trajectory(&self) -> &'a Trajectory {
        self.tr
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn last(&self) -> usize {
        self.first + self.lins.len() - 1
    }

    fn lin(&self, n: usize) -> Option<&Linearization<'a>> {
        self.lins[n - self.first].as_ref()
    }

    /// `L_n ρ = Gρ − ∇B(U_n)ρ`.
    pub fn generator(&self, n: usize, rho: &SpectralState) -> SpectralState {
        let mut out = buoyancy(rho, self.tr.params());
        if let Some(l) = self.lin(n) {
            out -= &l.advection_derivative(rho);
        }
        out
    }

    /// `L_n* φ = G*φ − ∇B(U_n)*φ` in the energy pairing.
    pub fn generator_adjoint(&self, n: usize, phi: &SpectralState) -> SpectralState {
        let p = self.tr.params();
        let mut out = buoyancy_adjoint(phi, p);
        if let Some(l) = self.lin(n) {
            out -= &l.advection_derivative_adjoint(phi, p.zeta());
        }
        out
    }

    /// `ρ ↦ E(ρ + dt L_n ρ)`, the derivative of step `n → n+1`.
    pub fn step(&self, n: usize, rho: &SpectralState) -> SpectralState {
        let mut out = rho.clone();
        out.axpy(self.tr.dt, &self.generator(n, rho));
        self.e.apply(&mut out);
        out
    }

    /// Transpose of [`Self::step`]: `φ ↦ (I + dt L_n*) E φ`.
    pub fn step_adjoint(&self, n: usize, phi: &SpectralState) -> SpectralState {
        let mut ephi = phi.clone();
        self.e.apply(&mut ephi);
        let mut out = ephi.clone();
        out.axpy(self.tr.dt, &self.generator_adjoint(n, &ephi));
        out
    }

    /// Backward step of the frozen scheme, using the snapshot at `n + 1`.
    pub fn step_adjoint_frozen(&self, n: usize, phi: &SpectralState) -> SpectralState {
        let mut out = phi.clone();
        out.axpy(self.tr.dt, &self.generator_adjoint(n + 1, phi));
        self.e.apply(&mut out);
        out
    }

    fn check(&self, a: usize, b: usize) -> Result<()> {
        if a < self.first || b > self.last() || a > b {
            return Err(Error::OutsideHorizon { s: a as f64 * self.tr.dt, t: b as f64 * self.tr.dt, horizon: self.tr.horizon() });
        }
        Ok(())
    }

    /// `J_{a,b}ξ` between grid indices.
    pub fn tangent(&self, a: usize, b: usize, xi: &SpectralState) -> Result<SpectralState> {
        self.check(a, b)?;
        xi.check_same(&self.tr.states[0])?;
        let mut rho = xi.clone();
        for n in a..b {
            rho = self.step(n, &rho);
        }
        Ok(rho)
    }

    /// `J_{a,n}ξ` for every `n ∈ [a, b]`.
    pub fn tangent_path(&self, a: usize, b: usize, xi: &SpectralState) -> Result<Vec<SpectralState>> {
        self.check(a, b)?;
        let mut out = Vec::with_capacity(b - a + 1);
        out.push(xi.clone());
        for n in a..b {
            let next = self.step(n, out.last().unwrap());
            out.push(next);
        }
        Ok(out)
    }

    /// `K_{a,b}φ` between grid indices.
    pub fn adjoint(&self, a: usize, b: usize, phi: &SpectralState, scheme: AdjointScheme) -> Result<SpectralState> {
        self.check(a, b)?;
        phi.check_same(&self.tr.states[0])?;
        let mut out = phi.clone();
        for n in (a..b).rev() {
            out = match scheme {
                AdjointScheme::Exact => self.step_adjoint(n, &out),
                AdjointScheme::Frozen => self.step_adjoint_frozen(n, &out),
            };
        }
        Ok(out)
    }

    /// `K_{n,b}φ` for every `n ∈ [a, b]`, indexed by `n − a`.
    pub fn adjoint_path(&self, a: usize, b: usize, phi: &SpectralState) -> Result<Vec<SpectralState>> {
        self.check(a, b)?;
        let mut out = vec![phi.clone(); b - a + 1];
        for n in (a..b).rev() {
            out[n - a] = self.step_adjoint(n, &out[n + 1 - a]);
        }
        Ok(out)
    }

    /// `J^{(2)}_{a,b}(ξ, ξ')`: the exact second derivative of the scheme,
    /// driven by `−(B(ρ, ρ') + B(ρ', ρ))` with `ρ = J_{a,n}ξ`, `ρ' = J_{a,n}ξ'`.
    pub fn second_variation(&self, a: usize, b: usize, xi: &SpectralState, xi2: &SpectralState) -> Result<SpectralState> {
        self.check(a, b)?;
        let sp = self.tr.model.spectral();
        let mut r1 = xi.clone();
        let mut r2 = xi2.clone();
        let mut out = SpectralState::zeros(xi.n_trunc());
        for n in a..b {
            let mut next = out.clone();
            next.axpy(self.tr.dt, &self.generator(n, &out));
            if self.tr.model.advection {
                let mut src = Linearization::new(sp, &r1).advect(&r2);
                src += &Linearization::new(sp, &r2).advect(&r1);
                next.axpy(-self.tr.dt, &src);
            }
            self.e.apply(&mut next);
            out = next;
            r1 = self.step(n, &r1);
            r2 = self.step(n, &r2);
        }
        Ok(out)
    }
}

pub fn tangent_j(req: &LinearFlowRequest) -> Result<SpectralState> {
    let (a, b) = req.trajectory.interval(req.s, req.t)?;
    LinearFlow::new(req.trajectory, a, b)?.tangent(a, b, &req.direction)
}

pub fn second_variation_j2(req: &LinearFlowRequest, direction2: &SpectralState) -> Result<SpectralState> {
    let (a, b) = req.trajectory.interval(req.s, req.t)?;
    LinearFlow::new(req.trajectory, a, b)?.second_variation(a, b, &req.direction, direction2)
}

pub fn adjoint_k(req: &LinearFlowRequest) -> Result<SpectralState> {
    adjoint_k_with(req, AdjointScheme::Exact)
}

pub fn adjoint_k_with(req: &LinearFlowRequest, scheme: AdjointScheme) -> Result<SpectralState> {
    let (a, b) = req.trajectory.interval(req.s, req.t)?;
    LinearFlow::new(req.trajectory, a, b)?.adjoint(a, b, &req.direction, scheme)
}

/// `|⟨J ξ, φ⟩ − ⟨ξ, K φ⟩| / (‖ξ‖ ‖φ‖)` in the energy pairing.
pub fn duality_defect(flow: &LinearFlow, a: usize, b: usize, xi: &SpectralState, phi: &SpectralState, scheme: AdjointScheme) -> Result<f64> {
    let p = flow.trajectory().params();
    let lhs = flow.tangent(a, b, xi)?.weighted_inner(phi, p);
    let rhs = xi.weighted_inner(&flow.adjoint(a, b, phi, scheme)?, p);
    Ok((lhs - rhs).abs() / (xi.weighted_norm(p) * phi.weighted_norm(p)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdTangentReport {
    /// Relative discrepancy, or the absolute one when `J ξ = 0`.
    pub discrepancy: f64,
    pub absolute: f64,
    pub relative: bool,
}

/// Central difference of the flow map against `J_{0,T}ξ` on the same noise path.
pub fn fd_tangent_check(tr: &Trajectory, path: &NoisePath, xi: &SpectralState, h: f64) -> Result<FdTangentReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h} must be positive")));
    }
    let p = tr.params();
    let t = tr.horizon();
    let u0 = &tr.states[0];
    let mut plus = u0.clone();
    plus.axpy(h, xi);
    let mut minus = u0.clone();
    minus.axpy(-h, xi);
    let up = tr.model.evolve_observed(&plus, t, path, |_, _| {})?;
    let um = tr.model.evolve_observed(&minus, t, path, |_, _| {})?;
    let mut fd = up - &um;
    fd.scale(0.5 / h);
    let j = LinearFlow::new(tr, 0, tr.steps())?.tangent(0, tr.steps(), xi)?;
    let absolute = (&fd - &j).weighted_norm(p);
    let jn = j.weighted_norm(p);
    if jn == 0.0 {
        return Ok(FdTangentReport { discrepancy: absolute, absolute, relative: false });
    }
    Ok(FdTangentReport { discrepancy: absolute / jn, absolute, relative: true })
}

/// Power-iteration estimate of `‖J_{a,b} Q_N‖` (or `‖J_{a,b}‖` without a cut)
/// in the energy norm, using `K = J*`.
pub fn tangent_norm(flow: &LinearFlow, a: usize, b: usize, high_cut: Option<usize>, iters: usize, seed: u64) -> Result<f64> {
    let p = flow.trajectory().params();
    let n = flow.trajectory().model.n_trunc();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut = |v: SpectralState| match high_cut {
        Some(c) => v.project(c, Band::High),
        None => v,
    };
    let mut v = cut(SpectralState::random_smooth(n, n, 1.0, 0.0, &mut rng));
    let mut est = 0.0;
    for _ in 0..iters {
        let norm = v.weighted_norm(p);
        if norm == 0.0 {
            return Ok(0.0);
        }
        v.scale(1.0 / norm);
        let jv = flow.tangent(a, b, &v)?;
        est = jv.weighted_norm(p);
        v = cut(flow.adjoint(a, b, &jv, AdjointScheme::Exact)?);
    }
    Ok(est)
}
