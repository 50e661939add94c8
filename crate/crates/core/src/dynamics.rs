//! Time integration: exponential Euler with explicit nonlinearity and additive
//! noise on the forced temperature modes.
//!
//! One step reads `U_{n+1} = E(U_n + dt·N(U_n)) + σ_θ ΔW_n` with
//! `E = exp(−A dt)` and `N(U) = G U − B(U, U)`.

use crate::error::{Error, Result};
use crate::modes::lattice;
use crate::params::PhysParams;
use crate::spectral::{buoyancy, dissipation, Linearization, Spectral};
use crate::state::SpectralState;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Coefficients above this magnitude abort the run.
pub const BLOW_UP: f64 = 1e12;

/// Seed of realization `index` under a master seed: the first word of the
/// ChaCha stream `index` keyed by `master`.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Wiener increments for `d` Brownian motions on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub d: usize,
    pub seed: u64,
    /// Row-major `steps × d`.
    pub increments: Vec<f64>,
}

impl NoisePath {
    pub fn generate(seed: u64, d: usize, dt: f64, steps: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = dt.sqrt();
        let increments = (0..steps * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            })
            .collect();
        Self { dt, d, seed, increments }
    }

    pub fn zeros(d: usize, dt: f64, steps: usize) -> Self {
        Self { dt, d, seed: 0, increments: vec![0.0; steps * d] }
    }

    pub fn steps(&self) -> usize {
        if self.d == 0 {
            usize::MAX
        } else {
            self.increments.len() / self.d
        }
    }

    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.d..(n + 1) * self.d]
    }

    /// `W(t_n)`.
    pub fn value(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.d];
        for k in 0..n {
            for (a, b) in w.iter_mut().zip(self.increment(k)) {
                *a += b;
            }
        }
        w
    }

    /// The same Brownian path sampled on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        let steps = self.steps() / factor;
        let mut increments = vec![0.0; steps * self.d];
        for n in 0..steps {
            for f in 0..factor {
                let src = self.increment(n * factor + f);
                for (a, b) in increments[n * self.d..(n + 1) * self.d].iter_mut().zip(src) {
                    *a += b;
                }
            }
        }
        Self { dt: self.dt * factor as f64, d: self.d, seed: self.seed, increments }
    }
}

/// Per-mode factors of `exp(−A dt)`.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub dt: f64,
    e_omega: Vec<f64>,
    e_theta: Vec<f64>,
}

impl Propagator {
    pub fn new(p: &PhysParams, n_trunc: usize, dt: f64) -> Self {
        let mut e_omega = Vec::with_capacity(lattice::mode_count(n_trunc));
        let mut e_theta = Vec::with_capacity(lattice::mode_count(n_trunc));
        for j in lattice::modes(n_trunc) {
            let q = j.norm_sq() as f64;
            e_omega.push((-p.nu1 * q * dt).exp());
            e_theta.push((-p.nu2 * q * dt).exp());
        }
        Self { dt, e_omega, e_theta }
    }

    pub fn apply(&self, u: &mut SpectralState) {
        for i in 0..self.e_omega.len() {
            for s in 0..2 {
                u.omega[2 * i + s] *= self.e_omega[i];
                u.theta[2 * i + s] *= self.e_theta[i];
            }
        }
    }
}

/// Parameters, truncation and the advection switch of the discrete model.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: PhysParams,
    pub advection: bool,
    spectral: Arc<Spectral>,
}

impl Model {
    pub fn new(params: PhysParams, n_trunc: usize) -> Self {
        Self { params, advection: true, spectral: Spectral::shared(n_trunc) }
    }

    /// The same model with `B` switched off.
    pub fn linear(mut self) -> Self {
        self.advection = false;
        self
    }

    pub fn n_trunc(&self) -> usize {
        self.spectral.n_trunc()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn zeros(&self) -> SpectralState {
        SpectralState::zeros(self.n_trunc())
    }

    /// `N(U) = G U − B(U, U)`.
    pub fn nonlinear_part(&self, u: &SpectralState) -> SpectralState {
        let mut out = buoyancy(u, &self.params);
        if self.advection {
            out -= &Linearization::new(&self.spectral, u).self_advection();
        }
        out
    }

    /// `F(U) = −A U + N(U)`.
    pub fn drift(&self, u: &SpectralState) -> SpectralState {
        self.nonlinear_part(u) - &dissipation(u, &self.params)
    }

    /// `σ_θ w = Σ_k α_k w_k σ_k`.
    pub fn noise_vector(&self, w: &[f64]) -> SpectralState {
        let mut out = self.zeros();
        for (f, x) in self.params.forcing.iter().zip(w) {
            out.add_element(f.element(), f.alpha * x).expect("forced mode outside truncation");
        }
        out
    }

    pub fn propagator(&self, dt: f64) -> Propagator {
        Propagator::new(&self.params, self.n_trunc(), dt)
    }

    fn check_forcing(&self) -> Result<()> {
        for f in &self.params.forcing {
            if f.index.max_norm() as usize > self.n_trunc() {
                return Err(Error::OutsideTruncation { index: f.index, n_trunc: self.n_trunc() });
            }
        }
        Ok(())
    }

    fn advance(&self, e: &Propagator, u: &SpectralState, dw: &[f64]) -> SpectralState {
        let mut next = u.clone();
        next.axpy(e.dt, &self.nonlinear_part(u));
        e.apply(&mut next);
        if dw.iter().any(|x| *x != 0.0) {
            next += &self.noise_vector(dw);
        }
        next
    }

    /// One exponential-Euler step.
    pub fn step(&self, u: &SpectralState, dt: f64, dw: &[f64]) -> Result<SpectralState> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if dw.len() != self.params.d() {
            return Err(Error::NoiseDimension { path: dw.len(), forcing: self.params.d() });
        }
        self.check_forcing()?;
        let next = self.advance(&self.propagator(dt), u, dw);
        check_blow_up(&next, 1)?;
        Ok(next)
    }

    fn prepare(&self, u0: &SpectralState, t_end: f64, path: &NoisePath) -> Result<usize> {
        u0.check_same(&self.zeros())?;
        if path.d != self.params.d() {
            return Err(Error::NoiseDimension { path: path.d, forcing: self.params.d() });
        }
        self.check_forcing()?;
        let steps = grid_index(t_end, path.dt)?;
        if path.steps() < steps {
            return Err(Error::PathTooShort { available: path.steps(), required: steps });
        }
        Ok(steps)
    }

    /// Runs to `t_end`, handing each snapshot `(n, U_n)` to `observe`, and
    /// returns the final state. Nothing is stored.
    pub fn evolve_observed<F>(&self, u0: &SpectralState, t_end: f64, path: &NoisePath, mut observe: F) -> Result<SpectralState>
    where
        F: FnMut(usize, &SpectralState),
    {
        let steps = self.prepare(u0, t_end, path)?;
        let e = self.propagator(path.dt);
        let mut u = u0.clone();
        observe(0, &u);
        for n in 0..steps {
            u = self.advance(&e, &u, if path.d == 0 { &[] } else { path.increment(n) });
            check_blow_up(&u, n + 1)?;
            observe(n + 1, &u);
        }
        Ok(u)
    }

    pub fn evolve(&self, u0: &SpectralState, t_end: f64, path: &NoisePath) -> Result<Trajectory> {
        let mut states = Vec::new();
        self.evolve_observed(u0, t_end, path, |_, u| states.push(u.clone()))?;
        Ok(Trajectory { model: self.clone(), dt: path.dt, states, seed: path.seed })
    }

    /// `Ū = U − σ_θW`, advanced as
    /// `Ū_{n+1} = E(Ū_n + σ_θW_n + dt·N(U_n)) − σ_θW_n`
    /// so that it has no noise increment of its own.
    pub fn evolve_shifted(&self, u0: &SpectralState, t_end: f64, path: &NoisePath) -> Result<Trajectory> {
        let steps = self.prepare(u0, t_end, path)?;
        let e = self.propagator(path.dt);
        let mut w = vec![0.0; path.d];
        let mut ubar = u0.clone();
        let mut states = vec![ubar.clone()];
        for n in 0..steps {
            let sw = self.noise_vector(&w);
            let u = &ubar + &sw;
            let mut next = u.clone();
            next.axpy(e.dt, &self.nonlinear_part(&u));
            e.apply(&mut next);
            next -= &sw;
            check_blow_up(&next, n + 1)?;
            for (a, b) in w.iter_mut().zip(path.increment(n)) {
                *a += b;
            }
            ubar = next;
            states.push(ubar.clone());
        }
        Ok(Trajectory { model: self.clone(), dt: path.dt, states, seed: path.seed })
    }
}

fn check_blow_up(u: &SpectralState, step: usize) -> Result<()> {
    let m = u.max_abs();
    if !(m <= BLOW_UP) {
        return Err(Error::BlowUp { step, max_abs: m });
    }
    Ok(())
}

/// Index `n` with `t = n·dt`, rejecting times off the grid.
pub fn grid_index(t: f64, dt: f64) -> Result<usize> {
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(Error::MisalignedTime { time: t, dt });
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * dt + 4.0 * f64::EPSILON * t {
        return Err(Error::MisalignedTime { time: t, dt });
    }
    Ok(n as usize)
}

/// Snapshots on a uniform grid `t_n = n·dt`, `n = 0..=steps`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub model: Model,
    pub dt: f64,
    pub states: Vec<SpectralState>,
    pub seed: u64,
}

impl Trajectory {
    pub fn params(&self) -> &PhysParams {
        &self.model.params
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|n| n as f64 * self.dt).collect()
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let n = grid_index(t, self.dt)?;
        if n > self.steps() {
            return Err(Error::OutsideHorizon { s: t, t, horizon: self.horizon() });
        }
        Ok(n)
    }

    /// Grid indices of `s ≤ t`.
    pub fn interval(&self, s: f64, t: f64) -> Result<(usize, usize)> {
        let (a, b) = (self.index_of(s)?, self.index_of(t)?);
        if a > b {
            return Err(Error::OutsideHorizon { s, t, horizon: self.horizon() });
        }
        Ok((a, b))
    }

    pub fn state_at(&self, t: f64) -> Result<&SpectralState> {
        Ok(&self.states[self.index_of(t)?])
    }
}
