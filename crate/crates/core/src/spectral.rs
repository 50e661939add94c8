//! Pseudo-spectral machinery: transforms between real coefficients and a
//! dealiased grid, and the operators `A`, `B`, `G`, `F`.
//!
//! A real field `Σ a_j cos(j·x) + b_j sin(j·x)` has complex Fourier values
//! `c_j = (a_j − i b_j)/2` and `c_{−j} = conj(c_j)`. Two real fields are packed
//! into one complex transform as `f + i g`.

use crate::modes::{lattice, ModeIndex};
use crate::params::PhysParams;
use crate::state::SpectralState;
use num_complex::Complex64 as C;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Spectral multipliers applied before a transform to the grid.
#[derive(Clone, Copy, Debug)]
enum Op {
    Id,
    Dx,
    Dy,
    /// First velocity component from vorticity: `i j2 ω̂ / |j|²`.
    U1,
    /// Second velocity component from vorticity: `−i j1 ω̂ / |j|²`.
    U2,
}

pub struct Spectral {
    n: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    pos: Vec<usize>,
    neg: Vec<usize>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    ksq: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n_trunc", &self.n).field("grid", &self.m).finish()
    }
}

/// Smallest 5-smooth size that resolves quadratic products of the box exactly.
pub fn grid_size(n_trunc: usize) -> usize {
    let mut m = (3 * n_trunc + 1).max(4);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl Spectral {
    pub fn new(n_trunc: usize) -> Self {
        let m = grid_size(n_trunc);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(m, FftDirection::Forward);
        let inv = planner.plan_fft(m, FftDirection::Inverse);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let nm = lattice::mode_count(n_trunc);
        let mut pos = Vec::with_capacity(nm);
        let mut neg = Vec::with_capacity(nm);
        let mut k1 = Vec::with_capacity(nm);
        let mut k2 = Vec::with_capacity(nm);
        let mut ksq = Vec::with_capacity(nm);
        let wrap = |k: i32| k.rem_euclid(m as i32) as usize;
        for j in lattice::modes(n_trunc) {
            pos.push(wrap(j.j1) * m + wrap(j.j2));
            neg.push(wrap(-j.j1) * m + wrap(-j.j2));
            k1.push(j.j1 as f64);
            k2.push(j.j2 as f64);
            ksq.push(j.norm_sq() as f64);
        }
        Self { n: n_trunc, m, fwd, inv, scratch_len, pos, neg, k1, k2, ksq }
    }

    /// Process-wide cache, one instance per truncation.
    pub fn shared(n_trunc: usize) -> Arc<Spectral> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Spectral>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(n_trunc).or_insert_with(|| Arc::new(Spectral::new(n_trunc))).clone()
    }

    pub fn n_trunc(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.m
    }

    pub fn mode_count(&self) -> usize {
        self.pos.len()
    }

    /// `|j|²` for each canonical mode.
    pub fn wavenumber_sq(&self) -> &[f64] {
        &self.ksq
    }

    fn value(&self, coeffs: &[f64], op: Op, i: usize) -> C {
        let c = C::new(0.5 * coeffs[2 * i], -0.5 * coeffs[2 * i + 1]);
        match op {
            Op::Id => c,
            Op::Dx => c * C::new(0.0, self.k1[i]),
            Op::Dy => c * C::new(0.0, self.k2[i]),
            Op::U1 => c * C::new(0.0, self.k2[i] / self.ksq[i]),
            Op::U2 => c * C::new(0.0, -self.k1[i] / self.ksq[i]),
        }
    }

    fn fft2(&self, buf: &mut [C], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        let mut scratch = vec![C::new(0.0, 0.0); self.scratch_len];
        plan.process_with_scratch(buf, &mut scratch);
        for a in 0..m {
            for b in a + 1..m {
                buf.swap(a * m + b, b * m + a);
            }
        }
        plan.process_with_scratch(buf, &mut scratch);
    }

    /// Grid values of `op_f(f) + i op_g(g)`.
    fn to_grid(&self, f: (&[f64], Op), g: (&[f64], Op)) -> Vec<C> {
        let mut buf = vec![C::new(0.0, 0.0); self.m * self.m];
        let i_unit = C::new(0.0, 1.0);
        for i in 0..self.pos.len() {
            let a = self.value(f.0, f.1, i);
            let b = self.value(g.0, g.1, i);
            buf[self.pos[i]] = a + i_unit * b;
            buf[self.neg[i]] = a.conj() + i_unit * b.conj();
        }
        self.fft2(&mut buf, &self.inv);
        buf
    }

    /// Projects the real and imaginary parts of a grid function back onto the
    /// box, returning the two coefficient arrays.
    fn from_grid(&self, mut buf: Vec<C>) -> (Vec<f64>, Vec<f64>) {
        self.fft2(&mut buf, &self.fwd);
        let norm = 1.0 / (self.m * self.m) as f64;
        let nm = self.pos.len();
        let mut f = vec![0.0; 2 * nm];
        let mut g = vec![0.0; 2 * nm];
        for i in 0..nm {
            let hp = buf[self.pos[i]] * norm;
            let hn = buf[self.neg[i]].conj() * norm;
            let fj = (hp + hn) * 0.5;
            let gj = (hp - hn) * C::new(0.0, -0.5);
            f[2 * i] = 2.0 * fj.re;
            f[2 * i + 1] = -2.0 * fj.im;
            g[2 * i] = 2.0 * gj.re;
            g[2 * i + 1] = -2.0 * gj.im;
        }
        (f, g)
    }

    /// Velocity `u = ∇⊥Δ⁻¹ω` as cos/sin coefficient arrays of `(u1, u2)`.
    pub fn velocity(&self, omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nm = self.pos.len();
        let mut u1 = vec![0.0; 2 * nm];
        let mut u2 = vec![0.0; 2 * nm];
        for i in 0..nm {
            let (a, b) = (omega[2 * i], omega[2 * i + 1]);
            let (k1, k2, q) = (self.k1[i], self.k2[i], self.ksq[i]);
            u1[2 * i] = k2 * b / q;
            u1[2 * i + 1] = -k2 * a / q;
            u2[2 * i] = -k1 * b / q;
            u2[2 * i + 1] = k1 * a / q;
        }
        (u1, u2)
    }

    /// `∂x u2 − ∂y u1` of a velocity in coefficient form.
    pub fn curl(&self, u1: &[f64], u2: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u1.len()];
        for i in 0..self.pos.len() {
            let (k1, k2) = (self.k1[i], self.k2[i]);
            out[2 * i] = k1 * u2[2 * i + 1] - k2 * u1[2 * i + 1];
            out[2 * i + 1] = -k1 * u2[2 * i] + k2 * u1[2 * i];
        }
        out
    }

    /// `∂x u1 + ∂y u2` of a velocity in coefficient form.
    pub fn divergence(&self, u1: &[f64], u2: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u1.len()];
        for i in 0..self.pos.len() {
            let (k1, k2) = (self.k1[i], self.k2[i]);
            out[2 * i] = k1 * u1[2 * i + 1] + k2 * u2[2 * i + 1];
            out[2 * i + 1] = -k1 * u1[2 * i] - k2 * u2[2 * i];
        }
        out
    }

    /// `B(U, V) = (u_U·∇ω_V, u_U·∇θ_V)`, dealiased and truncated to the box.
    pub fn advect(&self, u: &SpectralState, v: &SpectralState) -> SpectralState {
        Linearization::new(self, u).advect(v)
    }

    pub fn drift(&self, u: &SpectralState, p: &PhysParams) -> SpectralState {
        let mut f = buoyancy(u, p);
        f -= &dissipation(u, p);
        f -= &self.advect(u, u);
        f
    }
}

/// Grid data of a frozen state `U`: velocity and the gradients of `ω` and `θ`.
/// Shared by `B(U, ·)`, the tangent operator and its adjoint.
pub struct Linearization<'a> {
    sp: &'a Spectral,
    vel: Vec<C>,
    dw: Vec<C>,
    dt: Vec<C>,
    zero_velocity: bool,
}

impl<'a> Linearization<'a> {
    pub fn new(sp: &'a Spectral, u: &SpectralState) -> Self {
        assert_eq!(u.n_trunc(), sp.n, "truncation mismatch");
        let vel = sp.to_grid((&u.omega, Op::U1), (&u.omega, Op::U2));
        let dw = sp.to_grid((&u.omega, Op::Dx), (&u.omega, Op::Dy));
        let dt = sp.to_grid((&u.theta, Op::Dx), (&u.theta, Op::Dy));
        let zero_velocity = u.omega.iter().all(|x| *x == 0.0);
        Self { sp, vel, dw, dt, zero_velocity }
    }

    pub fn spectral(&self) -> &Spectral {
        self.sp
    }

    /// `B(U, U)` from the cached grids.
    pub fn self_advection(&self) -> SpectralState {
        let n = self.sp.n;
        if self.zero_velocity {
            return SpectralState::zeros(n);
        }
        let prod: Vec<C> = (0..self.vel.len())
            .map(|l| {
                let (u1, u2) = (self.vel[l].re, self.vel[l].im);
                C::new(u1 * self.dw[l].re + u2 * self.dw[l].im, u1 * self.dt[l].re + u2 * self.dt[l].im)
            })
            .collect();
        let (w, t) = self.sp.from_grid(prod);
        SpectralState::from_parts(n, w, t).expect("layout")
    }

    /// `B(U, V)`.
    pub fn advect(&self, v: &SpectralState) -> SpectralState {
        let n = self.sp.n;
        if self.zero_velocity {
            return SpectralState::zeros(n);
        }
        let gw = self.sp.to_grid((&v.omega, Op::Dx), (&v.omega, Op::Dy));
        let gt = self.sp.to_grid((&v.theta, Op::Dx), (&v.theta, Op::Dy));
        let prod: Vec<C> = (0..self.vel.len())
            .map(|l| {
                let (u1, u2) = (self.vel[l].re, self.vel[l].im);
                C::new(u1 * gw[l].re + u2 * gw[l].im, u1 * gt[l].re + u2 * gt[l].im)
            })
            .collect();
        let (mut w, t) = self.sp.from_grid(prod);
        if v.omega.iter().all(|x| *x == 0.0) {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        SpectralState::from_parts(n, w, t).expect("layout")
    }

    /// `∇B(U)ρ = B(U, ρ) + B(ρ, U)`.
    pub fn advection_derivative(&self, rho: &SpectralState) -> SpectralState {
        let sp = self.sp;
        let gv = sp.to_grid((&rho.omega, Op::U1), (&rho.omega, Op::U2));
        let gw = sp.to_grid((&rho.omega, Op::Dx), (&rho.omega, Op::Dy));
        let gt = sp.to_grid((&rho.theta, Op::Dx), (&rho.theta, Op::Dy));
        let prod: Vec<C> = (0..self.vel.len())
            .map(|l| {
                let (u1, u2) = (self.vel[l].re, self.vel[l].im);
                let (r1, r2) = (gv[l].re, gv[l].im);
                let a = u1 * gw[l].re + u2 * gw[l].im + r1 * self.dw[l].re + r2 * self.dw[l].im;
                let b = u1 * gt[l].re + u2 * gt[l].im + r1 * self.dt[l].re + r2 * self.dt[l].im;
                C::new(a, b)
            })
            .collect();
        let (w, t) = sp.from_grid(prod);
        SpectralState::from_parts(sp.n, w, t).expect("layout")
    }

    /// Adjoint of `∇B(U)` in the energy pairing
    /// `⟨X, Y⟩ = ζ⟨X_ω, Y_ω⟩ + ⟨X_θ, Y_θ⟩`.
    ///
    /// `u·∇` is skew since `∇·u = 0`, so `B(U,·)* = −B(U,·)` blockwise.
    /// For `B(·,U)`, write `w = ζφ_ω∇ω_U + φ_θ∇θ_U`; then
    /// `⟨B(ρ,U), φ⟩ = ∫ Kρ_ω · w = ∫ ρ_ω (−Δ⁻¹)(∂x w2 − ∂y w1)`,
    /// which lands in the ω slot divided by `ζ`.
    pub fn advection_derivative_adjoint(&self, phi: &SpectralState, zeta: f64) -> SpectralState {
        let sp = self.sp;
        let gw = sp.to_grid((&phi.omega, Op::Dx), (&phi.omega, Op::Dy));
        let gt = sp.to_grid((&phi.theta, Op::Dx), (&phi.theta, Op::Dy));
        let gp = sp.to_grid((&phi.omega, Op::Id), (&phi.theta, Op::Id));
        let len = self.vel.len();
        let mut adv = Vec::with_capacity(len);
        let mut wv = Vec::with_capacity(len);
        for l in 0..len {
            let (u1, u2) = (self.vel[l].re, self.vel[l].im);
            adv.push(C::new(u1 * gw[l].re + u2 * gw[l].im, u1 * gt[l].re + u2 * gt[l].im));
            let (pw, pt) = (zeta * gp[l].re, gp[l].im);
            wv.push(C::new(pw * self.dw[l].re + pt * self.dt[l].re, pw * self.dw[l].im + pt * self.dt[l].im));
        }
        let (aw, at) = sp.from_grid(adv);
        let (w1, w2) = sp.from_grid(wv);
        let c = sp.curl(&w1, &w2);
        let mut omega = vec![0.0; aw.len()];
        for i in 0..sp.mode_count() {
            for q in 0..2 {
                omega[2 * i + q] = -aw[2 * i + q] + c[2 * i + q] / (sp.ksq[i] * zeta);
            }
        }
        let theta = at.iter().map(|x| -x).collect();
        SpectralState::from_parts(sp.n, omega, theta).expect("layout")
    }
}

/// `A U = (ν1|j|²ω, ν2|j|²θ)`.
pub fn dissipation(u: &SpectralState, p: &PhysParams) -> SpectralState {
    let mut out = u.clone();
    for (i, j) in lattice::modes(u.n_trunc()).enumerate() {
        let q = j.norm_sq() as f64;
        for s in 0..2 {
            out.omega[2 * i + s] *= p.nu1 * q;
            out.theta[2 * i + s] *= p.nu2 * q;
        }
    }
    out
}

/// `G U = (g ∂x θ, 0)`.
pub fn buoyancy(u: &SpectralState, p: &PhysParams) -> SpectralState {
    let mut out = SpectralState::zeros(u.n_trunc());
    for (i, j) in lattice::modes(u.n_trunc()).enumerate() {
        let gk = p.g * j.j1 as f64;
        out.omega[2 * i] = gk * u.theta[2 * i + 1];
        out.omega[2 * i + 1] = -gk * u.theta[2 * i];
    }
    out
}

/// Adjoint of `G` in the energy pairing: `(0, −ζ g ∂x ω)`.
pub fn buoyancy_adjoint(u: &SpectralState, p: &PhysParams) -> SpectralState {
    let mut out = SpectralState::zeros(u.n_trunc());
    let zg = p.zeta() * p.g;
    for (i, j) in lattice::modes(u.n_trunc()).enumerate() {
        let k = zg * j.j1 as f64;
        out.theta[2 * i] = -k * u.omega[2 * i + 1];
        out.theta[2 * i + 1] = k * u.omega[2 * i];
    }
    out
}

pub fn advect_b(u: &SpectralState, v: &SpectralState) -> SpectralState {
    assert_eq!(u.n_trunc(), v.n_trunc(), "truncation mismatch");
    Spectral::shared(u.n_trunc()).advect(u, v)
}

pub fn drift_f(u: &SpectralState, p: &PhysParams) -> SpectralState {
    Spectral::shared(u.n_trunc()).drift(u, p)
}

/// Velocity coefficients `(u1, u2)` of a vorticity field.
pub fn biot_savart(omega: &[f64], n_trunc: usize) -> (Vec<f64>, Vec<f64>) {
    Spectral::shared(n_trunc).velocity(omega)
}

/// Index of a mode in the lattice order (re-exported convenience).
pub fn mode_slot(j: ModeIndex, n_trunc: usize) -> Option<usize> {
    lattice::index_of(j, n_trunc)
}
