//! Real cos/sin coefficients of `(ω, θ)` on the truncated half lattice.

use crate::error::{Error, Result};
use crate::modes::{lattice, BasisElement, Kind, ModeIndex};
use crate::params::PhysParams;
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// `∫ cos²(j·x) dx` over the torus `[−π, π]²`.
pub const MODE_L2: f64 = 2.0 * PI * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    Low,
    High,
}

/// Field layout: `field[2i + parity]` holds the cos (parity 0) or sin (parity 1)
/// coefficient of canonical mode `i` in [`lattice`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    n_trunc: usize,
    pub omega: Vec<f64>,
    pub theta: Vec<f64>,
}

impl SpectralState {
    pub fn zeros(n_trunc: usize) -> Self {
        let len = 2 * lattice::mode_count(n_trunc);
        Self { n_trunc, omega: vec![0.0; len], theta: vec![0.0; len] }
    }

    pub fn from_parts(n_trunc: usize, omega: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let len = 2 * lattice::mode_count(n_trunc);
        if omega.len() != len || theta.len() != len {
            return Err(Error::InvalidArgument(format!(
                "coefficient arrays of length {}/{} do not match n_trunc = {n_trunc}",
                omega.len(),
                theta.len()
            )));
        }
        Ok(Self { n_trunc, omega, theta })
    }

    pub fn basis_vector(b: BasisElement, n_trunc: usize) -> Result<Self> {
        let mut s = Self::zeros(n_trunc);
        s.add_element(b, 1.0)?;
        Ok(s)
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn mode_count(&self) -> usize {
        lattice::mode_count(self.n_trunc)
    }

    /// Length of the flat coordinate vector `[ω…, θ…]`.
    pub fn dim(&self) -> usize {
        2 * self.omega.len()
    }

    fn slot(&self, index: ModeIndex) -> Result<usize> {
        lattice::index_of(index, self.n_trunc)
            .ok_or(Error::OutsideTruncation { index, n_trunc: self.n_trunc })
    }

    pub fn field(&self, kind: Kind) -> &[f64] {
        match kind {
            Kind::Psi => &self.omega,
            Kind::Sigma => &self.theta,
        }
    }

    pub fn field_mut(&mut self, kind: Kind) -> &mut [f64] {
        match kind {
            Kind::Psi => &mut self.omega,
            Kind::Sigma => &mut self.theta,
        }
    }

    /// Coefficient along a canonical basis element.
    pub fn get(&self, b: BasisElement) -> Result<f64> {
        let i = self.slot(b.index)?;
        Ok(self.field(b.kind)[2 * i + b.parity as usize])
    }

    /// Adds `c·b`, folding a non-canonical index with the reflection sign.
    pub fn add_element(&mut self, b: BasisElement, c: f64) -> Result<()> {
        let Some((e, sign)) = BasisElement::fold(b.kind, b.index, b.parity) else {
            return Ok(());
        };
        let i = self.slot(e.index)?;
        self.field_mut(e.kind)[2 * i + e.parity as usize] += sign * c;
        Ok(())
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self.n_trunc != other.n_trunc {
            return Err(Error::TruncationMismatch { left: self.n_trunc, right: other.n_trunc });
        }
        Ok(())
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        assert_eq!(self.n_trunc, x.n_trunc, "truncation mismatch");
        for (y, x) in self.omega.iter_mut().zip(&x.omega) {
            *y += a * x;
        }
        for (y, x) in self.theta.iter_mut().zip(&x.theta) {
            *y += a * x;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.omega.iter_mut().chain(self.theta.iter_mut()).for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut s = self.clone();
        s.scale(a);
        s
    }

    pub fn omega_part(&self) -> Self {
        Self { n_trunc: self.n_trunc, omega: self.omega.clone(), theta: vec![0.0; self.theta.len()] }
    }

    pub fn theta_part(&self) -> Self {
        Self { n_trunc: self.n_trunc, omega: vec![0.0; self.omega.len()], theta: self.theta.clone() }
    }

    /// Unweighted coefficient pairing; `MODE_L2` times this is the L² pairing.
    pub fn inner_product(&self, other: &Self) -> f64 {
        assert_eq!(self.n_trunc, other.n_trunc, "truncation mismatch");
        dot(&self.omega, &other.omega) + dot(&self.theta, &other.theta)
    }

    /// Energy-space pairing `ζ⟨ω,ω'⟩ + ⟨θ,θ'⟩` in L².
    pub fn weighted_inner(&self, other: &Self, p: &PhysParams) -> f64 {
        assert_eq!(self.n_trunc, other.n_trunc, "truncation mismatch");
        MODE_L2 * (p.zeta() * dot(&self.omega, &other.omega) + dot(&self.theta, &other.theta))
    }

    pub fn weighted_norm_sq(&self, p: &PhysParams) -> f64 {
        self.weighted_inner(self, p)
    }

    pub fn weighted_norm(&self, p: &PhysParams) -> f64 {
        self.weighted_norm_sq(p).sqrt()
    }

    /// Weighted `H^s` norm with multiplier `|j|^{2s}`.
    pub fn sobolev_norm(&self, p: &PhysParams, s: f64) -> f64 {
        let mut w = 0.0;
        let mut t = 0.0;
        for (i, j) in lattice::modes(self.n_trunc).enumerate() {
            let m = (j.norm_sq() as f64).powf(s);
            w += m * (self.omega[2 * i].powi(2) + self.omega[2 * i + 1].powi(2));
            t += m * (self.theta[2 * i].powi(2) + self.theta[2 * i + 1].powi(2));
        }
        (MODE_L2 * (p.zeta() * w + t)).sqrt()
    }

    /// `P_N` (low) or `Q_N = I − P_N` (high) with the Euclidean radius `|j| ≤ N`.
    pub fn project(&self, n: usize, band: Band) -> Self {
        let mut out = self.clone();
        let r2 = (n * n) as i64;
        for (i, j) in lattice::modes(self.n_trunc).enumerate() {
            let low = j.norm_sq() <= r2;
            if low != (band == Band::Low) {
                for v in [&mut out.omega, &mut out.theta] {
                    v[2 * i] = 0.0;
                    v[2 * i + 1] = 0.0;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.omega.iter().chain(&self.theta).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(&self.theta).all(|v| v.is_finite())
    }

    /// Largest `max(|j1|,|j2|)` carrying a coefficient above `1e-13·max_abs`;
    /// 0 for the zero state. The threshold ignores rounding residue left by
    /// transforms on modes that are analytically empty.
    pub fn support_radius(&self) -> usize {
        let tol = 1e-13 * self.max_abs();
        let mut r = 0;
        for (i, j) in lattice::modes(self.n_trunc).enumerate() {
            let nz = [&self.omega, &self.theta].iter().any(|v| v[2 * i].abs() > tol || v[2 * i + 1].abs() > tol);
            if nz {
                r = r.max(j.max_norm() as usize);
            }
        }
        r
    }

    /// Re-embeds into another truncation, dropping modes that do not fit.
    pub fn resized(&self, n_trunc: usize) -> Self {
        let mut out = Self::zeros(n_trunc);
        for (i, j) in lattice::modes(self.n_trunc).enumerate() {
            if let Some(k) = lattice::index_of(j, n_trunc) {
                for p in 0..2 {
                    out.omega[2 * k + p] = self.omega[2 * i + p];
                    out.theta[2 * k + p] = self.theta[2 * i + p];
                }
            }
        }
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.omega);
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn from_flat(n_trunc: usize, flat: &[f64]) -> Result<Self> {
        let half = 2 * lattice::mode_count(n_trunc);
        if flat.len() != 2 * half {
            return Err(Error::InvalidArgument(format!(
                "flat vector of length {} does not match n_trunc = {n_trunc}",
                flat.len()
            )));
        }
        Ok(Self { n_trunc, omega: flat[..half].to_vec(), theta: flat[half..].to_vec() })
    }

    /// Gaussian coefficients with standard deviation `amp·(1 + |j|²)^(−decay/2)`
    /// on modes with `max(|j1|,|j2|) ≤ radius`.
    pub fn random_smooth<R: rand::Rng + ?Sized>(n_trunc: usize, radius: usize, amp: f64, decay: f64, rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let mut u = Self::zeros(n_trunc);
        for (i, j) in lattice::modes(n_trunc).enumerate() {
            if j.max_norm() as usize > radius {
                continue;
            }
            let s = amp * (1.0 + j.norm_sq() as f64).powf(-0.5 * decay);
            for v in [&mut u.omega, &mut u.theta] {
                for q in 0..2 {
                    let z: f64 = StandardNormal.sample(rng);
                    v[2 * i + q] = s * z;
                }
            }
        }
        u
    }

    /// Basis element addressed by a flat coordinate.
    pub fn element_at(n_trunc: usize, flat: usize) -> BasisElement {
        let half = 2 * lattice::mode_count(n_trunc);
        let (kind, r) = if flat < half { (Kind::Psi, flat) } else { (Kind::Sigma, flat - half) };
        BasisElement::new(kind, lattice::mode_at(r / 2, n_trunc), (r % 2) as u8)
    }
}

/// Scale of the `H`-unit vector along each flat coordinate.
pub fn unit_scale(kind: Kind, p: &PhysParams) -> f64 {
    match kind {
        Kind::Psi => 1.0 / (MODE_L2 * p.zeta()).sqrt(),
        Kind::Sigma => 1.0 / MODE_L2.sqrt(),
    }
}

/// Coordinates of a state in the `H`-orthonormal basis `ê_i = e_i · unit_scale`.
pub fn to_orthonormal(u: &SpectralState, p: &PhysParams) -> Vec<f64> {
    let (so, st) = (unit_scale(Kind::Psi, p), unit_scale(Kind::Sigma, p));
    u.omega.iter().map(|v| v / so).chain(u.theta.iter().map(|v| v / st)).collect()
}

pub fn from_orthonormal(n_trunc: usize, c: &[f64], p: &PhysParams) -> Result<SpectralState> {
    let (so, st) = (unit_scale(Kind::Psi, p), unit_scale(Kind::Sigma, p));
    let mut u = SpectralState::from_flat(n_trunc, c)?;
    u.omega.iter_mut().for_each(|v| *v *= so);
    u.theta.iter_mut().for_each(|v| *v *= st);
    Ok(u)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl AddAssign<&SpectralState> for SpectralState {
    fn add_assign(&mut self, rhs: &SpectralState) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SpectralState> for SpectralState {
    fn sub_assign(&mut self, rhs: &SpectralState) {
        self.axpy(-1.0, rhs);
    }
}

impl Add<&SpectralState> for &SpectralState {
    type Output = SpectralState;
    fn add(self, rhs: &SpectralState) -> SpectralState {
        let mut s = self.clone();
        s += rhs;
        s
    }
}

impl Sub<&SpectralState> for &SpectralState {
    type Output = SpectralState;
    fn sub(self, rhs: &SpectralState) -> SpectralState {
        let mut s = self.clone();
        s -= rhs;
        s
    }
}

impl Add<&SpectralState> for SpectralState {
    type Output = SpectralState;
    fn add(mut self, rhs: &SpectralState) -> SpectralState {
        self += rhs;
        self
    }
}

impl Sub<&SpectralState> for SpectralState {
    type Output = SpectralState;
    fn sub(mut self, rhs: &SpectralState) -> SpectralState {
        self -= rhs;
        self
    }
}

impl Mul<&SpectralState> for f64 {
    type Output = SpectralState;
    fn mul(self, rhs: &SpectralState) -> SpectralState {
        rhs.scaled(self)
    }
}

impl Mul<SpectralState> for f64 {
    type Output = SpectralState;
    fn mul(self, mut rhs: SpectralState) -> SpectralState {
        rhs.scale(self);
        rhs
    }
}

impl Neg for SpectralState {
    type Output = SpectralState;
    fn neg(mut self) -> SpectralState {
        self.scale(-1.0);
        self
    }
}
