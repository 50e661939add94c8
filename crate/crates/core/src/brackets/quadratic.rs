//! The quadratic form `Q_{N,Ñ}` and its cone lower bound.

use super::BracketContext;
use crate::error::{Error, Result};
use crate::state::{Band, SpectralState};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadReport {
    pub value: f64,
    /// `α/2 − Σ ‖Q_Ñ Ĵ_{j,m}(U)‖²`.
    pub lower_bound: f64,
    /// `‖P_N φ‖²` of the unit direction.
    pub low_fraction: f64,
}

impl BracketContext {
    /// `Σ_{b ∈ 𝔅_{N,Ñ}(U)} ⟨φ, b(U)⟩²` in the energy pairing.
    pub fn quad_form_q(&self, n: usize, n_tilde: usize, u: &SpectralState, phi: &SpectralState) -> Result<f64> {
        let basis = self.low_mode_system(n, n_tilde, u)?;
        Ok(basis.iter().map(|b| phi.weighted_inner(b, &self.params).powi(2)).sum())
    }

    /// `Q` together with the bound `α/2 − Σ‖Q_Ñ Ĵ‖²` valid on the cone `S_{α,N}`.
    pub fn quad_form_report(&self, n: usize, n_tilde: usize, alpha: f64, u: &SpectralState, phi: &SpectralState) -> Result<QuadReport> {
        let p = &self.params;
        let norm = phi.weighted_norm(p);
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("φ must be nonzero".into()));
        }
        let phi = phi.scaled(1.0 / norm);
        let basis = self.low_mode_system(n, n_tilde, u)?;
        let value = basis.iter().map(|b| phi.weighted_inner(b, p).powi(2)).sum();
        let tails: f64 = basis.iter().map(|b| b.project(n_tilde, Band::High).weighted_norm_sq(p)).sum();
        let low_fraction = phi.project(n, Band::Low).weighted_norm_sq(p);
        Ok(QuadReport { value, lower_bound: 0.5 * alpha - tails, low_fraction })
    }
}

fn random_direction<R: Rng + ?Sized>(n_trunc: usize, n: usize, band: Band, rng: &mut R, p: &crate::PhysParams) -> SpectralState {
    let mut u = SpectralState::zeros(n_trunc);
    for v in u.omega.iter_mut().chain(u.theta.iter_mut()) {
        *v = StandardNormal.sample(rng);
    }
    let u = u.project(n, band);
    let norm = u.weighted_norm(p);
    if norm > 0.0 {
        u.scaled(1.0 / norm)
    } else {
        u
    }
}

/// Random unit `φ` with `‖P_N φ‖² = f` for `f` uniform in `[α, 1]`.
pub fn sample_cone<R: Rng + ?Sized>(n_trunc: usize, n: usize, alpha: f64, rng: &mut R, p: &crate::PhysParams) -> SpectralState {
    let f: f64 = rng.random_range(alpha..=1.0);
    let low = random_direction(n_trunc, n, Band::Low, rng, p);
    let high = random_direction(n_trunc, n, Band::High, rng, p);
    let mut phi = low.scaled(f.sqrt());
    if high.weighted_norm(p) > 0.0 {
        phi.axpy((1.0 - f).sqrt(), &high);
    } else {
        phi = low;
    }
    phi
}
