//! Closed forms for products of single trigonometric modes.
//!
//! With `u = ∇⊥Δ⁻¹ω` and `ψ_j^m` carrying `ω = cos(j·x)` (m = 0) or
//! `sin(j·x)` (m = 1), the velocity is `(−1)^m j⊥ s_{m+1}(j·x) / |j|²` up to
//! the parity of the partner function, and product-to-sum gives
//!
//! `B(ψ_j^m, σ_k^{m'}) = (−1)^{m m'} (j⊥·k) / (2|j|²) · [σ_{j+k}^{m+m'} + (−1)^{m'+1} σ_{j−k}^{m+m'}]`
//!
//! and the same with `ψ` in place of `σ` on both sides.

use super::Combination;
use crate::modes::{Kind, ModeIndex};
use crate::params::PhysParams;

fn sign(e: u8) -> f64 {
    if e & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `B(ψ_j^m, X_k^{m'})` for `X = σ` (`target = Sigma`) or `X = ψ` (`target = Psi`).
pub fn advect_mode(j: ModeIndex, m: u8, target: Kind, k: ModeIndex, mp: u8) -> Combination {
    let (m, mp) = (m & 1, mp & 1);
    let c = sign(m * mp) * j.perp_dot(k) as f64 / (2.0 * j.norm_sq() as f64);
    let r = (m + mp) & 1;
    let mut out = Combination::default();
    out.push(target, j + k, r, c);
    out.push(target, j - k, r, sign(mp + 1) * c);
    out
}

/// `a(j,k) = j1/|j|² + k1/|k|²` and `b(j,k) = j1/|j|² − k1/|k|²`.
pub fn ab(j: ModeIndex, k: ModeIndex) -> (f64, f64) {
    let x = j.j1 as f64 / j.norm_sq() as f64;
    let y = k.j1 as f64 / k.norm_sq() as f64;
    (x + y, x - y)
}

/// `[Z_j^m, σ_k^{m'}]`, which does not depend on the state:
///
/// `−g (−1)^{(m+1)(m'+1)} (j⊥·k)/2 · [(−1)^{m'} b σ_{j−k}^{m+m'+1} − a σ_{j+k}^{m+m'+1}]`.
pub fn z_sigma(p: &PhysParams, j: ModeIndex, m: u8, k: ModeIndex, mp: u8) -> Combination {
    let (m, mp) = (m & 1, mp & 1);
    let (a, b) = ab(j, k);
    let c = -p.g * sign((m + 1) * (mp + 1)) * j.perp_dot(k) as f64 / 2.0;
    let r = (m + mp + 1) & 1;
    let mut out = Combination::default();
    out.push(Kind::Sigma, j - k, r, c * sign(mp) * b);
    out.push(Kind::Sigma, j + k, r, -c * a);
    out
}

/// `[Z_j^m, σ_k^{m'}]` assembled term by term from
/// `g((−1)^{m+1} j1 B(ψ_j^{m+1}, σ_k^{m'}) + (−1)^{m'} k1 B(ψ_k^{m'+1}, σ_j^m))`.
pub fn z_sigma_from_products(p: &PhysParams, j: ModeIndex, m: u8, k: ModeIndex, mp: u8) -> Combination {
    let (m, mp) = (m & 1, mp & 1);
    let mut out = Combination::default();
    out.add_scaled(&advect_mode(j, m + 1, Kind::Sigma, k, mp), p.g * sign(m + 1) * j.j1 as f64);
    out.add_scaled(&advect_mode(k, mp + 1, Kind::Sigma, j, m), p.g * sign(mp) * k.j1 as f64);
    out
}
