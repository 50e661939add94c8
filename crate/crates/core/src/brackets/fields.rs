//! Closed forms of the bracket family `Y`, `Z`, `[Z, σ]`, `[Z, Y]` and the
//! generated `ψ` directions with their θ-only error terms.

use super::lemma::{advect_mode, z_sigma};
use super::{BracketContext, Combination};
use crate::error::{Error, Result};
use crate::modes::{Kind, ModeIndex};
use crate::state::{unit_scale, Band, SpectralState};

pub(crate) fn parity_sign(e: u8) -> f64 {
    if e & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

const E1: ModeIndex = ModeIndex::new(1, 0);

/// Weights of `[Z_{ℓ'}^m, Y_{e1}^{m'}]`, indexed by `(m, m')`, whose explicit
/// parts combine to `ψ_ℓ^p` for `ℓ = (0, ℓ2)`, `ℓ' = ℓ + e1`.
pub fn psi_axis_weights(l2: i32, p: u8, g: f64) -> [(u8, u8, f64); 2] {
    let l2f = l2 as f64;
    let c = (1.0 + l2f * l2f) / (g * g * l2f.powi(3));
    if p & 1 == 0 {
        [(0, 0, c), (1, 1, c)]
    } else {
        [(1, 0, c), (0, 1, -c)]
    }
}

impl BracketContext {
    fn check_mode(&self, j: ModeIndex) -> Result<()> {
        if !j.is_canonical() || j.max_norm() as usize > self.n_trunc() {
            return Err(Error::OutsideTruncation { index: j, n_trunc: self.n_trunc() });
        }
        Ok(())
    }

    fn c1(&self, j: ModeIndex, m: u8) -> f64 {
        parity_sign(m) * self.params.g * j.j1 as f64
    }

    /// `Y_j^m(U) = ν2|j|²σ_j^m + (−1)^m g j1 ψ_j^{m+1} + B(U, σ_j^m)`.
    pub fn y(&self, j: ModeIndex, m: u8, u: &SpectralState) -> Result<SpectralState> {
        self.check_mode(j)?;
        self.headroom(u.support_radius() + j.max_norm() as usize)?;
        let sigma = self.element(Kind::Sigma, j, m)?;
        let mut out = self.b(u, &sigma);
        out.axpy(self.params.nu2 * j.norm_sq() as f64, &sigma);
        out.add_element(crate::BasisElement::new(Kind::Psi, j, m + 1), self.c1(j, m))?;
        Ok(out)
    }

    /// `Y_j^m` with the drift frozen at `U` and the field at `Ū`; equal to `y`
    /// because `B(·, σ)` only sees the vorticity.
    pub fn y_shift_invariant(&self, j: ModeIndex, m: u8, ubar: &SpectralState) -> Result<SpectralState> {
        self.y(j, m, ubar)
    }

    /// `Z_j^m(U) = [F, Y_j^m](U)` in seven-term form:
    ///
    /// `B(F(U), σ) + ν2²|j|⁴σ + c1(ν1 + ν2)|j|²ψ^{m+1} + A B(U, σ) + ν2|j|² B(U, σ)
    ///  + c1 (B(ψ^{m+1}, U) + B(U, ψ^{m+1})) + B(U, B(U, σ)) − G B(U, σ)`
    ///
    /// with `c1 = (−1)^m g j1`.
    pub fn z(&self, j: ModeIndex, m: u8, u: &SpectralState) -> Result<SpectralState> {
        self.check_mode(j)?;
        self.headroom(2 * u.support_radius() + j.max_norm() as usize)?;
        let p = &self.params;
        let q = j.norm_sq() as f64;
        let c1 = self.c1(j, m);
        let sigma = self.element(Kind::Sigma, j, m)?;
        let psi = self.element(Kind::Psi, j, m + 1)?;
        let bus = self.b(u, &sigma);
        let mut out = self.b(&self.drift(u), &sigma);
        out.axpy(p.nu2 * p.nu2 * q * q, &sigma);
        out.axpy(c1 * (p.nu1 + p.nu2) * q, &psi);
        out += &self.a(&bus);
        out.axpy(p.nu2 * q, &bus);
        out.axpy(c1, &self.b(&psi, u));
        out.axpy(c1, &self.b(u, &psi));
        out += &self.b(u, &bus);
        out -= &self.g_op(&bus);
        Ok(out)
    }

    /// `∇Z_j^m(U)X`.
    pub fn z_derivative(&self, j: ModeIndex, m: u8, u: &SpectralState, x: &SpectralState) -> Result<SpectralState> {
        self.check_mode(j)?;
        let (ru, rx) = (u.support_radius(), x.support_radius());
        self.headroom(ru.max(rx) + rx + j.max_norm() as usize)?;
        let p = &self.params;
        let c1 = self.c1(j, m);
        let sigma = self.element(Kind::Sigma, j, m)?;
        let psi = self.element(Kind::Psi, j, m + 1)?;
        let mut dfx = self.g_op(x);
        dfx -= &self.a(x);
        dfx -= &self.b(u, x);
        dfx -= &self.b(x, u);
        let bxs = self.b(x, &sigma);
        let mut out = self.b(&dfx, &sigma);
        out += &self.a(&bxs);
        out.axpy(p.nu2 * j.norm_sq() as f64, &bxs);
        out.axpy(c1, &self.b(&psi, x));
        out.axpy(c1, &self.b(x, &psi));
        out += &self.b(x, &self.b(u, &sigma));
        out += &self.b(u, &bxs);
        out -= &self.g_op(&bxs);
        Ok(out)
    }

    /// `[Z_j^m, σ_k^{m'}]`, a constant field.
    pub fn z_sigma(&self, j: ModeIndex, m: u8, k: ModeIndex, mp: u8) -> Result<SpectralState> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        self.headroom((j + k).max_norm() as usize)?;
        let c = z_sigma(&self.params, j, m, k, mp);
        let mut out = SpectralState::zeros(self.n_trunc());
        for (e, v) in &c.terms {
            if e.index.max_norm() as usize <= self.n_trunc() {
                out.add_element(*e, *v)?;
            }
        }
        Ok(out)
    }

    /// `[Z_j^m, Y_k^{m'}](U) = B(Z_j^m(U), σ_k^{m'}) − ∇Z_j^m(U) Y_k^{m'}(U)`.
    pub fn z_y(&self, j: ModeIndex, m: u8, k: ModeIndex, mp: u8, u: &SpectralState) -> Result<SpectralState> {
        self.check_mode(k)?;
        self.headroom(2 * u.support_radius() + (j.max_norm() + k.max_norm()) as usize)?;
        let sigma_k = self.element(Kind::Sigma, k, mp)?;
        let yk = self.y(k, mp, u)?;
        let mut out = self.b(&self.z(j, m, u)?, &sigma_k);
        out -= &self.z_derivative(j, m, u, &yk)?;
        Ok(out)
    }

    /// ω-only explicit part of `[Z_j^m, Y_k^{m'}]`:
    ///
    /// `(−1)^{m+m'+1} g² j1 k1 (B(ψ_j^{m+1}, ψ_k^{m'+1}) + B(ψ_k^{m'+1}, ψ_j^{m+1}))
    ///  + (−1)^{m'} g k1 G B(ψ_k^{m'+1}, σ_j^m)`.
    pub fn z_y_explicit(&self, j: ModeIndex, m: u8, k: ModeIndex, mp: u8) -> Combination {
        let g = self.params.g;
        let (m1, mp1) = (m + 1, mp + 1);
        let mut out = Combination::default();
        let c = parity_sign(m + mp + 1) * g * g * (j.j1 * k.j1) as f64;
        out.add_scaled(&advect_mode(j, m1, Kind::Psi, k, mp1), c);
        out.add_scaled(&advect_mode(k, mp1, Kind::Psi, j, m1), c);
        let c2 = parity_sign(mp) * g * k.j1 as f64;
        for (e, v) in advect_mode(k, mp1, Kind::Sigma, j, m).terms {
            // G σ_l^r = (−1)^{r+1} g l1 ψ_l^{r+1}
            let gl = parity_sign(e.parity + 1) * g * e.index.j1 as f64;
            out.push(Kind::Psi, e.index, e.parity + 1, c2 * v * gl);
        }
        out
    }

    /// θ-only remainder `H_{j,k}^{m,m'}(U)`: `[Z, Y]` minus its explicit part.
    pub fn remainder_h(&self, j: ModeIndex, m: u8, k: ModeIndex, mp: u8, u: &SpectralState) -> Result<SpectralState> {
        let mut out = self.z_y(j, m, k, mp, u)?;
        out -= &self.z_y_explicit(j, m, k, mp).to_state(self.n_trunc())?;
        Ok(out)
    }

    /// Bracket combination producing `ψ_j^m + J_{j,m}(U)`.
    ///
    /// For `j1 ≠ 0` this is `(−1)^{m+1}/(g j1) · Y_j^{m+1}(U)`; on the axis
    /// `j = (0, ℓ2)` it is the combination of `[Z_{j+e1}, Y_{e1}]` given by
    /// [`psi_axis_weights`].
    pub fn psi_with_error(&self, j: ModeIndex, m: u8, u: &SpectralState) -> Result<SpectralState> {
        self.check_mode(j)?;
        if j.j1 != 0 {
            let y = self.y(j, m + 1, u)?;
            return Ok(y.scaled(parity_sign(m + 1) / (self.params.g * j.j1 as f64)));
        }
        let lp = j + E1;
        let mut out = SpectralState::zeros(self.n_trunc());
        for (a, b, w) in psi_axis_weights(j.j2, m, self.params.g) {
            out.axpy(w, &self.z_y(lp, a, E1, b, u)?);
        }
        Ok(out)
    }

    /// `J_{j,m}(U)`: the θ part of [`Self::psi_with_error`]. Its ω part is
    /// exactly `ψ_j^m`, so `J` is computed directly without cancellation.
    pub fn error_term(&self, j: ModeIndex, m: u8, u: &SpectralState) -> Result<SpectralState> {
        self.check_mode(j)?;
        if j.j1 != 0 {
            let sigma = self.element(Kind::Sigma, j, m + 1)?;
            self.headroom(u.support_radius() + j.max_norm() as usize)?;
            let mut out = self.b(u, &sigma);
            out.axpy(self.params.nu2 * j.norm_sq() as f64, &sigma);
            out.scale(parity_sign(m + 1) / (self.params.g * j.j1 as f64));
            return Ok(out);
        }
        Ok(self.psi_with_error(j, m, u)?.theta_part())
    }

    /// `Q_Ñ J_{j,m}(U)` and its weighted norm.
    pub fn junk_tail(&self, j: ModeIndex, m: u8, u: &SpectralState, n_tilde: usize) -> Result<(SpectralState, f64)> {
        if n_tilde > self.n_trunc() {
            return Err(Error::TruncationOverflow { required: n_tilde, n_trunc: self.n_trunc() });
        }
        let tail = self.error_term(j, m, u)?.project(n_tilde, Band::High);
        let norm = tail.weighted_norm(&self.params);
        Ok((tail, norm))
    }

    /// Low-mode system `𝔅_{N,Ñ}(U)` as unit vectors of the energy pairing:
    /// `σ̂_j^m` and `ψ̂_j^m + Q_Ñ Ĵ_{j,m}(U)` for canonical `|j| ≤ N`, where the
    /// hats rescale by the norm of `ψ_j^m`.
    pub fn low_mode_system(&self, n: usize, n_tilde: usize, u: &SpectralState) -> Result<Vec<SpectralState>> {
        if n >= n_tilde {
            return Err(Error::InvalidArgument(format!("need N < Ñ, got N = {n}, Ñ = {n_tilde}")));
        }
        let s_sigma = unit_scale(Kind::Sigma, &self.params);
        let s_psi = unit_scale(Kind::Psi, &self.params);
        let mut out = Vec::new();
        for j in crate::modes::lattice::modes(self.n_trunc()) {
            if j.norm_sq() > (n * n) as i64 {
                continue;
            }
            for m in 0..2u8 {
                out.push(self.element(Kind::Sigma, j, m)?.scaled(s_sigma));
                let mut b = self.element(Kind::Psi, j, m)?;
                b += &self.junk_tail(j, m, u, n_tilde)?.0;
                out.push(b.scaled(s_psi));
            }
        }
        Ok(out)
    }
}
