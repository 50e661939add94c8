//! Lie-bracket calculus of the drift `F` and the constant noise directions.
//!
//! Conventions: `[E1, E2](U) = ∇E2(U)E1(U) − ∇E1(U)E2(U)`, `Y_j^m = [F, σ_j^m]`,
//! `Z_j^m = [F, Y_j^m]`. Closed forms live in [`fields`]; [`bracket_fd`] is the
//! independent finite-difference oracle.

pub mod cascade;
pub mod fields;
pub mod lemma;
pub mod quadratic;
pub mod span;

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::modes::{BasisElement, Kind, ModeIndex};
use crate::params::PhysParams;
use crate::spectral::{buoyancy, dissipation, Spectral};
use crate::state::SpectralState;
use std::sync::Arc;

pub use fields::*;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-4;

type Eval<'a> = Box<dyn Fn(&SpectralState) -> Result<SpectralState> + Send + Sync + 'a>;

/// A vector field on the truncated phase space.
pub struct VectorField<'a> {
    eval: Eval<'a>,
    pub affine: bool,
    pub descriptor: String,
}

impl<'a> VectorField<'a> {
    pub fn new<F>(descriptor: impl Into<String>, affine: bool, f: F) -> Self
    where
        F: Fn(&SpectralState) -> Result<SpectralState> + Send + Sync + 'a,
    {
        Self { eval: Box::new(f), affine, descriptor: descriptor.into() }
    }

    pub fn constant(descriptor: impl Into<String>, value: SpectralState) -> Self {
        Self::new(descriptor, true, move |_| Ok(value.clone()))
    }

    pub fn eval(&self, u: &SpectralState) -> Result<SpectralState> {
        (self.eval)(u)
    }
}

impl std::fmt::Debug for VectorField<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VectorField({})", self.descriptor)
    }
}

/// `(E(U + h v) − E(U − h v)) / 2h`.
pub fn directional_fd(e: &VectorField, u: &SpectralState, v: &SpectralState, h: f64) -> Result<SpectralState> {
    let mut up = u.clone();
    up.axpy(h, v);
    let mut um = u.clone();
    um.axpy(-h, v);
    let mut d = e.eval(&up)?;
    d -= &e.eval(&um)?;
    d.scale(0.5 / h);
    Ok(d)
}

/// Central-difference Lie bracket `∇E2(U)E1(U) − ∇E1(U)E2(U)`.
pub fn bracket_fd(e1: &VectorField, e2: &VectorField, u: &SpectralState, h: f64) -> Result<SpectralState> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
    }
    let v1 = e1.eval(u)?;
    let v2 = e2.eval(u)?;
    let mut out = directional_fd(e2, u, &v1, h)?;
    out -= &directional_fd(e1, u, &v2, h)?;
    Ok(out)
}

/// `∇E(Ū)F(U) − ∇F(U)E(Ū)`: the bracket with the drift at the actual state
/// and the field at the shifted state.
pub fn mixed_bracket_fd(
    f: &VectorField,
    e: &VectorField,
    u: &SpectralState,
    ubar: &SpectralState,
    h: f64,
) -> Result<SpectralState> {
    let fu = f.eval(u)?;
    let eu = e.eval(ubar)?;
    let mut out = directional_fd(e, ubar, &fu, h)?;
    out -= &directional_fd(f, u, &eu, h)?;
    Ok(out)
}

/// Finite linear combination of basis elements.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Combination {
    pub terms: Vec<(BasisElement, f64)>,
}

impl Combination {
    /// Adds `c` times the element with a possibly non-canonical index; the zero
    /// mode contributes nothing.
    pub fn push(&mut self, kind: Kind, index: ModeIndex, parity: u8, c: f64) {
        if c == 0.0 {
            return;
        }
        let Some((e, sign)) = BasisElement::fold(kind, index, parity) else {
            return;
        };
        match self.terms.iter_mut().find(|(b, _)| *b == e) {
            Some((_, v)) => *v += sign * c,
            None => self.terms.push((e, sign * c)),
        }
    }

    pub fn add_scaled(&mut self, other: &Combination, s: f64) {
        for (e, c) in &other.terms {
            self.push(e.kind, e.index, e.parity, s * c);
        }
    }

    pub fn coefficient(&self, e: BasisElement) -> f64 {
        self.terms.iter().filter(|(b, _)| *b == e).map(|(_, c)| c).sum()
    }

    pub fn to_state(&self, n_trunc: usize) -> Result<SpectralState> {
        let mut s = SpectralState::zeros(n_trunc);
        for (e, c) in &self.terms {
            s.add_element(*e, *c)?;
        }
        Ok(s)
    }

    pub fn max_norm(&self) -> usize {
        self.terms.iter().filter(|(_, c)| *c != 0.0).map(|(e, _)| e.index.max_norm() as usize).max().unwrap_or(0)
    }
}

/// Shared setup for closed-form bracket evaluation.
///
/// With `strict` set, every evaluation first checks that all intermediate
/// products fit inside the box, so the truncated algebra is exact.
#[derive(Clone, Debug)]
pub struct BracketContext {
    pub params: PhysParams,
    pub strict: bool,
    spectral: Arc<Spectral>,
}

impl BracketContext {
    pub fn new(params: PhysParams, n_trunc: usize) -> Self {
        Self { params, strict: true, spectral: Spectral::shared(n_trunc) }
    }

    /// Galerkin evaluation: products beyond the box are dropped.
    pub fn truncating(mut self) -> Self {
        self.strict = false;
        self
    }

    pub fn n_trunc(&self) -> usize {
        self.spectral.n_trunc()
    }

    pub fn model(&self) -> Model {
        Model::new(self.params.clone(), self.n_trunc())
    }

    pub(crate) fn b(&self, u: &SpectralState, v: &SpectralState) -> SpectralState {
        self.spectral.advect(u, v)
    }

    pub(crate) fn a(&self, u: &SpectralState) -> SpectralState {
        dissipation(u, &self.params)
    }

    pub(crate) fn g_op(&self, u: &SpectralState) -> SpectralState {
        buoyancy(u, &self.params)
    }

    pub fn drift(&self, u: &SpectralState) -> SpectralState {
        self.spectral.drift(u, &self.params)
    }

    pub(crate) fn element(&self, kind: Kind, j: ModeIndex, m: u8) -> Result<SpectralState> {
        let mut s = SpectralState::zeros(self.n_trunc());
        s.add_element(BasisElement::new(kind, j, m), 1.0)?;
        Ok(s)
    }

    /// Fails when products of total max-norm `required` would leave the box.
    pub(crate) fn headroom(&self, required: usize) -> Result<()> {
        if self.strict && required > self.n_trunc() {
            return Err(Error::TruncationOverflow { required, n_trunc: self.n_trunc() });
        }
        Ok(())
    }

    pub fn field_f(&self) -> VectorField<'_> {
        VectorField::new("F", false, move |u| Ok(self.drift(u)))
    }

    pub fn field_sigma(&self, j: ModeIndex, m: u8) -> Result<VectorField<'static>> {
        Ok(VectorField::constant(format!("sigma[{j},{m}]"), self.element(Kind::Sigma, j, m)?))
    }

    pub fn field_y(&self, j: ModeIndex, m: u8) -> VectorField<'_> {
        VectorField::new(format!("Y[{j},{m}]"), true, move |u| self.y(j, m, u))
    }

    pub fn field_z(&self, j: ModeIndex, m: u8) -> VectorField<'_> {
        VectorField::new(format!("Z[{j},{m}]"), false, move |u| self.z(j, m, u))
    }

    pub fn field_psi_with_error(&self, j: ModeIndex, m: u8) -> VectorField<'_> {
        VectorField::new(format!("psi+J[{j},{m}]"), true, move |u| self.psi_with_error(j, m, u))
    }
}
