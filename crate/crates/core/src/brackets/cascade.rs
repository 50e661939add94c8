//! Time series `g_φ(t) = ⟨K_{t,T}φ, E(Ū(t))⟩` for elements of the bracket
//! chain, with the derivative identity `∂t g_φ = ⟨K_{t,T}φ, [F(U), E(Ū)]⟩`
//! checked by differences in time.

use super::{mixed_bracket_fd, BracketContext, VectorField, FD_STEP};
use crate::dynamics::{Model, NoisePath};
use crate::error::Result;
use crate::modes::ModeIndex;
use crate::state::SpectralState;
use crate::variational::LinearFlow;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChainElement {
    Sigma(ModeIndex, u8),
    Y(ModeIndex, u8),
    Z(ModeIndex, u8),
    ZSigma(ModeIndex, u8, ModeIndex, u8),
    ZY(ModeIndex, u8, ModeIndex, u8),
}

impl std::fmt::Display for ChainElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChainElement::Sigma(j, m) => write!(f, "sigma{j}^{m}"),
            ChainElement::Y(j, m) => write!(f, "Y{j}^{m}"),
            ChainElement::Z(j, m) => write!(f, "Z{j}^{m}"),
            ChainElement::ZSigma(j, m, k, mp) => write!(f, "[Z{j}^{m},sigma{k}^{mp}]"),
            ChainElement::ZY(j, m, k, mp) => write!(f, "[Z{j}^{m},Y{k}^{mp}]"),
        }
    }
}

impl ChainElement {
    pub fn field<'a>(&self, ctx: &'a BracketContext) -> Result<VectorField<'a>> {
        let e = *self;
        Ok(match e {
            ChainElement::Sigma(j, m) => ctx.field_sigma(j, m)?,
            ChainElement::Y(j, m) => ctx.field_y(j, m),
            ChainElement::Z(j, m) => ctx.field_z(j, m),
            ChainElement::ZSigma(j, m, k, mp) => VectorField::constant(e.to_string(), ctx.z_sigma(j, m, k, mp)?),
            ChainElement::ZY(j, m, k, mp) => VectorField::new(e.to_string(), true, move |u| ctx.z_y(j, m, k, mp, u)),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeSeries {
    pub element: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `sup |g_φ|` over `[T/2, T]`.
    pub sup: f64,
    /// `max_n |(g_{n+1} − g_n)/dt − ⟨K_{n,T}φ, [F(U_n), E(Ū_n)]⟩|`.
    pub derivative_residual: f64,
    /// `max_n |⟨K_{n,T}φ, [F(U_n), E(Ū_n)]⟩|`, the scale of the residual.
    pub derivative_scale: f64,
}

/// Runs `U` and `Ū = U − σ_θW` from `u0` on `path` up to `t_end` and reports
/// every chain element on the window `[T/2, T]`.
pub fn cascade_probe(
    model: &Model,
    u0: &SpectralState,
    t_end: f64,
    path: &NoisePath,
    phi: &SpectralState,
    chain: &[ChainElement],
) -> Result<Vec<CascadeSeries>> {
    let u_tr = model.evolve(u0, t_end, path)?;
    let ubar_tr = model.evolve_shifted(u0, t_end, path)?;
    let ctx = BracketContext::new(model.params.clone(), model.n_trunc()).truncating();
    let steps = u_tr.steps();
    let a = steps / 2;
    let flow = LinearFlow::new(&u_tr, a, steps)?;
    let kphi = flow.adjoint_path(a, steps, phi)?;
    let p = &model.params;
    let f = ctx.field_f();
    let mut out = Vec::with_capacity(chain.len());
    for el in chain {
        let e = el.field(&ctx)?;
        let mut values = Vec::with_capacity(steps - a + 1);
        for n in a..=steps {
            values.push(kphi[n - a].weighted_inner(&e.eval(&ubar_tr.states[n])?, p));
        }
        let mut residual = 0.0f64;
        let mut scale = 0.0f64;
        for n in a..steps {
            let br = mixed_bracket_fd(&f, &e, &u_tr.states[n], &ubar_tr.states[n], FD_STEP)?;
            let predicted = kphi[n - a].weighted_inner(&br, p);
            let fd = (values[n + 1 - a] - values[n - a]) / u_tr.dt;
            residual = residual.max((fd - predicted).abs());
            scale = scale.max(predicted.abs());
        }
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let times = (a..=steps).map(|n| n as f64 * u_tr.dt).collect();
        out.push(CascadeSeries { element: el.to_string(), times, values, sup, derivative_residual: residual, derivative_scale: scale });
    }
    Ok(out)
}
