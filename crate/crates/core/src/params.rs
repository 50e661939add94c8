use crate::modes::{BasisElement, ModeIndex};
use serde::{Deserialize, Serialize};

/// One noise direction: amplitude `alpha` on the temperature mode `σ_index^parity`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub index: ModeIndex,
    pub parity: u8,
    pub alpha: f64,
}

impl Forcing {
    pub fn element(&self) -> BasisElement {
        BasisElement::new(crate::modes::Kind::Sigma, self.index, self.parity)
    }
}

/// Physical parameters and the forcing table.
///
/// The weight `ζ = ν1ν2/g²` of the energy norm is fixed at construction, so
/// [`PhysParams::without_buoyancy`] can switch the coupling off while keeping
/// the same geometry on phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub nu1: f64,
    pub nu2: f64,
    pub g: f64,
    zeta: f64,
    pub forcing: Vec<Forcing>,
}

impl PhysParams {
    /// Forcing defaults to both parities of `(1,0)` and `(0,1)` with unit amplitude.
    pub fn new(nu1: f64, nu2: f64, g: f64) -> Self {
        let gw = if g == 0.0 { 1.0 } else { g };
        Self { nu1, nu2, g, zeta: nu1 * nu2 / (gw * gw), forcing: Self::default_forcing(1.0) }
    }

    pub fn default_forcing(alpha: f64) -> Vec<Forcing> {
        let mut v = Vec::with_capacity(4);
        for j in [ModeIndex::new(1, 0), ModeIndex::new(0, 1)] {
            for parity in 0..2 {
                v.push(Forcing { index: j, parity, alpha });
            }
        }
        v
    }

    pub fn with_forcing(mut self, forcing: Vec<Forcing>) -> Self {
        self.forcing = forcing;
        self
    }

    /// No noise directions at all.
    pub fn deterministic(self) -> Self {
        self.with_forcing(Vec::new())
    }

    pub fn without_buoyancy(&self) -> Self {
        Self { g: 0.0, ..self.clone() }
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn kappa(&self) -> f64 {
        self.nu1.min(self.nu2)
    }

    pub fn d(&self) -> usize {
        self.forcing.len()
    }

    /// Checks every hypothesis of the model and returns all violations.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.nu1 > 0.0 && self.nu1.is_finite()) {
            out.push(format!("nu1 = {} must be positive and finite", self.nu1));
        }
        if !(self.nu2 > 0.0 && self.nu2.is_finite()) {
            out.push(format!("nu2 = {} must be positive and finite", self.nu2));
        }
        if self.g == 0.0 || !self.g.is_finite() {
            out.push(format!(
                "g = {} must be nonzero and finite: the unique-ergodicity theorem assumes g != 0",
                self.g
            ));
        }
        for (i, f) in self.forcing.iter().enumerate() {
            if !f.index.is_canonical() {
                out.push(format!("forcing[{i}]: mode {} is not in the half lattice", f.index));
            }
            if f.parity > 1 {
                out.push(format!("forcing[{i}]: parity {} must be 0 or 1", f.parity));
            }
            if f.alpha == 0.0 || !f.alpha.is_finite() {
                out.push(format!("forcing[{i}]: alpha = {} must be nonzero and finite", f.alpha));
            }
            for (k, o) in self.forcing.iter().enumerate().take(i) {
                if o.index == f.index && o.parity == f.parity {
                    out.push(format!("forcing[{i}] duplicates forcing[{k}] ({}, parity {})", f.index, f.parity));
                }
            }
        }
        out
    }
}

impl Default for PhysParams {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}
