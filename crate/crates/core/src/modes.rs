//! Mode indices on the half lattice and the trigonometric basis.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Integer wave vector `j = (j1, j2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub j1: i32,
    pub j2: i32,
}

impl ModeIndex {
    pub const fn new(j1: i32, j2: i32) -> Self {
        Self { j1, j2 }
    }

    pub fn is_zero(self) -> bool {
        self.j1 == 0 && self.j2 == 0
    }

    /// Membership in the half lattice `{j1 > 0} ∪ {j1 = 0, j2 > 0}`.
    pub fn is_canonical(self) -> bool {
        self.j1 > 0 || (self.j1 == 0 && self.j2 > 0)
    }

    /// Folds `k` onto the half lattice. The flag is true when `k` was negated.
    /// Returns `None` for the zero mode.
    pub fn canonical(self) -> Option<(ModeIndex, bool)> {
        if self.is_zero() {
            None
        } else if self.is_canonical() {
            Some((self, false))
        } else {
            Some((-self, true))
        }
    }

    pub fn norm_sq(self) -> i64 {
        let (a, b) = (self.j1 as i64, self.j2 as i64);
        a * a + b * b
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn max_norm(self) -> u32 {
        self.j1.unsigned_abs().max(self.j2.unsigned_abs())
    }

    pub fn l1_norm(self) -> u32 {
        self.j1.unsigned_abs() + self.j2.unsigned_abs()
    }

    /// `j⊥ · k` with `j⊥ = (−j2, j1)`.
    pub fn perp_dot(self, k: ModeIndex) -> i64 {
        -(self.j2 as i64) * (k.j1 as i64) + (self.j1 as i64) * (k.j2 as i64)
    }
}

impl std::ops::Add for ModeIndex {
    type Output = ModeIndex;
    fn add(self, o: ModeIndex) -> ModeIndex {
        ModeIndex::new(self.j1 + o.j1, self.j2 + o.j2)
    }
}

impl std::ops::Sub for ModeIndex {
    type Output = ModeIndex;
    fn sub(self, o: ModeIndex) -> ModeIndex {
        ModeIndex::new(self.j1 - o.j1, self.j2 - o.j2)
    }
}

impl std::ops::Neg for ModeIndex {
    type Output = ModeIndex;
    fn neg(self) -> ModeIndex {
        ModeIndex::new(-self.j1, -self.j2)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.j1, self.j2)
    }
}

/// Which field a basis direction lives in: `Sigma` is temperature, `Psi` is vorticity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    Sigma,
    Psi,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Sigma => "sigma",
            Kind::Psi => "psi",
        })
    }
}

/// A trigonometric basis direction: parity 0 is `cos(j·x)`, parity 1 is `sin(j·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisElement {
    pub kind: Kind,
    pub index: ModeIndex,
    pub parity: u8,
}

impl BasisElement {
    pub fn new(kind: Kind, index: ModeIndex, parity: u8) -> Self {
        Self { kind, index, parity: parity & 1 }
    }

    pub fn sigma(j1: i32, j2: i32, parity: u8) -> Self {
        Self::new(Kind::Sigma, ModeIndex::new(j1, j2), parity)
    }

    pub fn psi(j1: i32, j2: i32, parity: u8) -> Self {
        Self::new(Kind::Psi, ModeIndex::new(j1, j2), parity)
    }

    /// Folds an element with an arbitrary nonzero index onto the half lattice,
    /// returning the canonical element and the sign picked up by
    /// `cos(−j·x) = cos(j·x)`, `sin(−j·x) = −sin(j·x)`.
    pub fn fold(kind: Kind, index: ModeIndex, parity: u8) -> Option<(BasisElement, f64)> {
        let (c, flipped) = index.canonical()?;
        let parity = parity & 1;
        let sign = if flipped && parity == 1 { -1.0 } else { 1.0 };
        Some((BasisElement::new(kind, c, parity), sign))
    }
}

impl fmt::Display for BasisElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}^{}", self.kind, self.index, self.parity)
    }
}

/// Ordering of the canonical modes inside the box `max(|j1|,|j2|) ≤ n`.
///
/// Modes `(0, 1..=n)` come first, then `j1 = 1..=n` with `j2 = −n..=n`.
pub mod lattice {
    use super::ModeIndex;

    pub fn mode_count(n: usize) -> usize {
        2 * n * (n + 1)
    }

    pub fn index_of(j: ModeIndex, n: usize) -> Option<usize> {
        if !j.is_canonical() || j.max_norm() as usize > n {
            return None;
        }
        let n = n as i64;
        let (j1, j2) = (j.j1 as i64, j.j2 as i64);
        let i = if j1 == 0 { j2 - 1 } else { n + (j1 - 1) * (2 * n + 1) + (j2 + n) };
        Some(i as usize)
    }

    pub fn mode_at(i: usize, n: usize) -> ModeIndex {
        if i < n {
            ModeIndex::new(0, i as i32 + 1)
        } else {
            let r = i - n;
            let w = 2 * n + 1;
            ModeIndex::new((r / w) as i32 + 1, (r % w) as i32 - n as i32)
        }
    }

    pub fn modes(n: usize) -> impl Iterator<Item = ModeIndex> {
        (0..mode_count(n)).map(move |i| mode_at(i, n))
    }
}
