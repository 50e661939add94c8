//! Breadth-first generation of the σ and ψ directions reachable from the
//! forced modes, with every prefactor certified in exact rational arithmetic.

use crate::modes::{BasisElement, Kind, ModeIndex};
use num_rational::Ratio;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

type Q = Ratio<i64>;

/// `a(j,k)` and `b(j,k)` as exact rationals.
pub fn ab_exact(j: ModeIndex, k: ModeIndex) -> (Q, Q) {
    let x = Q::new(j.j1 as i64, j.norm_sq());
    let y = Q::new(k.j1 as i64, k.norm_sq());
    (x + y, x - y)
}

/// The target set `I_N`: canonical modes with `|j1| + |j2| ≤ N + 1` other than
/// `(0, N+1)`, `(0, N)`, `(N+1, 0)`, `(N, 0)`.
pub fn target_modes(n: usize) -> Vec<ModeIndex> {
    let r = n as i32 + 1;
    let excluded = [(0, r), (0, r - 1), (r, 0), (r - 1, 0)];
    let mut out = Vec::new();
    for j1 in 0..=r {
        for j2 in -r..=r {
            let j = ModeIndex::new(j1, j2);
            if j.is_canonical() && j.l1_norm() as i32 <= r && !excluded.contains(&(j1, j2)) {
                out.push(j);
            }
        }
    }
    out
}

/// How one direction was produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recipe {
    pub target: BasisElement,
    pub depth: usize,
    pub rule: String,
    /// Exact prefactor multiplying the target, in units of `g`, `g²` as stated in `rule`.
    pub prefactor: String,
}

/// Prefactor and bracket combination producing `σ_target^p` from `Z_j` and the noise direction `σ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaRecipe {
    pub target: ModeIndex,
    pub parity: u8,
    /// Coefficient of `σ_target^p` in units of `g`, after folding onto the half lattice.
    pub prefactor: Q,
    /// `(sign, m, m')` of the terms `[Z_j^m, σ_k^{m'}]`.
    pub terms: [(i8, u8, u8); 2],
}

/// The four recipes for `σ_{j±k}^{0,1}`. Zero-prefactor targets are omitted
/// and reported as unreachable through this pair.
pub fn generate_sigma(j: ModeIndex, k: ModeIndex) -> (Vec<SigmaRecipe>, Vec<(ModeIndex, u8)>) {
    let perp = j.perp_dot(k);
    let (a, b) = ab_exact(j, k);
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    let table: [(ModeIndex, u8, Q, [(i8, u8, u8); 2]); 4] = [
        (j + k, 0, a, [(1, 0, 1), (1, 1, 0)]),
        (j + k, 1, a, [(1, 1, 1), (-1, 0, 0)]),
        (j - k, 0, b, [(1, 0, 1), (-1, 1, 0)]),
        (j - k, 1, b, [(1, 1, 1), (1, 0, 0)]),
    ];
    for (t, p, c, terms) in table {
        let Some((tc, flipped)) = t.canonical() else {
            bad.push((t, p));
            continue;
        };
        let mut pre = c * Q::from_integer(perp);
        if flipped && p == 1 {
            pre = -pre;
        }
        if pre == Q::from_integer(0) {
            bad.push((tc, p));
        } else {
            ok.push(SigmaRecipe { target: tc, parity: p, prefactor: pre, terms });
        }
    }
    (ok, bad)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpanLedger {
    pub forced: Vec<ModeIndex>,
    pub n: usize,
    pub sigma: BTreeSet<BasisElement>,
    pub psi: BTreeSet<BasisElement>,
    pub depth: usize,
    pub targets: Vec<ModeIndex>,
    pub uncovered: Vec<BasisElement>,
    pub recipes: Vec<Recipe>,
}

impl SpanLedger {
    pub fn covers_targets(&self) -> bool {
        self.uncovered.is_empty()
    }

    pub fn contains(&self, e: BasisElement) -> bool {
        match e.kind {
            Kind::Sigma => self.sigma.contains(&e),
            Kind::Psi => self.psi.contains(&e),
        }
    }
}

fn both(set: &BTreeSet<BasisElement>, kind: Kind, j: ModeIndex) -> bool {
    set.contains(&BasisElement::new(kind, j, 0)) && set.contains(&BasisElement::new(kind, j, 1))
}

/// BFS over the admissible moves, restricted to `|j1| + |j2| ≤ N + 1`:
///
/// * `σ_{j±k}^{0,1}` from a generated `σ_j` (both parities) and a forced `σ_k`
///   (both parities) whenever the prefactor `(j⊥·k)a` resp. `(j⊥·k)b` is nonzero;
/// * `ψ_j^m` from `Y_j^{m+1}` when `j1 ≠ 0`;
/// * `ψ_{(0,ℓ2)}^{0,1}` from `[Z_{(1,ℓ2)}, Y_{e1}]` when `σ_{(1,ℓ2)}` is generated
///   and `e1` is forced.
pub fn generate_span(forced: &[ModeIndex], n: usize, depth_cap: usize) -> SpanLedger {
    let reach = n as u32 + 1;
    let forced: Vec<ModeIndex> = forced.iter().filter_map(|j| j.canonical().map(|c| c.0)).collect();
    let mut sigma: BTreeSet<BasisElement> = BTreeSet::new();
    for &k in &forced {
        for p in 0..2 {
            sigma.insert(BasisElement::new(Kind::Sigma, k, p));
        }
    }
    let mut psi = BTreeSet::new();
    let mut recipes: BTreeMap<BasisElement, Recipe> = BTreeMap::new();
    let targets = target_modes(n);
    let wanted: Vec<BasisElement> = targets
        .iter()
        .flat_map(|&j| (0..2).flat_map(move |p| [BasisElement::new(Kind::Sigma, j, p), BasisElement::new(Kind::Psi, j, p)]))
        .collect();
    let covered = |s: &BTreeSet<BasisElement>, q: &BTreeSet<BasisElement>| {
        wanted.iter().all(|e| if e.kind == Kind::Sigma { s.contains(e) } else { q.contains(e) })
    };
    let e1 = ModeIndex::new(1, 0);
    let mut depth = 0;
    while depth < depth_cap && !covered(&sigma, &psi) {
        depth += 1;
        let mut new_sigma = Vec::new();
        let mut new_psi = Vec::new();
        let sources: Vec<ModeIndex> = sigma.iter().map(|e| e.index).collect::<BTreeSet<_>>().into_iter().collect();
        for &j in &sources {
            if !both(&sigma, Kind::Sigma, j) {
                continue;
            }
            for &k in &forced {
                if !both(&sigma, Kind::Sigma, k) {
                    continue;
                }
                for r in generate_sigma(j, k).0 {
                    let e = BasisElement::new(Kind::Sigma, r.target, r.parity);
                    if r.target.l1_norm() > reach || sigma.contains(&e) || recipes.contains_key(&e) {
                        continue;
                    }
                    let rule = r
                        .terms
                        .iter()
                        .map(|(s, m, mp)| format!("{}[Z{j}^{m}, sigma{k}^{mp}]", if *s < 0 { "-" } else { "+" }))
                        .collect::<String>();
                    recipes.insert(e, Recipe { target: e, depth, rule, prefactor: format!("g*{}", r.prefactor) });
                    new_sigma.push(e);
                }
            }
        }
        for e in &sigma {
            let j = e.index;
            if j.j1 != 0 && j.l1_norm() <= reach {
                let t = BasisElement::new(Kind::Psi, j, e.parity + 1);
                if !psi.contains(&t) && !recipes.contains_key(&t) {
                    let rule = format!("Y{j}^{}", e.parity);
                    recipes.insert(t, Recipe { target: t, depth, rule, prefactor: format!("g*{}", j.j1) });
                    new_psi.push(t);
                }
            }
        }
        if both(&sigma, Kind::Sigma, e1) && forced.contains(&e1) {
            for e in &sigma {
                let lp = e.index;
                if lp.j1 != 1 || lp.j2 <= 0 || !both(&sigma, Kind::Sigma, lp) {
                    continue;
                }
                let l = ModeIndex::new(0, lp.j2);
                if l.l1_norm() > reach {
                    continue;
                }
                let l2 = lp.j2 as i64;
                for p in 0..2u8 {
                    let t = BasisElement::new(Kind::Psi, l, p);
                    if psi.contains(&t) || recipes.contains_key(&t) {
                        continue;
                    }
                    let rule = if p == 0 {
                        format!("+[Z{lp}^0, Y{e1}^0]+[Z{lp}^1, Y{e1}^1]")
                    } else {
                        format!("+[Z{lp}^1, Y{e1}^0]-[Z{lp}^0, Y{e1}^1]")
                    };
                    let pre = Q::new(l2 * l2 * l2, 1 + l2 * l2);
                    recipes.insert(t, Recipe { target: t, depth, rule, prefactor: format!("g^2*{pre}") });
                    new_psi.push(t);
                }
            }
        }
        if new_sigma.is_empty() && new_psi.is_empty() {
            break;
        }
        sigma.extend(new_sigma);
        psi.extend(new_psi);
    }
    let uncovered = wanted
        .iter()
        .copied()
        .filter(|e| if e.kind == Kind::Sigma { !sigma.contains(e) } else { !psi.contains(e) })
        .collect();
    SpanLedger { forced, n, sigma, psi, depth, targets, uncovered, recipes: recipes.into_values().collect() }
}
